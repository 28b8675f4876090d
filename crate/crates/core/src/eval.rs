//! Downstream evaluation: a linear SVM on frozen embeddings, the repeated
//! random-split protocol, and regression metrics.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use crate::dataset::split_indices;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;

const SVM_STREAM: u64 = 0x5_0A11;

/// Which learned object an embedding row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    MoleculeVector,
    Fingerprint,
}

impl EmbeddingSource {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingSource::MoleculeVector => "u",
            EmbeddingSource::Fingerprint => "fingerprint",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub source: EmbeddingSource,
    pub ids: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(source: EmbeddingSource, ids: Vec<usize>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Shape("one id per embedding row".into()));
        }
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Shape("embedding rows differ in length".into()));
            }
        }
        Ok(Self { source, ids, rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub c: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Examples per subgradient step; `None` uses the full training set,
    /// which makes training independent of the seed.
    pub batch_size: Option<usize>,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            iterations: 2000,
            seed: 0,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        math::dot(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// `(1/n) sum max(0, 1 - y (w.x + b)) + ||w||^2 / (2 C n)`
pub fn svm_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = x.len() as f64;
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - yi * (math::dot(w, xi) + b)).max(0.0))
        .sum();
    hinge / n + math::dot(w, w) / (2.0 * c * n)
}

/// Pegasos-style subgradient descent with step `1 / (lambda t)`,
/// `lambda = 1 / (C n)`, projection onto `||w|| <= 1/sqrt(lambda)` and an
/// unregularized bias. Returns the best of the plain and running-average
/// iterates by training objective.
pub fn train_linear_svm(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> Result<LinearSvm> {
    pegasos(x, y, cfg, None)
}

/// Like [`train_linear_svm`], also returning the training objective of the
/// running-average iterate after every step.
pub fn train_linear_svm_traced(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig) -> Result<(LinearSvm, Vec<f64>)> {
    let mut trace = Vec::with_capacity(cfg.iterations);
    let model = pegasos(x, y, cfg, Some(&mut trace))?;
    Ok((model, trace))
}

fn pegasos(x: &[Vec<f64>], y: &[f64], cfg: &SvmConfig, mut trace: Option<&mut Vec<f64>>) -> Result<LinearSvm> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Shape("need one label per example and at least one example".into()));
    }
    if !(cfg.c > 0.0) || cfg.iterations == 0 {
        return Err(Error::Config("SVM needs C > 0 and at least one iteration".into()));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Data("SVM labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Data("SVM training set contains a single class".into()));
    }
    let n = x.len();
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("examples differ in length".into()));
    }
    let lambda = 1.0 / (cfg.c * n as f64);
    let radius = 1.0 / libm::sqrt(lambda);
    let mut r = rng::stream(cfg.seed, SVM_STREAM);
    let batch = cfg.batch_size.map_or(n, |k| k.clamp(1, n));
    let all: Vec<usize> = (0..n).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut avg_w = vec![0.0; dim];
    let mut avg_b = 0.0;
    let mut best = (svm_objective(&w, b, x, y, cfg.c), w.clone(), b);
    let mut gw = vec![0.0; dim];
    for t in 1..=cfg.iterations {
        let picked: Vec<usize> = if batch == n {
            all.clone()
        } else {
            index::sample(&mut r, n, batch).into_vec()
        };
        gw.fill(0.0);
        let mut gb = 0.0;
        for &i in &picked {
            if y[i] * (math::dot(&w, &x[i]) + b) < 1.0 {
                math::axpy(y[i], &x[i], &mut gw);
                gb += y[i];
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let k = picked.len() as f64;
        for (wj, gj) in w.iter_mut().zip(&gw) {
            *wj = (1.0 - eta * lambda) * *wj + eta * gj / k;
        }
        b += eta * gb / k;
        let norm = libm::sqrt(math::dot(&w, &w));
        if norm > radius {
            for wj in &mut w {
                *wj *= radius / norm;
            }
        }
        let tf = t as f64;
        for (a, wj) in avg_w.iter_mut().zip(&w) {
            *a += (wj - *a) / tf;
        }
        avg_b += (b - avg_b) / tf;
        for (i, (cw, cb)) in [(&w, b), (&avg_w, avg_b)].into_iter().enumerate() {
            let obj = svm_objective(cw, cb, x, y, cfg.c);
            if i == 1 {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(obj);
                }
            }
            if obj < best.0 {
                best = (obj, cw.clone(), cb);
            }
        }
    }
    Ok(LinearSvm { w: best.1, b: best.2 })
}

/// Ten labeled points in the plane, not linearly separable.
pub const TOY_2D: [([f64; 2], f64); 10] = [
    ([2.0, 1.0], 1.0),
    ([1.5, 2.0], 1.0),
    ([3.0, 1.5], 1.0),
    ([0.5, 0.5], 1.0),
    ([-0.5, 1.0], 1.0),
    ([-1.0, -1.0], -1.0),
    ([-2.0, -0.5], -1.0),
    ([-1.5, -2.0], -1.0),
    ([0.5, -0.5], -1.0),
    ([1.0, 0.8], -1.0),
];

pub fn toy_2d() -> (Vec<Vec<f64>>, Vec<f64>) {
    TOY_2D.iter().map(|(x, y)| (x.to_vec(), *y)).unzip()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub mean: f64,
    pub std: f64,
    pub accuracies: Vec<f64>,
    /// Split seeds skipped because the training side had a single class.
    pub reshuffles: usize,
}

pub const MAX_SPLIT_ATTEMPTS: usize = 20;

/// Per-dimension `(mean, std)` over `rows`; a zero std is replaced by 1.
pub fn standardizer(rows: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = rows.first().map_or(0, |r| r.len());
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        math::axpy(1.0 / n, r, &mut mean);
    }
    let mut sd = vec![0.0; dim];
    for r in rows {
        for j in 0..dim {
            sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / n;
        }
    }
    for s in &mut sd {
        *s = libm::sqrt(*s);
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    (mean, sd)
}

/// Repeats `repeats` times: split with seed `seed + r`, standardize on the
/// training side, fit the SVM and score accuracy on the test side. A split
/// whose training side has one class is retried with seed
/// `seed + r + a * repeats` for attempt `a`, at most
/// [`MAX_SPLIT_ATTEMPTS`] times.
pub fn evaluate_protocol(
    embeddings: &[Vec<f64>],
    labels: &[f64],
    repeats: usize,
    test_fraction: f64,
    seed: u64,
    svm: &SvmConfig,
) -> Result<ProtocolResult> {
    if embeddings.len() != labels.len() {
        return Err(Error::Shape("embeddings and labels are not aligned".into()));
    }
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data("protocol labels must be 0 or 1".into()));
    }
    let signed: Vec<f64> = labels.iter().map(|&y| if y == 1.0 { 1.0 } else { -1.0 }).collect();
    let mut accuracies = Vec::with_capacity(repeats);
    let mut reshuffles = 0;
    for rep in 1..=repeats as u64 {
        let mut chosen = None;
        for attempt in 0..MAX_SPLIT_ATTEMPTS as u64 {
            let s = seed.wrapping_add(rep).wrapping_add(attempt.wrapping_mul(repeats as u64));
            let (train, test) = split_indices(embeddings.len(), test_fraction, s)?;
            let first = signed[train[0]];
            if train.iter().any(|&i| signed[i] != first) {
                chosen = Some((train, test));
                break;
            }
            reshuffles += 1;
        }
        let (train, test) = chosen.ok_or_else(|| {
            Error::Data(alloc::format!(
                "no two-class training split after {MAX_SPLIT_ATTEMPTS} attempts"
            ))
        })?;
        let train_rows: Vec<&Vec<f64>> = train.iter().map(|&i| &embeddings[i]).collect();
        let (mean, sd) = standardizer(&train_rows);
        let scale = |r: &Vec<f64>| -> Vec<f64> { r.iter().zip(&mean).zip(&sd).map(|((x, m), s)| (x - m) / s).collect() };
        let xs: Vec<Vec<f64>> = train_rows.iter().map(|r| scale(r)).collect();
        let ys: Vec<f64> = train.iter().map(|&i| signed[i]).collect();
        let model = train_linear_svm(&xs, &ys, svm)?;
        let correct = test
            .iter()
            .filter(|&&i| model.predict(&scale(&embeddings[i])) == signed[i])
            .count();
        accuracies.push(correct as f64 / test.len() as f64);
    }
    let (mean, std) = mean_std(&accuracies);
    Ok(ProtocolResult {
        mean,
        std,
        accuracies,
        reshuffles,
    })
}

/// `(rmse, mae)`
pub fn regression_metrics(predictions: &[f64], labels: &[f64]) -> Result<(f64, f64)> {
    if predictions.is_empty() {
        return Err(Error::Data("no predictions to score".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Shape("predictions and labels are not aligned".into()));
    }
    let n = predictions.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, o) in predictions.iter().zip(labels) {
        se += (p - o) * (p - o);
        ae += (p - o).abs();
    }
    Ok((libm::sqrt(se / n), ae / n))
}
