//! Fingerprint readout and the two-layer predictor on top of it.
//!
//! The fingerprint of a molecule is `sum_l sum_v softmax(W h_v^l)` over every
//! level and atom, with one projection `W` shared by all of them. The
//! predictor is `layer2(relu(layer1(fp)))`, followed by a sigmoid for binary
//! classification.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::math;
use crate::nmp::LevelFeatures;
use crate::rng;

pub const DEFAULT_FP_DIM: usize = 64;
pub const DEFAULT_HIDDEN: usize = 100;
/// Predicted probabilities are clamped to `[EPS, 1 - EPS]` inside the
/// cross-entropy.
pub const PROB_EPS: f64 = 1e-7;

const READOUT_STREAM: u64 = 0xA11C_E000_0000_0010;

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams {
    pub task: Task,
    pub d: usize,
    pub d_fp: usize,
    pub n_hidden: usize,
    /// `d_fp x d`
    pub w: Vec<f64>,
    /// `n_hidden x d_fp`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `1 x n_hidden`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

pub type ReadoutGrads = ReadoutParams;

impl ReadoutParams {
    /// `W ~ U(-0.1, 0.1)`, layer weights Glorot-uniform, biases zero.
    pub fn init(seed: u64, d: usize, d_fp: usize, n_hidden: usize, task: Task) -> Result<Self> {
        if d == 0 || d_fp == 0 || n_hidden == 0 {
            return Err(Error::Config("readout dimensions must be positive".into()));
        }
        let mut r = rng::stream(seed, READOUT_STREAM);
        let mut uni = |n: usize, a: f64| -> Vec<f64> { (0..n).map(|_| a * (2.0 * r.random::<f64>() - 1.0)).collect() };
        let w = uni(d_fp * d, 0.1);
        let w1 = uni(n_hidden * d_fp, libm::sqrt(6.0 / (d_fp + n_hidden) as f64));
        let w2 = uni(n_hidden, libm::sqrt(6.0 / (n_hidden + 1) as f64));
        Ok(Self {
            task,
            d,
            d_fp,
            n_hidden,
            w,
            w1,
            b1: vec![0.0; n_hidden],
            w2,
            b2: vec![0.0],
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            task: self.task,
            d: self.d,
            d_fp: self.d_fp,
            n_hidden: self.n_hidden,
            w: vec![0.0; self.w.len()],
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; 1],
        }
    }

    pub fn groups(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("W", &self.w),
            ("layer1.weight", &self.w1),
            ("layer1.bias", &self.b1),
            ("layer2.weight", &self.w2),
            ("layer2.bias", &self.b2),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        [
            ("W", &mut self.w),
            ("layer1.weight", &mut self.w1),
            ("layer1.bias", &mut self.b1),
            ("layer2.weight", &mut self.w2),
            ("layer2.bias", &mut self.b2),
        ]
    }

    pub fn fill_zero(&mut self) {
        for (_, g) in self.groups_mut() {
            g.fill(0.0);
        }
    }

    pub fn check_shapes(&self) -> Result<()> {
        let ok = self.w.len() == self.d_fp * self.d
            && self.w1.len() == self.n_hidden * self.d_fp
            && self.b1.len() == self.n_hidden
            && self.w2.len() == self.n_hidden
            && self.b2.len() == 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("readout parameter sizes are inconsistent".into()))
        }
    }
}

/// `sum_l sum_v softmax(W h[l][v])` where `w` is row-major `d_fp x d`.
pub fn fingerprint(features: &LevelFeatures, w: &[f64], d_fp: usize) -> Result<Vec<f64>> {
    if d_fp == 0 || w.len() != d_fp * features.d {
        return Err(Error::Shape(alloc::format!(
            "projection has {} entries, expected {d_fp} x {}",
            w.len(),
            features.d
        )));
    }
    let mut fp = vec![0.0; d_fp];
    let mut s = vec![0.0; d_fp];
    for l in 0..features.levels {
        for v in 0..features.n_atoms {
            s.fill(0.0);
            math::matvec_acc(w, features.d, features.get(l, v), &mut s);
            math::softmax_in_place(&mut s);
            math::axpy(1.0, &s, &mut fp);
        }
    }
    Ok(fp)
}

/// Intermediate values of one readout evaluation, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutTrace {
    pub fingerprint: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Output before the classification sigmoid.
    pub logit: f64,
    pub output: f64,
}

fn mlp(fp: &[f64], params: &ReadoutParams) -> Result<ReadoutTrace> {
    params.check_shapes()?;
    if fp.len() != params.d_fp {
        return Err(Error::Shape(alloc::format!(
            "fingerprint length {} but readout expects {}",
            fp.len(),
            params.d_fp
        )));
    }
    let mut hidden_pre = params.b1.clone();
    math::matvec_acc(&params.w1, params.d_fp, fp, &mut hidden_pre);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&x| x.max(0.0)).collect();
    let logit = params.b2[0] + math::dot(&params.w2, &hidden);
    let output = match params.task {
        Task::BinaryClassification => math::sigmoid(logit),
        Task::Regression => logit,
    };
    Ok(ReadoutTrace {
        fingerprint: fp.to_vec(),
        hidden_pre,
        hidden,
        logit,
        output,
    })
}

/// Predictor output for a fingerprint: a probability for classification,
/// the raw value for regression.
pub fn predict(fp: &[f64], params: &ReadoutParams) -> Result<f64> {
    Ok(mlp(fp, params)?.output)
}

pub fn forward(features: &LevelFeatures, params: &ReadoutParams) -> Result<ReadoutTrace> {
    if features.d != params.d {
        return Err(Error::Shape(alloc::format!(
            "features have d = {} but readout expects {}",
            features.d,
            params.d
        )));
    }
    let fp = fingerprint(features, &params.w, params.d_fp)?;
    mlp(&fp, params)
}

/// Binary cross-entropy (probabilities clamped to `[PROB_EPS, 1 - PROB_EPS]`)
/// or squared error.
pub fn supervised_loss(prediction: f64, label: f64, task: Task) -> Result<f64> {
    match task {
        Task::BinaryClassification => {
            if !(0.0..=1.0).contains(&prediction) {
                return Err(Error::Numerics(alloc::format!("probability {prediction} outside [0, 1]")));
            }
            let p = prediction.clamp(PROB_EPS, 1.0 - PROB_EPS);
            Ok(-(label * libm::log(p) + (1.0 - label) * libm::log(1.0 - p)))
        }
        Task::Regression => {
            if !prediction.is_finite() {
                return Err(Error::Numerics("regression prediction".into()));
            }
            Ok((prediction - label) * (prediction - label))
        }
    }
}

/// `d loss / d logit` for the loss of [`supervised_loss`].
pub fn loss_grad_logit(trace: &ReadoutTrace, label: f64, task: Task) -> f64 {
    match task {
        Task::BinaryClassification => {
            let y = trace.output;
            if (PROB_EPS..=1.0 - PROB_EPS).contains(&y) {
                y - label
            } else {
                0.0
            }
        }
        Task::Regression => 2.0 * (trace.output - label),
    }
}

/// Accumulates `d loss / d params` into `grads` and `d loss / d h` into
/// `upstream`, given `d loss / d logit`.
pub fn backward(
    features: &LevelFeatures,
    params: &ReadoutParams,
    trace: &ReadoutTrace,
    grad_logit: f64,
    grads: &mut ReadoutGrads,
    upstream: &mut LevelFeatures,
) -> Result<()> {
    if !features.same_shape(upstream) {
        return Err(Error::Shape("upstream does not match features".into()));
    }
    let (d, d_fp) = (params.d, params.d_fp);
    grads.b2[0] += grad_logit;
    math::axpy(grad_logit, &trace.hidden, &mut grads.w2);
    let g_hidden: Vec<f64> = params
        .w2
        .iter()
        .zip(&trace.hidden_pre)
        .map(|(&w, &pre)| if pre > 0.0 { grad_logit * w } else { 0.0 })
        .collect();
    math::axpy(1.0, &g_hidden, &mut grads.b1);
    math::outer_acc(&g_hidden, &trace.fingerprint, &mut grads.w1);
    let mut g_fp = vec![0.0; d_fp];
    math::matvec_t_acc(&params.w1, d_fp, &g_hidden, &mut g_fp);

    let mut p = vec![0.0; d_fp];
    let mut ds = vec![0.0; d_fp];
    for l in 0..features.levels {
        for v in 0..features.n_atoms {
            let h = features.get(l, v);
            p.fill(0.0);
            math::matvec_acc(&params.w, d, h, &mut p);
            math::softmax_in_place(&mut p);
            let pg = math::dot(&p, &g_fp);
            for ((o, &pi), &gi) in ds.iter_mut().zip(&p).zip(&g_fp) {
                *o = pi * (gi - pg);
            }
            math::outer_acc(&ds, h, &mut grads.w);
            math::matvec_t_acc(&params.w, d, &ds, upstream.get_mut(l, v));
        }
    }
    Ok(())
}
