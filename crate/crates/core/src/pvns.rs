//! Unsupervised training of substructure features against per-molecule
//! vectors with a rejection-based negative sampler.
//!
//! For every anchor (molecule `m`, level `l`, atom `v`) the per-anchor
//! objective is
//!
//! ```text
//! ln s(g * u_m . h_v^l) + sum_{h' in negatives} ln s(-g * u_m . h')
//! ```
//!
//! with `s` the logistic sigmoid and `g` the scale `gamma`. This quantity is
//! maximized; the trainer descends on its negation. Negatives are drawn by
//! picking a molecule uniformly from the corpus and then an atom uniformly
//! within it, rejecting the draw when its WL code at level `l` equals the
//! anchor's.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::molgraph::{MoleculeGraph, WlCodes};
use crate::nmp::{EmbedGrads, EmbedParams, ForwardCache};
use crate::optim::{Optimizer, OptimizerConfig, Slot};
use crate::rng;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_MAX_REJECT: usize = 50;

/// One trainable vector per corpus molecule; row `i` belongs to corpus
/// position `i`, whose graph id is `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeVectorTable {
    pub d: usize,
    pub ids: Vec<usize>,
    pub u: Vec<f64>,
}

impl MoleculeVectorTable {
    /// Rows ~ U(-0.1, 0.1).
    pub fn init(seed: u64, d: usize, ids: Vec<usize>) -> Self {
        let mut r = rng::stream(seed, rng::VECTOR_INIT_STREAM);
        let u = (0..ids.len() * d)
            .map(|_| -0.1 + 0.2 * r.random::<f64>())
            .collect();
        Self { d, ids, u }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            d: self.d,
            ids: self.ids.clone(),
            u: vec![0.0; self.u.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.u[i * self.d..(i + 1) * self.d]
    }

    pub fn row_of_id(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegSamplingConfig {
    pub k: usize,
    pub gamma: f64,
    pub max_reject: usize,
}

impl Default for NegSamplingConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            gamma: DEFAULT_GAMMA,
            max_reject: DEFAULT_MAX_REJECT,
        }
    }
}

impl NegSamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.max_reject == 0 {
            return Err(Error::Config("k and max_reject must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(alloc::format!("gamma {} must be positive", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub levels: usize,
    pub d: usize,
    /// Probability of keeping each (atom, level) anchor in an epoch.
    pub anchor_fraction: f64,
    /// Molecules per optimizer step.
    pub batch_size: usize,
    /// When set, each step first draws this many molecules uniformly (with
    /// replacement) and negatives are drawn from that pool instead of the
    /// whole corpus. Marginally each negative molecule is still uniform.
    pub negative_pool: Option<usize>,
    pub vector_update: VectorUpdate,
}

/// How the molecule-vector table is updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorUpdate {
    /// Rows step with the shared optimizer once per batch, like every other
    /// parameter.
    Batch,
    /// Within a batch, every anchor immediately takes a plain gradient step
    /// of size `lr` on its molecule's row, using the batch's features.
    PerAnchor { lr: f64 },
}

pub const DEFAULT_VECTOR_LR: f64 = 0.025;

impl Default for VectorUpdate {
    fn default() -> Self {
        VectorUpdate::PerAnchor { lr: DEFAULT_VECTOR_LR }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            levels: crate::nmp::DEFAULT_LEVELS,
            d: crate::nmp::DEFAULT_DIM,
            anchor_fraction: 1.0,
            batch_size: 16,
            negative_pool: None,
            vector_update: VectorUpdate::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.d == 0 || self.batch_size == 0 {
            return Err(Error::Config("levels, d and batch_size must be positive".into()));
        }
        if !(self.anchor_fraction > 0.0 && self.anchor_fraction <= 1.0) {
            return Err(Error::Config(alloc::format!(
                "anchor fraction {} must lie in (0, 1]",
                self.anchor_fraction
            )));
        }
        if let VectorUpdate::PerAnchor { lr } = self.vector_update {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(alloc::format!("vector learning rate {lr} must be positive")));
            }
        }
        if self.negative_pool == Some(0) {
            return Err(Error::Config("negative pool must be positive".into()));
        }
        if !(self.optimizer.lr() > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Anchor {
    /// Position in the corpus slice.
    pub mol: usize,
    /// Level index, 0-based.
    pub level: usize,
    pub atom: usize,
}

/// Draws one negative `(molecule, atom)` for `anchor`, or `None` after
/// `max_reject` consecutive rejections. `candidates` lists the corpus
/// positions to draw molecules from (the whole corpus, or a step's pool).
pub fn sample_negative(
    anchor: Anchor,
    candidates: &[usize],
    corpus: &[MoleculeGraph],
    wl: &[WlCodes],
    max_reject: usize,
    rng: &mut rng::Rng,
) -> Option<(usize, usize)> {
    if candidates.is_empty() {
        return None;
    }
    let target = wl[anchor.mol].get(anchor.level, anchor.atom);
    for _ in 0..max_reject {
        let m = candidates[rng.random_range(0..candidates.len())];
        let n = corpus[m].num_atoms();
        if n == 0 {
            continue;
        }
        let v = rng.random_range(0..n);
        if wl[m].get(anchor.level, v) != target {
            return Some((m, v));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorPlan {
    pub anchor: Anchor,
    pub negatives: Vec<(usize, usize)>,
}

/// Enumerates the anchors of `batch` (molecule by molecule, then level, then
/// atom) and draws up to `k` negatives for each.
#[allow(clippy::too_many_arguments)]
pub fn plan_negatives(
    batch: &[usize],
    candidates: &[usize],
    corpus: &[MoleculeGraph],
    wl: &[WlCodes],
    levels: usize,
    neg: &NegSamplingConfig,
    anchor_fraction: f64,
    rng: &mut rng::Rng,
) -> Vec<AnchorPlan> {
    let mut plan = Vec::new();
    for &mol in batch {
        for level in 0..levels {
            for atom in 0..corpus[mol].num_atoms() {
                if anchor_fraction < 1.0 && rng.random::<f64>() >= anchor_fraction {
                    continue;
                }
                let anchor = Anchor { mol, level, atom };
                let negatives = (0..neg.k)
                    .filter_map(|_| sample_negative(anchor, candidates, corpus, wl, neg.max_reject, rng))
                    .collect();
                plan.push(AnchorPlan { anchor, negatives });
            }
        }
    }
    plan
}

/// Value and gradients of one anchor's objective.
#[derive(Debug, Clone, PartialEq)]
pub struct NsTerms {
    pub objective: f64,
    pub grad_u: Vec<f64>,
    pub grad_anchor: Vec<f64>,
    pub grad_negatives: Vec<Vec<f64>>,
}

pub fn ns_loss_and_grads(u: &[f64], h_anchor: &[f64], negatives: &[&[f64]], gamma: f64) -> Result<NsTerms> {
    let d = u.len();
    if h_anchor.len() != d || negatives.iter().any(|h| h.len() != d) {
        return Err(Error::Shape(alloc::format!("all vectors must have dimension {d}")));
    }
    let pos = gamma * math::dot(u, h_anchor);
    let mut objective = math::log_sigmoid(pos);
    // d/dx ln s(x) = s(-x)
    let wp = gamma * math::sigmoid(-pos);
    let mut grad_u: Vec<f64> = h_anchor.iter().map(|h| wp * h).collect();
    let grad_anchor = u.iter().map(|x| wp * x).collect();
    let scores: Vec<f64> = negatives.iter().map(|h| gamma * math::dot(u, h)).collect();
    // accumulate in a canonical order so the result does not depend on the
    // order the negatives were drawn in
    let mut order: Vec<usize> = (0..negatives.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .total_cmp(&scores[b])
            .then_with(|| cmp_vectors(negatives[a], negatives[b]))
    });
    for &i in &order {
        objective += math::log_sigmoid(-scores[i]);
        math::axpy(-gamma * math::sigmoid(scores[i]), negatives[i], &mut grad_u);
    }
    let grad_negatives = scores
        .iter()
        .map(|&s| {
            let wn = -gamma * math::sigmoid(s);
            u.iter().map(|x| wn * x).collect()
        })
        .collect();
    Ok(NsTerms {
        objective,
        grad_u,
        grad_anchor,
        grad_negatives,
    })
}

fn cmp_vectors(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(core::cmp::Ordering::Equal)
}

fn anchor_terms(p: &AnchorPlan, cache: &mut ForwardCache<'_>, u: &[f64], gamma: f64) -> Result<NsTerms> {
    let a = p.anchor;
    cache.ensure(a.mol)?;
    for &(m, _) in &p.negatives {
        cache.ensure(m)?;
    }
    let h = cache.features(a.mol).get(a.level, a.atom);
    let negs: Vec<&[f64]> = p
        .negatives
        .iter()
        .map(|&(m, v)| cache.features(m).get(a.level, v))
        .collect();
    ns_loss_and_grads(u, h, &negs, gamma)
}

fn push_upstream(p: &AnchorPlan, cache: &mut ForwardCache<'_>, terms: &NsTerms, scale: f64) {
    let a = p.anchor;
    math::axpy(scale, &terms.grad_anchor, cache.upstream_mut(a.mol).get_mut(a.level, a.atom));
    for (&(m, v), g) in p.negatives.iter().zip(&terms.grad_negatives) {
        math::axpy(scale, g, cache.upstream_mut(m).get_mut(a.level, v));
    }
}

/// Sums the per-anchor objective over `plan` and, when `u_grads` is given,
/// accumulates the gradient of `scale * objective` into `u_grads` and the
/// upstream buffers of `cache`.
pub fn ns_objective(
    plan: &[AnchorPlan],
    cache: &mut ForwardCache<'_>,
    vectors: &MoleculeVectorTable,
    gamma: f64,
    scale: f64,
    mut u_grads: Option<&mut MoleculeVectorTable>,
) -> Result<f64> {
    let mut total = 0.0;
    for p in plan {
        let terms = anchor_terms(p, cache, vectors.row(p.anchor.mol), gamma)?;
        total += terms.objective;
        if let Some(ug) = u_grads.as_deref_mut() {
            math::axpy(scale, &terms.grad_u, ug.row_mut(p.anchor.mol));
            push_upstream(p, cache, &terms, scale);
        }
    }
    Ok(total)
}

/// Like [`ns_objective`] with gradients, except that after each anchor its
/// molecule's row moves by `u_step * d objective / d u` before the next
/// anchor is evaluated. Upstream gradients use the row as it was when the
/// anchor was evaluated.
pub fn ns_objective_online(
    plan: &[AnchorPlan],
    cache: &mut ForwardCache<'_>,
    vectors: &mut MoleculeVectorTable,
    gamma: f64,
    scale: f64,
    u_step: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for p in plan {
        let terms = anchor_terms(p, cache, vectors.row(p.anchor.mol), gamma)?;
        total += terms.objective;
        push_upstream(p, cache, &terms, scale);
        if !math::all_finite(&terms.grad_u) {
            return Err(Error::Numerics("u".into()));
        }
        math::axpy(u_step, &terms.grad_u, vectors.row_mut(p.anchor.mol));
    }
    Ok(total)
}

pub fn corpus_wl_codes(corpus: &[MoleculeGraph], levels: usize) -> Result<Vec<WlCodes>> {
    corpus.iter().map(|g| WlCodes::compute(g, levels)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_objective: f64,
    pub anchors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnsupModel {
    pub params: EmbedParams,
    pub vectors: MoleculeVectorTable,
    pub history: Vec<EpochStats>,
}

fn step_candidates(n: usize, pool: Option<usize>, rng: &mut rng::Rng) -> Vec<usize> {
    match pool {
        None => (0..n).collect(),
        Some(p) => (0..p).map(|_| rng.random_range(0..n)).collect(),
    }
}

pub(crate) fn check_corpus(corpus: &[MoleculeGraph], vocab_size: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Data("empty corpus".into()));
    }
    for g in corpus {
        if let Some(&a) = g.atoms().iter().find(|&&a| a >= vocab_size) {
            return Err(Error::Vocab { id: a, size: vocab_size });
        }
    }
    Ok(())
}

pub fn train_unsupervised(
    corpus: &[MoleculeGraph],
    vocab_size: usize,
    neg: &NegSamplingConfig,
    cfg: &TrainConfig,
) -> Result<UnsupModel> {
    neg.validate()?;
    cfg.validate()?;
    check_corpus(corpus, vocab_size)?;
    let params = EmbedParams::init(cfg.seed, cfg.d, vocab_size)?;
    let vectors = MoleculeVectorTable::init(cfg.seed, cfg.d, corpus.iter().map(MoleculeGraph::id).collect());
    train_unsupervised_from(corpus, params, vectors, neg, cfg)
}

/// Continues training from the given parameters.
pub fn train_unsupervised_from(
    corpus: &[MoleculeGraph],
    mut params: EmbedParams,
    mut vectors: MoleculeVectorTable,
    neg: &NegSamplingConfig,
    cfg: &TrainConfig,
) -> Result<UnsupModel> {
    neg.validate()?;
    cfg.validate()?;
    check_corpus(corpus, params.vocab_size())?;
    if vectors.len() != corpus.len() || vectors.d != params.d {
        return Err(Error::Shape("molecule-vector table does not match corpus".into()));
    }
    let wl = corpus_wl_codes(corpus, cfg.levels)?;
    let mut opt = Optimizer::new(cfg.optimizer);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut grads = params.zeros_like();
    let mut u_grads = vectors.zeros_like();
    for epoch in 0..cfg.epochs {
        let mut r = rng::stream(cfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut r);
        let (mut sum, mut count) = (0.0, 0usize);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let candidates = step_candidates(corpus.len(), cfg.negative_pool, &mut r);
            let plan = plan_negatives(batch, &candidates, corpus, &wl, cfg.levels, neg, cfg.anchor_fraction, &mut r);
            if plan.is_empty() {
                continue;
            }
            grads.fill_zero();
            u_grads.u.fill(0.0);
            let scale = -1.0 / plan.len() as f64;
            let objective = {
                let mut cache = ForwardCache::new(corpus, &params, cfg.levels);
                let obj = match cfg.vector_update {
                    VectorUpdate::Batch => {
                        ns_objective(&plan, &mut cache, &vectors, neg.gamma, scale, Some(&mut u_grads))?
                    }
                    VectorUpdate::PerAnchor { lr } => {
                        ns_objective_online(&plan, &mut cache, &mut vectors, neg.gamma, scale, lr)?
                    }
                };
                cache.backward_into(&mut grads)?;
                obj
            };
            if !objective.is_finite() {
                return Err(Error::Numerics(alloc::format!("objective at epoch {epoch}, step {step}")));
            }
            sum += objective;
            count += plan.len();
            apply_step(&mut opt, &mut params, &grads, &mut vectors.u, &u_grads.u, cfg.vector_update)
                .map_err(|e| with_context(e, epoch, step))?;
        }
        history.push(EpochStats {
            epoch,
            mean_objective: if count > 0 { sum / count as f64 } else { 0.0 },
            anchors: count,
        });
    }
    Ok(UnsupModel {
        params,
        vectors,
        history,
    })
}

pub(crate) fn with_context(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::Numerics(what) => Error::Numerics(alloc::format!("{what} (epoch {epoch}, step {step})")),
        other => other,
    }
}

fn apply_step(
    opt: &mut Optimizer,
    params: &mut EmbedParams,
    grads: &EmbedGrads,
    u: &mut [f64],
    u_grad: &[f64],
    update: VectorUpdate,
) -> Result<()> {
    let gg = grads.groups();
    let mut slots: Vec<Slot<'_>> = params
        .groups_mut()
        .into_iter()
        .zip(gg.iter())
        .map(|((name, p), (_, g))| Slot::new(name, p, g))
        .collect();
    if update == VectorUpdate::Batch {
        slots.push(Slot::new("u", u, u_grad));
    }
    opt.step(&mut slots)
}

/// Mean per-anchor objective over every anchor of the corpus with negatives
/// drawn from a fixed stream of `seed`, so that two parameter sets can be
/// compared on identical draws.
pub fn evaluate_objective(
    corpus: &[MoleculeGraph],
    params: &EmbedParams,
    vectors: &MoleculeVectorTable,
    neg: &NegSamplingConfig,
    levels: usize,
    seed: u64,
) -> Result<f64> {
    neg.validate()?;
    check_corpus(corpus, params.vocab_size())?;
    let wl = corpus_wl_codes(corpus, levels)?;
    let mut r = rng::stream(seed, rng::EVAL_STREAM);
    let all: Vec<usize> = (0..corpus.len()).collect();
    let (mut sum, mut count) = (0.0, 0usize);
    // chunked so the forward cache stays small on large corpora
    for batch in all.chunks(64) {
        let plan = plan_negatives(batch, &all, corpus, &wl, levels, neg, 1.0, &mut r);
        let mut cache = ForwardCache::new(corpus, params, levels);
        sum += ns_objective(&plan, &mut cache, vectors, neg.gamma, 0.0, None)?;
        count += plan.len();
    }
    if count == 0 {
        return Err(Error::Data("corpus has no atoms".into()));
    }
    Ok(sum / count as f64)
}

/// Groups negatives by molecule; useful for inspecting a plan.
pub fn negatives_by_molecule(plan: &[AnchorPlan]) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for p in plan {
        for &(m, _) in &p.negatives {
            *out.entry(m).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::AtomVocab;
    use crate::smiles;

    fn corpus(smiles_list: &[&str]) -> (Vec<MoleculeGraph>, AtomVocab) {
        let mut vocab = AtomVocab::new();
        let graphs = smiles_list
            .iter()
            .enumerate()
            .map(|(i, s)| smiles::parse_smiles(s, i, &mut vocab).unwrap())
            .collect();
        (graphs, vocab)
    }

    #[test]
    fn zero_scores_give_ln_half_terms() {
        let t = ns_loss_and_grads(&[0.0; 3], &[1.0, 2.0, 3.0], &[&[4.0, 5.0, 6.0]], 0.5).unwrap();
        assert!((t.objective - 2.0 * libm::log(0.5)).abs() < 1e-12);
        assert!((t.objective + 1.386_294).abs() < 1e-6);
    }

    #[test]
    fn vanishing_gamma_limit() {
        let u = [0.3, -1.2, 2.0];
        let h = [1.0, 0.5, -0.5];
        let n1 = [0.1, 0.2, 0.3];
        let n2 = [-1.0, 0.0, 4.0];
        let t = ns_loss_and_grads(&u, &h, &[&n1, &n2], 1e-12).unwrap();
        assert!((t.objective - 3.0 * libm::log(0.5)).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        assert!(matches!(
            ns_loss_and_grads(&[0.0; 3], &[0.0; 2], &[], 0.5),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn homogeneous_corpus_yields_no_negative() {
        let (g, _) = corpus(&["C"]);
        let wl = corpus_wl_codes(&g, 1).unwrap();
        let mut r = rng::stream(1, 0);
        let a = Anchor { mol: 0, level: 0, atom: 0 };
        assert_eq!(sample_negative(a, &[0], &g, &wl, 50, &mut r), None);
    }

    #[test]
    fn aromatic_carbon_accepted_for_aliphatic_anchor() {
        let (g, _) = corpus(&["CCO", "c1ccccc1"]);
        let wl = corpus_wl_codes(&g, 1).unwrap();
        // level-1 codes depend on the atom type only: C, O in ethanol, c in benzene
        assert_ne!(wl[0].get(0, 0), wl[1].get(0, 0));
        let mut r = rng::stream(3, 0);
        let a = Anchor { mol: 0, level: 0, atom: 0 };
        let mut saw_benzene = false;
        for _ in 0..200 {
            let (m, v) = sample_negative(a, &[0, 1], &g, &wl, 50, &mut r).unwrap();
            assert_ne!(wl[m].get(0, v), wl[0].get(0, 0));
            saw_benzene |= m == 1;
        }
        assert!(saw_benzene);
    }

    #[test]
    fn sampler_is_deterministic() {
        let (g, _) = corpus(&["CCO", "c1ccccc1", "CC(=O)O"]);
        let wl = corpus_wl_codes(&g, 2).unwrap();
        let draw = || {
            let mut r = rng::stream(11, 2);
            plan_negatives(&[0, 2], &[0, 1, 2], &g, &wl, 2, &NegSamplingConfig::default(), 1.0, &mut r)
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (g, vocab) = corpus(&["CCO", "c1ccccc1"]);
        let cfg = TrainConfig {
            epochs: 0,
            d: 8,
            levels: 2,
            ..TrainConfig::default()
        };
        let m = train_unsupervised(&g, vocab.len(), &NegSamplingConfig::default(), &cfg).unwrap();
        assert!(m.history.is_empty());
        assert_eq!(m.params, EmbedParams::init(cfg.seed, 8, vocab.len()).unwrap());
        assert_eq!(m.vectors, MoleculeVectorTable::init(cfg.seed, 8, vec![0, 1]));
    }

    #[test]
    fn toy_corpus_objective_improves() {
        let (g, vocab) = corpus(&["c1ccccc1", "CCO"]);
        let neg = NegSamplingConfig::default();
        let cfg = TrainConfig {
            epochs: 20,
            d: 8,
            levels: 2,
            optimizer: OptimizerConfig::adam(0.01),
            ..TrainConfig::default()
        };
        let init_p = EmbedParams::init(cfg.seed, cfg.d, vocab.len()).unwrap();
        let init_u = MoleculeVectorTable::init(cfg.seed, cfg.d, vec![0, 1]);
        let before = evaluate_objective(&g, &init_p, &init_u, &neg, 2, 99).unwrap();
        let m = train_unsupervised(&g, vocab.len(), &neg, &cfg).unwrap();
        let after = evaluate_objective(&g, &m.params, &m.vectors, &neg, 2, 99).unwrap();
        assert!(after > before, "{after} <= {before}");
        assert_eq!(m.history.len(), 20);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let (g, vocab) = corpus(&["c1ccccc1", "CCO", "CC(=O)O", "CN"]);
        let cfg = TrainConfig {
            epochs: 3,
            d: 6,
            levels: 3,
            batch_size: 2,
            anchor_fraction: 0.7,
            negative_pool: Some(3),
            ..TrainConfig::default()
        };
        let a = train_unsupervised(&g, vocab.len(), &NegSamplingConfig::default(), &cfg).unwrap();
        let b = train_unsupervised(&g, vocab.len(), &NegSamplingConfig::default(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_configs() {
        let (g, vocab) = corpus(&["CC"]);
        let bad_neg = NegSamplingConfig { k: 0, ..Default::default() };
        assert!(train_unsupervised(&g, vocab.len(), &bad_neg, &TrainConfig::default()).is_err());
        let bad = TrainConfig { anchor_fraction: 0.0, ..Default::default() };
        assert!(train_unsupervised(&g, vocab.len(), &NegSamplingConfig::default(), &bad).is_err());
        let g2 = vec![MoleculeGraph::new(0, vec![5], vec![]).unwrap()];
        assert!(matches!(
            train_unsupervised(&g2, 1, &NegSamplingConfig::default(), &TrainConfig::default()),
            Err(Error::Vocab { .. })
        ));
    }
}
