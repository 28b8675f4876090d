//! Semi-supervised training: supervised loss on labeled molecules plus a
//! lambda-weighted negative-sampling regularizer over labeled and unlabeled
//! molecules alike.
//!
//! `objective = sum_labeled loss(y(h_m), o_m) + lambda * sum_corpus Reg(m)`
//! where `Reg(m)` is the negated per-anchor negative-sampling objective summed
//! over the anchors of `m`. Predictions only ever use the fingerprint readout;
//! molecule vectors exist to shape the features during training.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::molgraph::MoleculeGraph;
use crate::nmp::{EmbedGrads, EmbedParams, ForwardCache};
use crate::optim::{Optimizer, Slot};
use crate::pvns::{self, AnchorPlan, MoleculeVectorTable, NegSamplingConfig, TrainConfig, VectorUpdate};
use crate::readout::{self, ReadoutGrads, ReadoutParams};
use crate::rng;

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiConfig {
    pub lambda: f64,
    pub train: TrainConfig,
    pub neg: NegSamplingConfig,
    pub d_fp: usize,
    pub n_hidden: usize,
}

impl Default for SemiConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            train: TrainConfig::default(),
            neg: NegSamplingConfig::default(),
            d_fp: readout::DEFAULT_FP_DIM,
            n_hidden: readout::DEFAULT_HIDDEN,
        }
    }
}

impl SemiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(alloc::format!("lambda {} must be >= 0", self.lambda)));
        }
        self.train.validate()?;
        self.neg.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiGrads {
    pub embed: EmbedGrads,
    pub readout: ReadoutGrads,
    pub u: MoleculeVectorTable,
}

impl SemiGrads {
    pub fn zeros(embed: &EmbedParams, readout: &ReadoutParams, vectors: &MoleculeVectorTable) -> Self {
        Self {
            embed: embed.zeros_like(),
            readout: readout.zeros_like(),
            u: vectors.zeros_like(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.embed.fill_zero();
        self.readout.fill_zero();
        self.u.u.fill(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiValue {
    pub total: f64,
    pub supervised: f64,
    /// `sum Reg(m)`, before the lambda weight.
    pub regularizer: f64,
    pub supervised_count: usize,
    pub anchors: usize,
}

/// Inputs shared by every evaluation of the objective on one batch.
#[derive(Debug, Clone, Copy)]
pub struct SemiBatch<'a> {
    /// Corpus positions that enter the supervised term; labels are looked up
    /// by graph id.
    pub labeled: &'a [usize],
    pub labels: &'a BTreeMap<usize, f64>,
    /// Regularizer anchors with their negatives.
    pub plan: &'a [AnchorPlan],
    pub corpus: &'a [MoleculeGraph],
    pub levels: usize,
    pub gamma: f64,
    pub lambda: f64,
}

enum Vectors<'a, 'g> {
    Fixed(&'a MoleculeVectorTable, Option<&'g mut MoleculeVectorTable>),
    Online(&'a mut MoleculeVectorTable, f64),
}

/// Evaluates the objective for one batch and, if `grads` is given,
/// accumulates its gradient. The regularizer is skipped entirely when
/// `lambda == 0`.
#[allow(clippy::too_many_arguments)]
pub fn semi_objective(
    labeled: &[usize],
    labels: &BTreeMap<usize, f64>,
    plan: &[AnchorPlan],
    corpus: &[MoleculeGraph],
    embed: &EmbedParams,
    readout_params: &ReadoutParams,
    vectors: &MoleculeVectorTable,
    levels: usize,
    gamma: f64,
    lambda: f64,
    grads: Option<&mut SemiGrads>,
) -> Result<SemiValue> {
    let batch = SemiBatch {
        labeled,
        labels,
        plan,
        corpus,
        levels,
        gamma,
        lambda,
    };
    match grads {
        Some(g) => {
            let SemiGrads { embed: eg, readout: rg, u } = g;
            evaluate(&batch, embed, readout_params, Vectors::Fixed(vectors, Some(u)), Some((eg, rg)))
        }
        None => evaluate(&batch, embed, readout_params, Vectors::Fixed(vectors, None), None),
    }
}

/// Gradient pass where molecule vectors take an immediate step of
/// `lr * lambda * d objective / d u` after every regularizer anchor instead
/// of accumulating a gradient.
pub fn semi_objective_online(
    batch: &SemiBatch<'_>,
    embed: &EmbedParams,
    readout_params: &ReadoutParams,
    vectors: &mut MoleculeVectorTable,
    lr: f64,
    grads: (&mut EmbedGrads, &mut ReadoutGrads),
) -> Result<SemiValue> {
    evaluate(batch, embed, readout_params, Vectors::Online(vectors, lr), Some(grads))
}

fn evaluate(
    batch: &SemiBatch<'_>,
    embed: &EmbedParams,
    readout_params: &ReadoutParams,
    vectors: Vectors<'_, '_>,
    mut grads: Option<(&mut EmbedGrads, &mut ReadoutGrads)>,
) -> Result<SemiValue> {
    let mut cache = ForwardCache::new(batch.corpus, embed, batch.levels);
    let mut supervised = 0.0;
    for &mol in batch.labeled {
        let id = batch.corpus[mol].id();
        let label = batch
            .labels
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Data(alloc::format!("labeled molecule {id} has no label")))?;
        cache.ensure(mol)?;
        let trace = readout::forward(cache.features(mol), readout_params)?;
        supervised += readout::supervised_loss(trace.output, label, readout_params.task)?;
        if let Some((_, rg)) = grads.as_mut() {
            let gl = readout::loss_grad_logit(&trace, label, readout_params.task);
            let feats = cache.features(mol).clone();
            readout::backward(&feats, readout_params, &trace, gl, rg, cache.upstream_mut(mol))?;
        }
    }
    let lambda = batch.lambda;
    let (regularizer, anchors) = if lambda > 0.0 && !batch.plan.is_empty() {
        let obj = match vectors {
            Vectors::Fixed(v, u_grads) => {
                pvns::ns_objective(batch.plan, &mut cache, v, batch.gamma, -lambda, u_grads)?
            }
            Vectors::Online(v, lr) => pvns::ns_objective_online(batch.plan, &mut cache, v, batch.gamma, -lambda, lr * lambda)?,
        };
        (-obj, batch.plan.len())
    } else {
        (0.0, 0)
    };
    if let Some((eg, _)) = grads {
        cache.backward_into(eg)?;
    }
    let total = if lambda > 0.0 {
        supervised + lambda * regularizer
    } else {
        supervised
    };
    Ok(SemiValue {
        total,
        supervised,
        regularizer,
        supervised_count: batch.labeled.len(),
        anchors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiEpochStats {
    pub epoch: usize,
    /// Mean supervised loss per labeled molecule.
    pub sup_loss: f64,
    /// Mean regularizer per anchor.
    pub reg_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiModel {
    pub embed: EmbedParams,
    pub readout: ReadoutParams,
    pub vectors: MoleculeVectorTable,
    pub history: Vec<SemiEpochStats>,
}

fn proportional_slice(items: &[usize], batch: usize, batches: usize) -> &[usize] {
    let n = items.len();
    &items[batch * n / batches..(batch + 1) * n / batches]
}

/// Trains on `labeled` (all graphs labeled) and `unlabeled` (labels ignored).
/// Each minibatch mixes the two sets in proportion to their sizes.
pub fn train_semi(labeled: &Dataset, unlabeled: &Dataset, cfg: &SemiConfig) -> Result<SemiModel> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::Data("no labeled molecules".into()));
    }
    if !labeled.is_fully_labeled() {
        return Err(Error::Data("every molecule of the labeled set needs a label".into()));
    }
    if labeled.vocab != unlabeled.vocab && !unlabeled.is_empty() {
        return Err(Error::Data("labeled and unlabeled sets use different vocabularies".into()));
    }
    let labeled_ids: alloc::collections::BTreeSet<usize> = labeled.graphs.iter().map(MoleculeGraph::id).collect();
    if unlabeled.graphs.iter().any(|g| labeled_ids.contains(&g.id())) {
        return Err(Error::Data("labeled and unlabeled sets overlap".into()));
    }
    let tc = &cfg.train;
    let corpus: Vec<MoleculeGraph> = labeled.graphs.iter().chain(&unlabeled.graphs).cloned().collect();
    let vocab_size = labeled.vocab.len();
    pvns::check_corpus(&corpus, vocab_size)?;
    let n_lab = labeled.len();
    let mut embed = EmbedParams::init(tc.seed, tc.d, vocab_size)?;
    let mut ro = ReadoutParams::init(tc.seed, tc.d, cfg.d_fp, cfg.n_hidden, labeled.task)?;
    let mut vectors = MoleculeVectorTable::init(tc.seed, tc.d, corpus.iter().map(MoleculeGraph::id).collect());
    let wl = if cfg.lambda > 0.0 {
        pvns::corpus_wl_codes(&corpus, tc.levels)?
    } else {
        Vec::new()
    };
    let mut grads = SemiGrads::zeros(&embed, &ro, &vectors);
    let mut opt = Optimizer::new(tc.optimizer);
    let mut history = Vec::with_capacity(tc.epochs);
    for epoch in 0..tc.epochs {
        let mut r = rng::stream(tc.seed, epoch as u64);
        let mut lab: Vec<usize> = (0..n_lab).collect();
        let mut unl: Vec<usize> = (n_lab..corpus.len()).collect();
        lab.shuffle(&mut r);
        unl.shuffle(&mut r);
        let batches = corpus.len().div_ceil(tc.batch_size);
        let (mut sup_sum, mut sup_n, mut reg_sum, mut reg_n) = (0.0, 0usize, 0.0, 0usize);
        for b in 0..batches {
            let lab_part = proportional_slice(&lab, b, batches);
            let unl_part = proportional_slice(&unl, b, batches);
            let batch: Vec<usize> = lab_part.iter().chain(unl_part).copied().collect();
            let plan = if cfg.lambda > 0.0 {
                let candidates: Vec<usize> = match tc.negative_pool {
                    None => (0..corpus.len()).collect(),
                    Some(p) => (0..p).map(|_| rand::Rng::random_range(&mut r, 0..corpus.len())).collect(),
                };
                pvns::plan_negatives(&batch, &candidates, &corpus, &wl, tc.levels, &cfg.neg, tc.anchor_fraction, &mut r)
            } else {
                Vec::new()
            };
            if lab_part.is_empty() && plan.is_empty() {
                continue;
            }
            grads.fill_zero();
            let sb = SemiBatch {
                labeled: lab_part,
                labels: &labeled.labels,
                plan: &plan,
                corpus: &corpus,
                levels: tc.levels,
                gamma: cfg.neg.gamma,
                lambda: cfg.lambda,
            };
            let value = match tc.vector_update {
                VectorUpdate::Batch => {
                    let SemiGrads { embed: eg, readout: rg, u } = &mut grads;
                    evaluate(&sb, &embed, &ro, Vectors::Fixed(&vectors, Some(u)), Some((eg, rg)))?
                }
                VectorUpdate::PerAnchor { lr } => {
                    semi_objective_online(&sb, &embed, &ro, &mut vectors, lr, (&mut grads.embed, &mut grads.readout))?
                }
            };
            if !value.total.is_finite() {
                return Err(Error::Numerics(alloc::format!("objective at epoch {epoch}, step {b}")));
            }
            sup_sum += value.supervised;
            sup_n += value.supervised_count;
            reg_sum += value.regularizer;
            reg_n += value.anchors;
            apply_step(&mut opt, &mut embed, &mut ro, &mut vectors, &grads, tc.vector_update).map_err(|e| pvns::with_context(e, epoch, b))?;
        }
        history.push(SemiEpochStats {
            epoch,
            sup_loss: if sup_n > 0 { sup_sum / sup_n as f64 } else { 0.0 },
            reg_loss: if reg_n > 0 { reg_sum / reg_n as f64 } else { 0.0 },
        });
    }
    Ok(SemiModel {
        embed,
        readout: ro,
        vectors,
        history,
    })
}

fn apply_step(
    opt: &mut Optimizer,
    embed: &mut EmbedParams,
    ro: &mut ReadoutParams,
    vectors: &mut MoleculeVectorTable,
    grads: &SemiGrads,
    update: VectorUpdate,
) -> Result<()> {
    let eg = grads.embed.groups();
    let rg = grads.readout.groups();
    let mut slots: Vec<Slot<'_>> = embed
        .groups_mut()
        .into_iter()
        .zip(eg.iter())
        .map(|((n, p), (_, g))| Slot::new(n, p, g))
        .collect();
    slots.extend(
        ro.groups_mut()
            .into_iter()
            .zip(rg.iter())
            .map(|((n, p), (_, g))| Slot::new(n, p, g)),
    );
    if update == VectorUpdate::Batch {
        slots.push(Slot::new("u", &mut vectors.u, &grads.u.u));
    }
    opt.step(&mut slots)
}

/// Readout predictions for each graph, in order.
pub fn predict_graphs(
    graphs: &[MoleculeGraph],
    embed: &EmbedParams,
    readout_params: &ReadoutParams,
    levels: usize,
) -> Result<Vec<f64>> {
    graphs
        .iter()
        .map(|g| {
            let f = crate::nmp::forward_levels(g, embed, levels)?;
            Ok(readout::forward(&f, readout_params)?.output)
        })
        .collect()
}

/// Convenience for regression labels aligned with `dataset.graphs`.
pub fn regression_targets(dataset: &Dataset) -> Result<Vec<f64>> {
    if dataset.task != Task::Regression {
        return Err(Error::Data("dataset is not a regression task".into()));
    }
    dataset
        .aligned_labels()
        .ok_or_else(|| Error::Data("dataset has unlabeled graphs".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::AtomVocab;
    use crate::pvns::plan_negatives;
    use crate::smiles;

    fn dataset(smiles_list: &[&str], labels: &[f64]) -> Dataset {
        let mut vocab = AtomVocab::new();
        let graphs: Vec<MoleculeGraph> = smiles_list
            .iter()
            .enumerate()
            .map(|(i, s)| smiles::parse_smiles(s, i, &mut vocab).unwrap())
            .collect();
        let labels = labels.iter().enumerate().map(|(i, &y)| (i, y)).collect();
        Dataset::new("toy", Task::Regression, vocab, graphs, labels).unwrap()
    }

    struct Setup {
        corpus: Vec<MoleculeGraph>,
        labels: BTreeMap<usize, f64>,
        embed: EmbedParams,
        ro: ReadoutParams,
        vectors: MoleculeVectorTable,
        plan: Vec<AnchorPlan>,
    }

    fn setup() -> Setup {
        let ds = dataset(&["CCO", "c1ccccc1", "CC(=O)O", "C#N"], &[1.0, -2.0, 0.5, 3.0]);
        let corpus = ds.graphs.clone();
        let embed = EmbedParams::init(2, 4, ds.vocab.len()).unwrap();
        let ro = ReadoutParams::init(2, 4, 6, 5, Task::Regression).unwrap();
        let vectors = MoleculeVectorTable::init(2, 4, (0..4).collect());
        let wl = pvns::corpus_wl_codes(&corpus, 2).unwrap();
        let mut r = rng::stream(5, 0);
        let plan = plan_negatives(&[0, 1, 2, 3], &[0, 1, 2, 3], &corpus, &wl, 2, &NegSamplingConfig::default(), 1.0, &mut r);
        Setup {
            corpus,
            labels: ds.labels,
            embed,
            ro,
            vectors,
            plan,
        }
    }

    #[test]
    fn lambda_zero_is_exactly_supervised() {
        let s = setup();
        let mut g = SemiGrads::zeros(&s.embed, &s.ro, &s.vectors);
        let v = semi_objective(&[0, 1], &s.labels, &s.plan, &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.0, Some(&mut g))
            .unwrap();
        let sup_only = semi_objective(&[0, 1], &s.labels, &[], &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.0, None).unwrap();
        assert_eq!(v.total.to_bits(), v.supervised.to_bits());
        assert_eq!(v.total.to_bits(), sup_only.total.to_bits());
        assert!(g.u.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn no_labeled_molecules_leaves_regularizer() {
        let s = setup();
        let v = semi_objective(&[], &s.labels, &s.plan, &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.5, None).unwrap();
        assert_eq!(v.supervised, 0.0);
        assert!(v.regularizer > 0.0);
        assert_eq!(v.total, 0.5 * v.regularizer);
    }

    #[test]
    fn missing_label_is_data_error() {
        let s = setup();
        let labels = BTreeMap::new();
        assert!(matches!(
            semi_objective(&[0], &labels, &[], &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.5, None),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn unlabeled_molecules_do_not_enter_supervised_term() {
        let s = setup();
        let a = semi_objective(&[0], &s.labels, &s.plan, &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.5, None).unwrap();
        let b = semi_objective(&[0], &s.labels, &s.plan[..3], &s.corpus, &s.embed, &s.ro, &s.vectors, 2, 0.5, 0.5, None).unwrap();
        assert_eq!(a.supervised, b.supervised);
        assert_eq!(a.supervised_count, 1);
    }

    #[test]
    fn supervised_only_training_reduces_to_nfp() {
        let lab = dataset(&["CCO", "c1ccccc1", "CC(=O)O", "C#N"], &[1.0, -2.0, 0.5, 3.0]);
        let unl = Dataset::new("u", Task::Regression, lab.vocab.clone(), Vec::new(), BTreeMap::new()).unwrap();
        let cfg = SemiConfig {
            lambda: 0.0,
            train: TrainConfig {
                epochs: 60,
                d: 6,
                levels: 2,
                optimizer: crate::optim::OptimizerConfig::adam(0.01),
                ..TrainConfig::default()
            },
            d_fp: 8,
            n_hidden: 8,
            ..SemiConfig::default()
        };
        let m = train_semi(&lab, &unl, &cfg).unwrap();
        assert!(m.history.iter().all(|h| h.reg_loss == 0.0));
        assert!(m.history.last().unwrap().sup_loss < m.history[0].sup_loss);
        let m2 = train_semi(&lab, &unl, &cfg).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let lab = dataset(&["CCO"], &[1.0]);
        let unl = lab.clone().without_labels();
        assert!(train_semi(&lab, &unl, &SemiConfig::default()).is_err());
    }
}
