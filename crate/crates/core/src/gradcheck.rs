//! Central finite-difference check of every analytic gradient in the
//! semi-supervised objective, which exercises the message-passing backward,
//! the readout backward and the negative-sampling gradient together.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::molgraph::{Bond, BondType, MoleculeGraph};
use crate::nmp::EmbedParams;
use crate::pvns::{self, AnchorPlan, MoleculeVectorTable, NegSamplingConfig};
use crate::readout::ReadoutParams;
use crate::rng;
use crate::semisup::{semi_objective, SemiGrads};

const GRAPH_STREAM: u64 = 0x6AAD_C4EC;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub d: usize,
    pub levels: usize,
    pub d_fp: usize,
    pub n_hidden: usize,
    pub graphs: usize,
    pub max_atoms: usize,
    pub vocab: usize,
    pub lambda: f64,
    pub step: f64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            d: 4,
            levels: 3,
            d_fp: 8,
            n_hidden: 6,
            graphs: 4,
            max_atoms: 6,
            vocab: 3,
            lambda: 0.5,
            step: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub task: Task,
    pub group: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub groups: Vec<GroupReport>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= self.tolerance
    }
}

/// Below this magnitude gradients are compared on an absolute scale, since
/// central differences of an O(10) objective carry about 1e-10 of rounding
/// noise.
pub const REL_ERROR_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Connected random graphs with 2..=`max_atoms` atoms. The first graph
/// contains every bond type.
pub fn random_graphs(seed: u64, count: usize, max_atoms: usize, vocab: usize) -> Result<Vec<MoleculeGraph>> {
    if max_atoms < 5 || vocab == 0 {
        return Err(Error::Config("need max_atoms >= 5 and a non-empty vocabulary".into()));
    }
    let mut r = rng::stream(seed, GRAPH_STREAM);
    (0..count)
        .map(|id| {
            let n = if id == 0 { max_atoms } else { r.random_range(2..=max_atoms) };
            let atoms: Vec<usize> = (0..n).map(|_| r.random_range(0..vocab)).collect();
            let mut bonds = Vec::new();
            let mut pairs = alloc::collections::BTreeSet::new();
            // spanning tree first, so every atom has a neighbor
            for v in 1..n {
                let u = r.random_range(0..v);
                let kind = if id == 0 && v <= 4 {
                    BondType::ALL[v - 1]
                } else {
                    BondType::ALL[r.random_range(0..4)]
                };
                pairs.insert((u, v));
                bonds.push(Bond::new(u, v, kind));
            }
            for _ in 0..n / 2 {
                let u = r.random_range(0..n);
                let v = r.random_range(0..n);
                let key = (u.min(v), u.max(v));
                if u != v && pairs.insert(key) {
                    bonds.push(Bond::new(key.0, key.1, BondType::ALL[r.random_range(0..4)]));
                }
            }
            MoleculeGraph::new(id, atoms, bonds)
        })
        .collect()
}

struct Problem {
    corpus: Vec<MoleculeGraph>,
    labeled: Vec<usize>,
    labels: BTreeMap<usize, f64>,
    plan: Vec<AnchorPlan>,
    levels: usize,
    gamma: f64,
    lambda: f64,
}

impl Problem {
    fn value(&self, embed: &EmbedParams, ro: &ReadoutParams, u: &MoleculeVectorTable) -> Result<f64> {
        let v = semi_objective(
            &self.labeled,
            &self.labels,
            &self.plan,
            &self.corpus,
            embed,
            ro,
            u,
            self.levels,
            self.gamma,
            self.lambda,
            None,
        )?;
        Ok(v.total)
    }
}

/// Runs the check for both tasks and reports the worst relative error per
/// parameter group.
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let corpus = random_graphs(cfg.seed, cfg.graphs, cfg.max_atoms, cfg.vocab)?;
    let wl = pvns::corpus_wl_codes(&corpus, cfg.levels)?;
    let neg = NegSamplingConfig {
        k: 3,
        ..NegSamplingConfig::default()
    };
    let mut r = rng::stream(cfg.seed, GRAPH_STREAM + 1);
    let all: Vec<usize> = (0..corpus.len()).collect();
    let plan = pvns::plan_negatives(&all, &all, &corpus, &wl, cfg.levels, &neg, 1.0, &mut r);
    // first half labeled, the rest only enters the regularizer
    let labeled: Vec<usize> = (0..corpus.len().div_ceil(2)).collect();
    let mut groups = Vec::new();
    for task in [Task::BinaryClassification, Task::Regression] {
        let labels: BTreeMap<usize, f64> = labeled
            .iter()
            .map(|&i| {
                let y = match task {
                    Task::BinaryClassification => (i % 2) as f64,
                    Task::Regression => 2.0 * r.random::<f64>() - 1.0,
                };
                (corpus[i].id(), y)
            })
            .collect();
        let problem = Problem {
            corpus: corpus.clone(),
            labeled: labeled.clone(),
            labels,
            plan: plan.clone(),
            levels: cfg.levels,
            gamma: neg.gamma,
            lambda: cfg.lambda,
        };
        let embed = EmbedParams::init(cfg.seed, cfg.d, cfg.vocab)?;
        let ro = ReadoutParams::init(cfg.seed, cfg.d, cfg.d_fp, cfg.n_hidden, task)?;
        let u = MoleculeVectorTable::init(cfg.seed, cfg.d, corpus.iter().map(MoleculeGraph::id).collect());
        groups.extend(check_task(&problem, embed, ro, u, cfg.step, task)?);
    }
    Ok(GradcheckReport {
        tolerance: cfg.tolerance,
        groups,
    })
}

fn check_task(
    problem: &Problem,
    mut embed: EmbedParams,
    mut ro: ReadoutParams,
    mut u: MoleculeVectorTable,
    h: f64,
    task: Task,
) -> Result<Vec<GroupReport>> {
    let mut grads = SemiGrads::zeros(&embed, &ro, &u);
    semi_objective(
        &problem.labeled,
        &problem.labels,
        &problem.plan,
        &problem.corpus,
        &embed,
        &ro,
        &u,
        problem.levels,
        problem.gamma,
        problem.lambda,
        Some(&mut grads),
    )?;
    let mut out = Vec::new();
    let mut report = |group: &str, errs: Vec<f64>| {
        out.push(GroupReport {
            task,
            group: group.into(),
            checked: errs.len(),
            max_rel_error: errs.into_iter().fold(0.0, f64::max),
        });
    };

    // Each closure gets mutable access to one parameter vector at a time.
    let names: Vec<&'static str> = embed.groups().iter().map(|g| g.0).collect();
    for (gi, name) in names.into_iter().enumerate() {
        let analytic = grads.embed.groups()[gi].1.to_vec();
        let mut errs = Vec::with_capacity(analytic.len());
        for (j, &a) in analytic.iter().enumerate() {
            let orig = embed.groups()[gi].1[j];
            embed.groups_mut()[gi].1[j] = orig + h;
            let fp = problem.value(&embed, &ro, &u)?;
            embed.groups_mut()[gi].1[j] = orig - h;
            let fm = problem.value(&embed, &ro, &u)?;
            embed.groups_mut()[gi].1[j] = orig;
            errs.push(relative_error(a, (fp - fm) / (2.0 * h)));
        }
        report(name, errs);
    }
    let names: Vec<&'static str> = ro.groups().iter().map(|g| g.0).collect();
    for (gi, name) in names.into_iter().enumerate() {
        let analytic = grads.readout.groups()[gi].1.to_vec();
        let mut errs = Vec::with_capacity(analytic.len());
        for (j, &a) in analytic.iter().enumerate() {
            let orig = ro.groups()[gi].1[j];
            ro.groups_mut()[gi].1[j] = orig + h;
            let fp = problem.value(&embed, &ro, &u)?;
            ro.groups_mut()[gi].1[j] = orig - h;
            let fm = problem.value(&embed, &ro, &u)?;
            ro.groups_mut()[gi].1[j] = orig;
            errs.push(relative_error(a, (fp - fm) / (2.0 * h)));
        }
        report(name, errs);
    }
    let mut errs = Vec::with_capacity(u.u.len());
    for j in 0..u.u.len() {
        let orig = u.u[j];
        u.u[j] = orig + h;
        let fp = problem.value(&embed, &ro, &u)?;
        u.u[j] = orig - h;
        let fm = problem.value(&embed, &ro, &u)?;
        u.u[j] = orig;
        errs.push(relative_error(grads.u.u[j], (fp - fm) / (2.0 * h)));
    }
    report("u", errs);
    Ok(out)
}
