//! In-memory datasets and deterministic partitioning.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::molgraph::{AtomVocab, MoleculeGraph};
use crate::rng;

/// Stream index used by [`split_dataset`].
pub const SPLIT_STREAM: u64 = 0x5_0117;
/// Stream index used by [`label_fraction_split`].
pub const LABEL_STREAM: u64 = 0x1_ABE1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    BinaryClassification,
    Regression,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::BinaryClassification => "binary-classification",
            Task::Regression => "regression",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "binary-classification" => Some(Task::BinaryClassification),
            "regression" => Some(Task::Regression),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub task: Task,
    pub vocab: AtomVocab,
    pub graphs: Vec<MoleculeGraph>,
    /// Labels keyed by graph id.
    pub labels: BTreeMap<usize, f64>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        task: Task,
        vocab: AtomVocab,
        graphs: Vec<MoleculeGraph>,
        labels: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        let mut ids = BTreeMap::new();
        for (i, g) in graphs.iter().enumerate() {
            if ids.insert(g.id(), i).is_some() {
                return Err(Error::Data(alloc::format!("duplicate graph id {}", g.id())));
            }
            if let Some(&a) = g.atoms().iter().find(|&&a| a >= vocab.len()) {
                return Err(Error::Vocab { id: a, size: vocab.len() });
            }
        }
        for (&id, &y) in &labels {
            if !ids.contains_key(&id) {
                return Err(Error::Data(alloc::format!("label for unknown graph id {id}")));
            }
            if task == Task::BinaryClassification && y != 0.0 && y != 1.0 {
                return Err(Error::Data(alloc::format!("graph {id}: binary label {y} not in {{0,1}}")));
            }
            if !y.is_finite() {
                return Err(Error::Data(alloc::format!("graph {id}: label is not finite")));
            }
        }
        Ok(Self {
            name: name.into(),
            task,
            vocab,
            graphs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn label(&self, graph_id: usize) -> Option<f64> {
        self.labels.get(&graph_id).copied()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.graphs.iter().all(|g| self.labels.contains_key(&g.id()))
    }

    /// Labels aligned with `graphs`; `None` if any graph is unlabeled.
    pub fn aligned_labels(&self) -> Option<Vec<f64>> {
        self.graphs.iter().map(|g| self.label(g.id())).collect()
    }

    /// Keeps the graphs at `indices` (positions into `graphs`), in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let graphs: Vec<MoleculeGraph> = indices.iter().map(|&i| self.graphs[i].clone()).collect();
        let labels = graphs
            .iter()
            .filter_map(|g| self.label(g.id()).map(|y| (g.id(), y)))
            .collect();
        Self {
            name: self.name.clone(),
            task: self.task,
            vocab: self.vocab.clone(),
            graphs,
            labels,
        }
    }

    pub fn without_labels(mut self) -> Self {
        self.labels.clear();
        self
    }
}

/// `floor(fraction * n)`, tolerant of binary rounding just below an integer.
pub fn floor_count(fraction: f64, n: usize) -> usize {
    libm::floor(fraction * n as f64 + 1e-9) as usize
}

fn shuffled_indices(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, stream));
    idx
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(alloc::format!("fraction {fraction} must lie in (0, 1)")));
    }
    Ok(())
}

/// Shuffles with the seeded stream and moves the first `floor(fraction * n)`
/// graphs to the test side. Both sides keep the dataset's original order.
pub fn split_dataset(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.len(), test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Index-level form of [`split_dataset`]: `(train, test)` positions, each
/// ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_fraction(test_fraction)?;
    let n_test = floor_count(test_fraction, n);
    if n_test == 0 || n_test == n {
        return Err(Error::Config(alloc::format!(
            "test fraction {test_fraction} on {n} items leaves one side empty"
        )));
    }
    let idx = shuffled_indices(n, seed, SPLIT_STREAM);
    let mut test: Vec<usize> = idx[..n_test].to_vec();
    let mut train: Vec<usize> = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Keeps labels on `floor(fraction * n)` randomly chosen graphs and strips
/// them from the rest.
pub fn label_fraction_split(dataset: &Dataset, labeled_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    check_fraction(labeled_fraction)?;
    if !dataset.is_fully_labeled() {
        return Err(Error::Data("label_fraction_split needs a fully labeled dataset".into()));
    }
    let n = dataset.len();
    let n_lab = floor_count(labeled_fraction, n);
    if n_lab == 0 {
        return Err(Error::Config(alloc::format!(
            "labeled fraction {labeled_fraction} on {n} graphs leaves no labeled graph"
        )));
    }
    let idx = shuffled_indices(n, seed, LABEL_STREAM);
    let mut labeled: Vec<usize> = idx[..n_lab].to_vec();
    let mut unlabeled: Vec<usize> = idx[n_lab..].to_vec();
    labeled.sort_unstable();
    unlabeled.sort_unstable();
    Ok((dataset.subset(&labeled), dataset.subset(&unlabeled).without_labels()))
}
