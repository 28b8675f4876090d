//! Level-wise neural message passing.
//!
//! Level 0 is the atom embedding. Each further level applies
//! `m_v = sum_{w in N(v)} H_{e(v,w)} h_w` followed by
//! `h'_v = sigmoid(h_v + m_v)`, so `levels` total levels means `levels - 1`
//! message-passing rounds. Neighbors are summed in ascending atom index.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math::{self, outer_acc};
use crate::molgraph::{BondType, MoleculeGraph};
use crate::rng;

pub const DEFAULT_LEVELS: usize = 3;
pub const DEFAULT_DIM: usize = 100;

/// Atom-embedding table plus one `d x d` matrix per bond type.
///
/// The same layout doubles as the gradient accumulator for these parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbedParams {
    pub d: usize,
    /// Row-major `vocab x d`.
    pub atom_embed: Vec<f64>,
    /// Row-major `d x d`, indexed by [`BondType::code`].
    pub bond_mats: [Vec<f64>; 4],
}

pub type EmbedGrads = EmbedParams;

fn uniform(r: &mut rng::Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

impl EmbedParams {
    /// Atom embeddings ~ U(-0.1, 0.1); each `H_e = I + U(-0.01, 0.01)`.
    pub fn init(seed: u64, d: usize, vocab_size: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        let mut r = rng::stream(seed, rng::INIT_STREAM);
        let atom_embed = (0..vocab_size * d).map(|_| uniform(&mut r, -0.1, 0.1)).collect();
        let bond_mats = core::array::from_fn(|_| {
            let mut m: Vec<f64> = (0..d * d).map(|_| uniform(&mut r, -0.01, 0.01)).collect();
            for i in 0..d {
                m[i * d + i] += 1.0;
            }
            m
        });
        Ok(Self {
            d,
            atom_embed,
            bond_mats,
        })
    }

    pub fn zeros(d: usize, vocab_size: usize) -> Self {
        Self {
            d,
            atom_embed: vec![0.0; vocab_size * d],
            bond_mats: core::array::from_fn(|_| vec![0.0; d * d]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d, self.vocab_size())
    }

    pub fn vocab_size(&self) -> usize {
        self.atom_embed.len() / self.d
    }

    pub fn embedding(&self, atom: usize) -> &[f64] {
        &self.atom_embed[atom * self.d..(atom + 1) * self.d]
    }

    pub fn bond_mat(&self, kind: BondType) -> &[f64] {
        &self.bond_mats[kind.code() as usize]
    }

    /// Named flat views of every parameter group, in a fixed order.
    pub fn groups(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("atom_embed", &self.atom_embed),
            ("H_single", &self.bond_mats[0]),
            ("H_double", &self.bond_mats[1]),
            ("H_triple", &self.bond_mats[2]),
            ("H_aromatic", &self.bond_mats[3]),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut [f64]); 5] {
        let [s, d, t, a] = &mut self.bond_mats;
        [
            ("atom_embed", &mut self.atom_embed),
            ("H_single", s),
            ("H_double", d),
            ("H_triple", t),
            ("H_aromatic", a),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| math::all_finite(g))
    }

    pub fn fill_zero(&mut self) {
        for (_, g) in self.groups_mut() {
            g.fill(0.0);
        }
    }
}

/// `h` for every level and atom, stored level-major as `levels x atoms x d`.
///
/// The same layout carries upstream gradients for [`backward_levels`].
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFeatures {
    pub levels: usize,
    pub n_atoms: usize,
    pub d: usize,
    pub h: Vec<f64>,
}

impl LevelFeatures {
    pub fn zeros(levels: usize, n_atoms: usize, d: usize) -> Self {
        Self {
            levels,
            n_atoms,
            d,
            h: vec![0.0; levels * n_atoms * d],
        }
    }

    #[inline]
    fn offset(&self, level: usize, v: usize) -> usize {
        (level * self.n_atoms + v) * self.d
    }

    #[inline]
    pub fn get(&self, level: usize, v: usize) -> &[f64] {
        let o = self.offset(level, v);
        &self.h[o..o + self.d]
    }

    #[inline]
    pub fn get_mut(&mut self, level: usize, v: usize) -> &mut [f64] {
        let o = self.offset(level, v);
        &mut self.h[o..o + self.d]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.levels == other.levels && self.n_atoms == other.n_atoms && self.d == other.d
    }
}

pub fn forward_levels(graph: &MoleculeGraph, params: &EmbedParams, levels: usize) -> Result<LevelFeatures> {
    if levels < 1 {
        return Err(Error::Config("need at least one level".into()));
    }
    let d = params.d;
    let n = graph.num_atoms();
    let vocab = params.vocab_size();
    let mut out = LevelFeatures::zeros(levels, n, d);
    for (v, &a) in graph.atoms().iter().enumerate() {
        if a >= vocab {
            return Err(Error::Vocab { id: a, size: vocab });
        }
        out.get_mut(0, v).copy_from_slice(params.embedding(a));
    }
    let mut pre = vec![0.0; d];
    for l in 1..levels {
        for v in 0..n {
            pre.copy_from_slice(out.get(l - 1, v));
            for &(w, t) in graph.neighbors(v) {
                math::matvec_acc(params.bond_mat(t), d, out.get(l - 1, w), &mut pre);
            }
            for (dst, &x) in out.get_mut(l, v).iter_mut().zip(&pre) {
                *dst = math::sigmoid(x);
            }
        }
    }
    Ok(out)
}

/// Reverse pass: accumulates `dLoss/dparams` into `grads` given
/// `upstream = dLoss/dh` for every level and atom.
pub fn backward_levels(
    graph: &MoleculeGraph,
    params: &EmbedParams,
    features: &LevelFeatures,
    upstream: &LevelFeatures,
    grads: &mut EmbedGrads,
) -> Result<()> {
    if !features.same_shape(upstream) {
        return Err(Error::Shape(alloc::format!(
            "upstream {}x{}x{} vs features {}x{}x{}",
            upstream.levels,
            upstream.n_atoms,
            upstream.d,
            features.levels,
            features.n_atoms,
            features.d
        )));
    }
    if features.n_atoms != graph.num_atoms() || features.d != params.d {
        return Err(Error::Shape("features do not belong to this graph/params".into()));
    }
    if grads.d != params.d || grads.atom_embed.len() != params.atom_embed.len() {
        return Err(Error::Shape("gradient buffer does not match parameters".into()));
    }
    let d = params.d;
    let mut g = upstream.clone();
    let mut delta = vec![0.0; d];
    for l in (1..features.levels).rev() {
        for v in 0..graph.num_atoms() {
            for ((dl, &gv), &h) in delta.iter_mut().zip(g.get(l, v)).zip(features.get(l, v)) {
                *dl = gv * h * (1.0 - h);
            }
            math::axpy(1.0, &delta, g.get_mut(l - 1, v));
            for &(w, t) in graph.neighbors(v) {
                outer_acc(&delta, features.get(l - 1, w), &mut grads.bond_mats[t.code() as usize]);
                math::matvec_t_acc(params.bond_mat(t), d, &delta, g.get_mut(l - 1, w));
            }
        }
    }
    for (v, &a) in graph.atoms().iter().enumerate() {
        math::axpy(1.0, g.get(0, v), &mut grads.atom_embed[a * d..(a + 1) * d]);
    }
    Ok(())
}

/// Lazily computed features for the molecules touched by one optimizer step,
/// plus the upstream gradient accumulated for each of them.
///
/// Molecules are keyed by their position in the corpus slice. Backward passes
/// run in ascending key order so the gradient reduction order is fixed.
pub struct ForwardCache<'a> {
    corpus: &'a [MoleculeGraph],
    params: &'a EmbedParams,
    levels: usize,
    features: BTreeMap<usize, LevelFeatures>,
    upstream: BTreeMap<usize, LevelFeatures>,
}

impl<'a> ForwardCache<'a> {
    pub fn new(corpus: &'a [MoleculeGraph], params: &'a EmbedParams, levels: usize) -> Self {
        Self {
            corpus,
            params,
            levels,
            features: BTreeMap::new(),
            upstream: BTreeMap::new(),
        }
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn corpus(&self) -> &'a [MoleculeGraph] {
        self.corpus
    }

    pub fn ensure(&mut self, mol: usize) -> Result<()> {
        if !self.features.contains_key(&mol) {
            let graph = self
                .corpus
                .get(mol)
                .ok_or_else(|| Error::Data(alloc::format!("molecule index {mol} outside corpus")))?;
            let f = forward_levels(graph, self.params, self.levels)?;
            self.features.insert(mol, f);
        }
        Ok(())
    }

    /// Features of a molecule previously passed to [`ForwardCache::ensure`].
    pub fn features(&self, mol: usize) -> &LevelFeatures {
        &self.features[&mol]
    }

    pub fn upstream_mut(&mut self, mol: usize) -> &mut LevelFeatures {
        let f = &self.features[&mol];
        self.upstream
            .entry(mol)
            .or_insert_with(|| LevelFeatures::zeros(f.levels, f.n_atoms, f.d))
    }

    /// Back-propagates all accumulated upstream gradients into `grads`.
    pub fn backward_into(&self, grads: &mut EmbedGrads) -> Result<()> {
        for (&mol, up) in &self.upstream {
            backward_levels(&self.corpus[mol], self.params, &self.features[&mol], up, grads)?;
        }
        Ok(())
    }
}
