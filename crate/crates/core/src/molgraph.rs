//! Molecular graphs, the atom-type vocabulary, and Weisfeiler-Lehman node codes.
//!
//! Graphs are heavy-atom only. Each atom carries a dense atom-type id and each
//! bond one of four [`BondType`]s. Neighbor lists are kept in ascending
//! neighbor index so every traversal has a single deterministic order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum BondType {
    Single = 0,
    Double = 1,
    Triple = 2,
    Aromatic = 3,
}

impl BondType {
    pub const ALL: [BondType; 4] = [
        BondType::Single,
        BondType::Double,
        BondType::Triple,
        BondType::Aromatic,
    ];

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            BondType::Single => "single",
            BondType::Double => "double",
            BondType::Triple => "triple",
            BondType::Aromatic => "aromatic",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }
}

impl fmt::Display for BondType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense mapping between atom-type labels (element symbol, lowercase when
/// aromatic) and integer ids `0..len`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomVocab {
    symbols: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl AtomVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_symbols<I, S>(symbols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for s in symbols {
            let s = s.into();
            if vocab.index.contains_key(&s) {
                return Err(Error::Config(alloc::format!("duplicate atom symbol {s:?}")));
            }
            vocab.get_or_insert(&s);
        }
        Ok(vocab)
    }

    pub fn get_or_insert(&mut self, symbol: &str) -> usize {
        if let Some(&id) = self.index.get(symbol) {
            return id;
        }
        let id = self.symbols.len();
        self.symbols.push(symbol.to_string());
        self.index.insert(symbol.to_string(), id);
        id
    }

    pub fn lookup(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub u: usize,
    pub v: usize,
    pub kind: BondType,
}

impl Bond {
    pub fn new(u: usize, v: usize, kind: BondType) -> Self {
        Self { u, v, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoleculeGraph {
    id: usize,
    atoms: Vec<usize>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, BondType)>>,
}

impl MoleculeGraph {
    /// Validates the bond list and builds the symmetric adjacency.
    pub fn new(id: usize, atoms: Vec<usize>, bonds: Vec<Bond>) -> Result<Self> {
        let n = atoms.len();
        let mut adjacency: Vec<Vec<(usize, BondType)>> = vec![Vec::new(); n];
        for (i, b) in bonds.iter().enumerate() {
            if b.u >= n || b.v >= n {
                return Err(Error::Graph(alloc::format!(
                    "bond {i} ({}, {}) has an endpoint outside 0..{n}",
                    b.u,
                    b.v
                )));
            }
            if b.u == b.v {
                return Err(Error::Graph(alloc::format!("bond {i} is a self-loop on atom {}", b.u)));
            }
            if adjacency[b.u].iter().any(|&(w, _)| w == b.v) {
                return Err(Error::Graph(alloc::format!(
                    "bond {i} duplicates the pair ({}, {})",
                    b.u,
                    b.v
                )));
            }
            adjacency[b.u].push((b.v, b.kind));
            adjacency[b.v].push((b.u, b.kind));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(w, _)| w);
        }
        Ok(Self {
            id,
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, BondType)] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<(usize, BondType)>] {
        &self.adjacency
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_bonds(&self) -> usize {
        self.bonds.len()
    }

    /// Relabels atoms so that old atom `i` becomes atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.atoms.len();
        if perm.len() != n {
            return Err(Error::Shape(alloc::format!(
                "permutation of length {} for {n} atoms",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || core::mem::replace(&mut seen[p], true) {
                return Err(Error::Config("not a permutation".into()));
            }
        }
        let mut atoms = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = self.atoms[old];
        }
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond::new(perm[b.u], perm[b.v], b.kind))
            .collect();
        Self::new(self.id, atoms, bonds)
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Incremental FNV-1a-64.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl Fnv1a64 {
    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn write_u64(&mut self, x: u64) {
        self.write(&x.to_le_bytes());
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

/// Weisfeiler-Lehman codes for every atom at every level.
///
/// Level index 0 hashes the atom type alone:
/// `fnv1a64(le64(atom_type))`. Level `l + 1` hashes
/// `le64(code_l[v]) ++ le64(degree) ++ [u8(bond) ++ le64(code_l[w])]*`
/// with the neighbor pairs sorted ascending by `(bond code, neighbor code)`.
/// Equal codes at level `l` therefore mean equal radius-`l` unfolding trees
/// up to hash collisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlCodes {
    num_atoms: usize,
    codes: Vec<u64>,
}

impl WlCodes {
    pub fn compute(graph: &MoleculeGraph, levels: usize) -> Result<Self> {
        if levels < 1 {
            return Err(Error::Config("WL hashing needs at least one level".into()));
        }
        let n = graph.num_atoms();
        let mut codes = Vec::with_capacity(levels * n);
        for &a in graph.atoms() {
            let mut h = Fnv1a64::default();
            h.write_u64(a as u64);
            codes.push(h.finish());
        }
        let mut pairs: Vec<(u8, u64)> = Vec::new();
        for l in 1..levels {
            let prev = (l - 1) * n;
            for v in 0..n {
                pairs.clear();
                pairs.extend(
                    graph
                        .neighbors(v)
                        .iter()
                        .map(|&(w, t)| (t.code(), codes[prev + w])),
                );
                pairs.sort_unstable();
                let mut h = Fnv1a64::default();
                h.write_u64(codes[prev + v]);
                h.write_u64(pairs.len() as u64);
                for &(t, c) in &pairs {
                    h.write(&[t]);
                    h.write_u64(c);
                }
                codes.push(h.finish());
            }
        }
        Ok(Self { num_atoms: n, codes })
    }

    pub fn levels(&self) -> usize {
        self.codes.len().checked_div(self.num_atoms).unwrap_or(0)
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    /// Code of atom `v` at level index `level` (0-based).
    #[inline]
    pub fn get(&self, level: usize, v: usize) -> u64 {
        self.codes[level * self.num_atoms + v]
    }

    pub fn level(&self, level: usize) -> &[u64] {
        &self.codes[level * self.num_atoms..(level + 1) * self.num_atoms]
    }
}

/// Convenience wrapper over [`WlCodes::compute`].
pub fn wl_node_hash(graph: &MoleculeGraph, levels: usize) -> Result<WlCodes> {
    WlCodes::compute(graph, levels)
}

/// Number of WL levels folded into [`canonical_signature`].
pub const SIGNATURE_LEVELS: usize = 3;

/// Signature of the empty graph: FNV-1a-64 of sixteen zero bytes.
pub const EMPTY_SIGNATURE: u64 = 0x8820_1fb9_60ff_6465;

/// Permutation-invariant 64-bit signature:
/// `fnv1a64(le64(atoms) ++ le64(bonds) ++ sorted final-level codes)`.
pub fn canonical_signature(graph: &MoleculeGraph) -> u64 {
    let mut h = Fnv1a64::default();
    h.write_u64(graph.num_atoms() as u64);
    h.write_u64(graph.num_bonds() as u64);
    if graph.num_atoms() > 0 {
        let wl = WlCodes::compute(graph, SIGNATURE_LEVELS).expect("levels >= 1");
        let mut last = wl.level(SIGNATURE_LEVELS - 1).to_vec();
        last.sort_unstable();
        for c in last {
            h.write_u64(c);
        }
    }
    h.finish()
}
