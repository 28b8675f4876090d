//! Hierarchical substructure embeddings for molecular graphs.
//!
//! Atom features are refined level by level with bond-typed message passing,
//! and the resulting per-atom, per-level vectors are trained against
//! per-molecule vectors with a negative-sampling objective whose negatives are
//! rejected whenever they are structurally identical (by Weisfeiler-Lehman code)
//! to the anchor substructure. The same features feed a softmax-pooled
//! fingerprint readout for supervised and semi-supervised property prediction.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset loaders
//! and the command-line front end live in the `molvec` crate.

#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod math;
pub mod molgraph;
pub mod nmp;
pub mod optim;
pub mod pvns;
pub mod readout;
pub mod rng;
pub mod semisup;
pub mod smiles;

pub use error::{Error, Result};
pub use molgraph::{AtomVocab, BondType, MoleculeGraph, WlCodes};
