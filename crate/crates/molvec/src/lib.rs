//! File formats, dataset loaders and the command-line workflows built on
//! `molvec-core`.

pub mod archive;
pub mod config;
pub mod error;
pub mod ingest;
pub mod workflows;

pub use error::{CliError, Result};
