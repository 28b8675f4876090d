use std::path::PathBuf;

use molvec_core::smiles::SmilesError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("archive version {found} is not supported (expected {supported})")]
    Version { found: String, supported: u32 },
    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
    #[error("{0}")]
    Smiles(#[from] SmilesError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] molvec_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// 1 for usage and configuration mistakes, 3 for numerical failures,
    /// 2 for everything that is wrong with the data.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(molvec_core::Error::Config(_)) => 1,
            CliError::Core(molvec_core::Error::Numerics(_)) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
