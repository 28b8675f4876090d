use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph error: {0}")]
    Graph(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("atom type {id} is outside the vocabulary (size {size})")]
    Vocab { id: usize, size: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    Numerics(String),
    #[error("data error: {0}")]
    Data(String),
}
