use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("program has no variables")]
    EmptyProgram,
    #[error("{what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("matrix block of size zero")]
    EmptyBlock,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dump line {line}: {message}")]
    Dump { line: usize, message: String },
}
