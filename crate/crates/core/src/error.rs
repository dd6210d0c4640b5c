use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("target degree {target} is below the polynomial degree {degree}")]
    DegreeUnderflow { target: usize, degree: usize },
    #[error("expected {expected} variables, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },
    #[error("duplicate exponent {0:?} in power support")]
    DuplicateIndex(Vec<u32>),
    #[error("exponent {0:?} is not available in the moment vector")]
    IndexOutOfRange(Vec<u32>),
    #[error("support is not homogeneous of degree {0}")]
    NotHomogeneous(usize),
    #[error("generator degree {degree} exceeds twice the order {order}")]
    OrderTooLow { degree: usize, order: usize },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("atom extraction failed: {0}")]
    EigenDecompositionFailure(String),
    #[error("projection onto the lifted set did not converge (residual {0:.3e})")]
    ProjectionFailure(f64),
    #[error("certificate re-verification failed: {0}")]
    CertificateAssemblyFailure(String),
    #[error(transparent)]
    Conic(#[from] gtmp_conic::ConicError),
}

pub type Result<T> = std::result::Result<T, Error>;
