use thiserror::Error;

use crate::solvers::RunTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is singular (pivot {pivot:e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("singular Jacobian: {0}")]
    SingularJacobian(Box<Error>),

    #[error("singular system: consensus equilibrium is not unique")]
    SingularSystem,

    #[error("bad preconditioner: {0}")]
    BadPreconditioner(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite iterate after {} iterations", trace.len())]
    NonFinite { trace: Box<RunTrace> },

    #[error("unknown solver `{0}`")]
    UnknownSolver(String),
}

impl Error {
    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}
