use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("matrix is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("partition {parts:?} is not in E_{d}")]
    PartitionOutOfRange { parts: Vec<usize>, d: usize },
    #[error("rank {rank} exceeds shape {shape}")]
    RankExceedsShape { rank: usize, shape: f64 },
    #[error("measure does not exist: {0}")]
    Nonexistent(String),
    #[error(
        "series did not reach rel_tol {rel_tol:e} by weight {weight} (partial value {partial:e})"
    )]
    Truncation {
        partial: f64,
        weight: usize,
        rel_tol: f64,
    },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("ill-conditioned covariance (condition number {0:e})")]
    IllConditioned(f64),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
