use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dense materialization refused: {size} unknowns exceeds guard {guard}")]
    SizeGuard { size: usize, guard: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("negative curvature in cg: p'(Mf H p) = {0:e}")]
    NegativeCurvature(f64),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("filter count {k} must be below eigenvalue count {count}")]
    FilterCount { k: usize, count: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
