use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] ocdeepiv_core::Error),

    #[error("rank deficient design in {0}")]
    Rank(String),

    #[error("fold too small: {rows} rows (need at least {min})")]
    FoldTooSmall { rows: usize, min: usize },

    #[error("unknown estimator '{0}'")]
    UnknownEstimator(String),

    #[error("thread pool: {0}")]
    Pool(String),
}
