use std::path::PathBuf;

use ocdeepiv_bench::BenchError;
use ocdeepiv_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: line {line}: {message}")]
    ConfigLine { path: String, line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: row {row}: {message}", path.display())]
    Parse { path: PathBuf, row: usize, message: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error(transparent)]
    Bench(#[from] BenchError),

    #[error("plot: {0}")]
    Plot(String),

    #[error("gradient check failed: {0}")]
    GradcheckFailed(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 0 success, 1 configuration, 2 runtime or divergence, 3 gradient check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigLine { .. } | CliError::Config(_) => 1,
            CliError::Core(CoreError::Config(_)) => 1,
            CliError::Bench(BenchError::Core(CoreError::Config(_))) => 1,
            CliError::Bench(BenchError::UnknownEstimator(_)) => 1,
            CliError::GradcheckFailed(_) => 3,
            _ => 2,
        }
    }
}
