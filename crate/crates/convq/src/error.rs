//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by loading, feature extraction, and model fitting.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid value: {0}")]
    Domain(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("kappa undefined: {0}")]
    UndefinedKappa(String),
    #[error("speaking equality undefined: {0}")]
    UndefinedEquality(String),
    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),
    #[error("no convergence after {iterations} iterations (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },
    #[error("stratification failed: {0}")]
    Stratification(String),
    #[error("missing pair: {0}")]
    MissingPair(String),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code: 1 for input/usage problems, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } => 2,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
