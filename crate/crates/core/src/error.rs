use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("malformed feature table at line {line}: {message}")]
    FeatureTable { line: usize, message: String },

    #[error("label out of range: {label} with {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("budget exceeds pool: budget {budget}, pool size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },

    #[error("pool exhausted: requested {requested}, available {available}")]
    PoolExhausted { requested: usize, available: usize },

    #[error("diverged: {0}")]
    Diverged(String),

    #[error("unknown sample id {0}")]
    UnknownSample(u64),

    #[error("sample {0} is not pending")]
    NotPending(u64),

    #[error("sample {0} answered more than once")]
    DuplicateAnswer(u64),

    #[error("missing answers for {0} pending samples")]
    MissingAnswers(usize),

    #[error("session is complete")]
    SessionComplete,

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
