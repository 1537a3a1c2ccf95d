use thiserror::Error;

/// Errors raised anywhere in the sampling pipeline.
#[derive(Debug, Error)]
pub enum GfiError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("{failed} of {total} draws failed (limit is 20%); last failure: {last}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        last: String,
    },
    #[error("no draws were accepted by the loss filter")]
    NoAcceptedDraws,
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GfiError>;
