use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain box too small: {0}")]
    BoxTooSmall(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("construction not applicable: {0}")]
    NotApplicable(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
