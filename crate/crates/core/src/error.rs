//! Error type shared across the core library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("track parse error: {0}")]
    TrackParse(String),

    #[error("track validation failed at segment {segment}: {reason}")]
    TrackValidation { segment: usize, reason: String },

    #[error("perturbation parameter out of range: {0}")]
    PerturbationRange(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("parameter file error: {0}")]
    ParamFile(String),

    #[error("replay error: {0}")]
    Replay(String),

    #[error("trace error: {0}")]
    Trace(String),

    #[error("log error at line {line}: {reason}")]
    LogParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
