use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or model parameter lies outside its admissible range.
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    /// An operation argument (index, probability level, ...) is out of range.
    #[error("argument out of domain: {0}")]
    Domain(String),

    /// The closed-form sum sampler cannot represent the requested draw.
    #[error("exact sampler capacity exceeded: {0}")]
    CapExceeded(String),

    #[error("convolution oracle infeasible: {0}")]
    OracleInfeasible(String),

    /// The environment has σ² = 0.
    #[error("degenerate environment: {0}")]
    Degenerate(String),

    #[error("insufficient tail: expected {expected:.2} hits, need at least {required}")]
    InsufficientTail { expected: f64, required: f64 },

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
