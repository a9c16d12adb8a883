use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Longitudinal speed below the slip-angle guard.
    #[error("slip angle singularity: v_x = {vx} m/s is below the guard {v_eps} m/s")]
    Singularity { vx: f64, v_eps: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Gram matrix stayed indefinite after the full jitter ladder.
    #[error("kernel matrix is not positive definite (jitter escalated to {jitter:e})")]
    Conditioning { jitter: f64 },

    #[error(
        "hyperparameter fit did not converge after {restarts} restarts (best log-likelihood {best_log_likelihood})"
    )]
    NonConvergence { restarts: usize, best_log_likelihood: f64 },

    #[error("infeasible bounds on `{0}`")]
    InfeasibleBounds(&'static str),

    #[error("model file {path}: {reason}")]
    ModelFile { path: PathBuf, reason: String },

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
