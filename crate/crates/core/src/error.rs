use thiserror::Error;

/// Errors raised by the solvers, the simulation engine and the artifact layer.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or call argument is outside its admissible set.
    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    /// A state or time coordinate lies outside the closure of the domain.
    #[error("point (t={t}, x={x}) lies outside the model domain")]
    DomainViolation { t: f64, x: f64 },

    /// The projected iteration did not reach the update tolerance.
    #[error("solver did not converge at time level {level}: last update norm {update_norm:e}")]
    NonConvergence { level: usize, update_norm: f64 },

    /// A solved slice contains more than one contact interval.
    #[error("time level {level}: {what} is not connected")]
    DisconnectedRegion { level: usize, what: &'static str },

    /// Two surfaces that must share a lattice do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A hard assumption check failed; the listed checks are the failures.
    #[error("model violates standing assumptions: {}", failed.join(", "))]
    AssumptionFailure { failed: Vec<String> },

    /// An artifact on disk is malformed or does not match the current config.
    #[error("artifact error in {path}: {reason}")]
    Artifact { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
