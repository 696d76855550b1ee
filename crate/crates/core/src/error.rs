//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by market construction, measure calibration and solvers.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A file or in-memory document does not match the expected schema.
    #[error("schema violation: {0}")]
    Schema(String),

    /// A domain invariant failed during eager validation.
    #[error("invariant violation ({name}): {detail}")]
    Invariant { name: String, detail: String },

    /// A constraint system has no feasible point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A linear program is unbounded in the optimization direction.
    #[error("unbounded: {0}")]
    Unbounded(String),

    /// An iterative solver hit its iteration cap before certification.
    #[error("solver did not converge: {context} (certified gap {gap:.3e})")]
    NonConvergence { context: String, gap: f64 },

    /// Terminal wealth went nonpositive on a path charged by the measure.
    #[error("admissibility violation: {0}")]
    Admissibility(String),

    /// Utility domain error (e.g. conjugate at y <= 0 for unbounded families).
    #[error("utility domain: {0}")]
    UtilityDomain(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn invariant(name: &str, detail: impl Into<String>) -> Self {
        CoreError::Invariant {
            name: name.to_string(),
            detail: detail.into(),
        }
    }

    /// Process exit code class used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::Schema(_) | CoreError::Json(_) => 2,
            CoreError::Invariant { .. }
            | CoreError::Infeasible(_)
            | CoreError::Admissibility(_)
            | CoreError::UtilityDomain(_) => 3,
            CoreError::NonConvergence { .. } | CoreError::Unbounded(_) => 5,
            CoreError::Io(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
