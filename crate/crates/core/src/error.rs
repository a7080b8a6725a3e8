use thiserror::Error;

/// Errors raised by the solvers in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("outside the model domain: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// No candidate partition passed validation. Indicates a bug, never a model state.
    #[error("no candidate partition validated (smallest violation {smallest_violation:e})")]
    NoEquilibrium { smallest_violation: f64 },

    #[error("two validated partitions disagree by {gap:e} in sup-norm")]
    ConflictingEquilibria { gap: f64 },

    #[error("best-response iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("undefined perturbation direction: {0}")]
    UndefinedDirection(String),

    #[error("regime changes under every admissible step for firm {firm}")]
    UnstableRegime { firm: usize },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("hypothesis violated in round {round} by firm {firm}: {detail}")]
    Hypothesis {
        round: usize,
        firm: usize,
        detail: String,
    },

    #[error("no sign change of the first-order residual on [{lo:e}, {hi:e}] although a root must exist")]
    Bracket { lo: f64, hi: f64 },

    #[error("interior carbon profile infeasible for firms {firms:?}")]
    Infeasible { firms: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, CoreError>;

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> CoreError {
    CoreError::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}
