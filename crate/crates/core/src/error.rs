use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point index {index} out of range for a space of {len} points")]
    InvalidPoint { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("inconsistent solution: {0}")]
    InconsistentSolution(String),

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("infeasible{}: {reason}", site.map(|s| format!(" at site {s}")).unwrap_or_default())]
    Infeasible { site: Option<usize>, reason: String },

    #[error("instance too large for the exact oracle: {0}")]
    OracleSizeLimit(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid node {node}: {reason}")]
    InvalidNode { node: usize, reason: String },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),
}

impl Error {
    pub(crate) fn infeasible(reason: impl Into<String>) -> Self {
        Error::Infeasible {
            site: None,
            reason: reason.into(),
        }
    }

    /// Attaches a site id to an infeasibility error raised inside a site computation.
    pub(crate) fn at_site(self, site: usize) -> Self {
        match self {
            Error::Infeasible { site: None, reason } => Error::Infeasible {
                site: Some(site),
                reason,
            },
            other => other,
        }
    }
}
