use thiserror::Error;

/// Errors produced by the skelmap algorithms.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An operation that needs a connected neighborhood graph got a disconnected one.
    #[error("neighborhood graph is disconnected ({} components, sizes {component_sizes:?})", component_sizes.len())]
    Disconnected { component_sizes: Vec<usize> },

    /// A distance matrix contained unreachable entries where a complete one was required.
    #[error("distance matrix has unreachable entries")]
    Unreachable,

    /// Homology dimensions (or other shape parameters) of two inputs disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The Pearson correlation is undefined because one input has zero variance.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("unknown shape `{0}`")]
    UnknownShape(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
