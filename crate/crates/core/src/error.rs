use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the function's domain (non-finite logits, infeasible bounds, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// Caller violated an API precondition (wrong model kind, missing features, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    /// An algorithm failed to certify its own answer. Indicates a bug.
    #[error("internal error: {0}")]
    Internal(String),

    /// `last_params` is the last parameter vector with a finite loss, in
    /// [`crate::calib::CalibModel::to_flat`] layout.
    #[error("optimization diverged at epoch {epoch}: {reason}")]
    Divergence {
        epoch: usize,
        reason: String,
        last_params: Vec<f64>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
