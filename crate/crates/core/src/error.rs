//! Error type shared across the library.

/// Library-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input to an operation (bad one-hot vector, length mismatch,
    /// non-finite sample, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// All encoder outputs are zero, so the unit-power scale is undefined.
    #[error("degenerate constellation: all encoder outputs are zero")]
    DegenerateConstellation,

    /// The requested operation needs a differentiable channel model.
    #[error("channel '{channel}' does not support {operation}")]
    UnsupportedChannel {
        channel: &'static str,
        operation: &'static str,
    },

    /// Invalid configuration (indivisible batch size, empty sweep, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Linear-algebra breakdown in the filter (Cholesky failure after the
    /// jitter policy, singular innovation covariance).
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// Every hyperparameter pair of a grid search failed to train.
    #[error("grid search failed: no (q, r) pair trained successfully\n{0}")]
    SearchFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
