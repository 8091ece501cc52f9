//! Crate-wide error type.

/// Errors surfaced by buffer, sampler, and linear-algebra operations.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Vectors of different dimension were combined.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The matrix is not symmetric within tolerance.
    #[error("matrix is not symmetric: |L[{row},{col}] - L[{col},{row}]| = {delta:e}")]
    NotSymmetric { row: usize, col: usize, delta: f64 },

    /// A Cholesky pivot radicand fell below the clamping threshold.
    #[error("matrix is not positive semi-definite: pivot {index} has radicand {radicand:e}")]
    NotPositiveSemiDefinite { index: usize, radicand: f64 },

    /// An operation that needs stored data was called on an empty buffer.
    #[error("empty buffer: {0}")]
    EmptyBuffer(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
