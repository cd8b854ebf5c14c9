use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes surfaced by the library.
///
/// Precondition violations that indicate a caller bug on a hot path (e.g.
/// mismatched dimensions deep inside a sampling loop) panic via `assert!`
/// instead; `Error` is reserved for conditions the public contract names.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fails the documented domain of an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The request is outside what this implementation supports by design
    /// (e.g. copy counts other than 2 or 4, dense form-factor dimensions
    /// that would not fit in memory).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative scheme exhausted its iteration budget.
    #[error("{operation} did not converge: residual {residual:.3e} above tolerance {tolerance:.3e}")]
    Convergence {
        operation: &'static str,
        residual: f64,
        tolerance: f64,
    },
}
