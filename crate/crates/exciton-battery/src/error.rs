//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not line up for the requested operation.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// An operator that must be Hermitian is not, beyond tolerance.
    #[error("operator not Hermitian: max |H - H†| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// A density matrix failed validation (trace, positivity, Hermiticity).
    #[error("invalid density matrix: {reason}")]
    InvalidDensity { reason: String },

    /// Fock-space truncation is too small for the requested state.
    #[error(
        "Fock truncation too small: tail mass {tail:.3e} above level N-2 exceeds {limit:.3e}; raise N"
    )]
    TruncationTail { tail: f64, limit: f64 },

    /// A rate, temperature, or spectrum value violates a positivity invariant.
    #[error("invariant violation: {what}")]
    InvariantViolation { what: String },

    /// Generator kernel is not one-dimensional: no unique stationary state.
    #[error("generator is not ergodic: kernel dimension {kernel_dim} (expected 1)")]
    NonErgodic { kernel_dim: usize },

    /// A numerical procedure failed to reach its certified tolerance.
    #[error("numerical failure: {what}")]
    NumericalFailure { what: String },

    /// Requested problem size exceeds what the dense kernels are built for.
    #[error("resource limit: {what}")]
    ResourceLimit { what: String },

    /// Tabulated data evaluated outside its domain.
    #[error("extrapolation outside tabulated range: {what}")]
    Extrapolation { what: String },

    /// Configuration parse or validation error.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
