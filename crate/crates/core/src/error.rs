//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors reported by model construction, propagation, and circuit
/// evaluation.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Two operators (or an operator and a model) have incompatible shapes.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A matrix expected to be Hermitian is not, beyond tolerance.
    #[error("{context}: Hermiticity residue {residue:.3e} exceeds tolerance {tolerance:.1e}")]
    NotHermitian {
        context: &'static str,
        residue: f64,
        tolerance: f64,
    },

    /// A matrix expected to be a projector fails `P² = P` beyond tolerance.
    #[error("{context}: projector residue {residue:.3e} exceeds tolerance {tolerance:.1e}")]
    NotProjector {
        context: &'static str,
        residue: f64,
        tolerance: f64,
    },

    /// A matrix fails the density-operator checks (unit trace, positivity).
    #[error("invalid density operator: {reason}")]
    NotDensity { reason: String },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// The requested operation exceeds a hard dimension cap.
    #[error("{context}: dimension {dim} exceeds cap {cap}")]
    DimensionCap {
        context: &'static str,
        dim: usize,
        cap: usize,
    },

    /// A fixed-step integration blew up.
    #[error("numerical divergence at step {step} (norm {norm:.3e})")]
    Divergence { step: usize, norm: f64 },

    /// A formally real expectation value came out with a large imaginary part,
    /// indicating inconsistent inputs.
    #[error("{context}: imaginary residue {residue:.3e} exceeds tolerance {tolerance:.1e}")]
    ImaginaryResidue {
        context: &'static str,
        residue: f64,
        tolerance: f64,
    },

    /// The normalization expectation vanished, so the correlation is undefined.
    #[error("correlation undefined: denominator expectation is zero")]
    UndefinedCorrelation,

    /// A fit window selected no (or too few) samples.
    #[error("fit window [{lo}, {hi}] selects {count} samples; at least {needed} required")]
    EmptyWindow {
        lo: f64,
        hi: f64,
        count: usize,
        needed: usize,
    },

    /// An expectation value left the admissible range for shot sampling.
    #[error("expectation {value} outside [-1, 1]; cannot emulate shots")]
    ExpectationOutOfRange { value: f64 },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
