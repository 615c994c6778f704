//! Finite-dimensional tensor-product Hilbert spaces with dense complex
//! matrices: labeled subsystems, state vectors, density operators, Hermitian
//! observables, and the Born-rule measurement primitives everything else is
//! built from.
//!
//! # Basis convention
//!
//! A [`SpaceSpec`] is an ordered list of `(label, dim)` subsystems. Basis
//! indices are subsystem-major: the first subsystem varies slowest. For a
//! space `[("A", 2), ("B", 3)]` the flat index of the basis state
//! `|a⟩⊗|b⟩` is `a * 3 + b`. Serialized states record the space alongside
//! the amplitudes, so saved data reloads bit-exactly into the same ordering.

mod density;
mod observable;
mod space;
mod state;

pub(crate) mod linalg;

pub use density::DensityOperator;
pub use observable::{
    apply_embedded_matrix, embed_matrix, Eigensystem, MeasurementOutcome, Observable,
};
pub use space::SpaceSpec;
pub use state::StateVector;

use thiserror::Error;

/// Errors from Hilbert-space constructors and operations.
#[derive(Debug, Clone, Error)]
pub enum HilbertError {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),

    #[error("subsystem `{0}` has dimension zero")]
    ZeroDim(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("label `{0}` appears on both sides of a tensor product")]
    LabelCollision(String),

    #[error("operand spaces differ: {0}")]
    SpaceMismatch(String),

    #[error("expected {expected} amplitudes/rows for this space, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector is not normalized (norm = {norm:.3e})")]
    NotNormalized { norm: f64 },

    #[error("cannot normalize a vector with norm {norm:.3e}")]
    ZeroNorm { norm: f64 },

    #[error("matrix is not Hermitian (max |M - M†| = {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("matrix does not have unit trace (trace = {trace:.6})")]
    NotUnitTrace { trace: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue = {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("projector is not idempotent and Hermitian (defect = {defect:.3e})")]
    InvalidProjector { defect: f64 },

    #[error(
        "projection onto an effectively orthogonal subspace (probability = {probability:.3e})"
    )]
    NullProjection { probability: f64 },
}

/// Spectral norm of the commutator `[a, b] = ab - ba`.
///
/// Both operators must be square and of equal size; used to report how far
/// two observables are from being jointly measurable.
pub fn commutator_norm(a: &crate::CMatrix, b: &crate::CMatrix) -> f64 {
    let comm = a * b - b * a;
    linalg::spectral_norm(&comm)
}
