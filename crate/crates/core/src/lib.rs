//! Dense-matrix quantum dynamics toolkit.
//!
//! Everything is built on labeled tensor-product Hilbert spaces with dense
//! complex matrices ([`hilbert`]). On top of that sit exact unitary and
//! decoherence dynamics ([`dynamics`]), stochastic localization-jump
//! trajectories in discretized position space ([`grw`]), Kraus channels with
//! Stinespring dilations ([`channels`]), information-theoretic protocol checks
//! ([`protocols`]), and a nested-observer interference experiment ([`wigner`]).
//!
//! All state types are immutable after construction; operations are pure
//! functions returning new values, so everything can be shared freely across
//! threads. Randomized routines take an explicit RNG and derive per-run
//! streams from `(master_seed, run_index)` (see [`rng`]), which makes every
//! experiment reproducible and order-independent under parallel execution.

pub mod channels;
pub mod dynamics;
pub mod grw;
pub mod hilbert;
pub mod protocols;
pub mod random;
pub mod rng;
pub mod stats;
pub mod wigner;

pub use hilbert::{DensityOperator, HilbertError, Observable, SpaceSpec, StateVector};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

/// Structural tolerance: norms, Hermiticity, trace checks.
pub const TOL_STRUCTURAL: f64 = 1e-10;
/// Spectral tolerance: projector completeness/orthogonality, Kraus
/// completeness, eigenvalue degeneracy merging.
pub const TOL_SPECTRAL: f64 = 1e-9;
/// Probability mass below this is treated as an impossible event.
pub const TOL_NULL_EVENT: f64 = 1e-14;
