//! Deterministic evolution: exact Schrödinger propagation, von Neumann
//! measurement couplings, and single-interaction environment decoherence.
//!
//! Propagators are built from the exact eigendecomposition of the generator
//! (ħ = 1), so unitarity holds to machine precision at these dimensions; no
//! series approximations are involved.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::hilbert::linalg;
use crate::hilbert::{embed_matrix, HilbertError, Observable, SpaceSpec, StateVector};
use crate::{CMatrix, CVector, C64, TOL_SPECTRAL, TOL_STRUCTURAL};

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error("evolution time must be finite, got {0}")]
    NonFiniteTime(f64),

    #[error("pointer subsystem `{label}` has dim {dim} but the observable has {needed} distinct eigenvalues")]
    PointerTooSmall {
        label: String,
        dim: usize,
        needed: usize,
    },

    #[error("environment subsystem `{label}` is not in its ready state (overlap {overlap:.6})")]
    EnvNotReady { label: String, overlap: f64 },

    #[error("environment subsystem `{label}` has dim {dim}, need at least {needed} for the pointer record")]
    EnvTooSmall {
        label: String,
        dim: usize,
        needed: usize,
    },

    #[error("partial-coupling overlap must lie in [0, 1], got {0}")]
    InvalidOverlap(f64),
}

/// A Hermitian generator of time evolution (ħ = 1). The eigendecomposition
/// is computed on first use and cached, so repeated propagation with the
/// same Hamiltonian costs one matrix-vector product per step.
#[derive(Debug)]
pub struct Hamiltonian {
    space: SpaceSpec,
    matrix: CMatrix,
    eigen: OnceLock<(Vec<f64>, CMatrix)>,
}

impl Clone for Hamiltonian {
    fn clone(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.clone(),
            eigen: self.eigen.clone(),
        }
    }
}

impl Hamiltonian {
    pub fn new(space: SpaceSpec, matrix: CMatrix) -> Result<Self, DynamicsError> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            }
            .into());
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > TOL_STRUCTURAL {
            return Err(HilbertError::NotHermitian { defect }.into());
        }
        Ok(Self {
            space,
            matrix,
            eigen: OnceLock::new(),
        })
    }

    /// The zero generator: evolution is the identity.
    pub fn zero(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: CMatrix::zeros(d, d),
            eigen: OnceLock::new(),
        }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    fn eigen(&self) -> &(Vec<f64>, CMatrix) {
        self.eigen
            .get_or_init(|| linalg::hermitian_eigen(&self.matrix))
    }

    /// The unitary exp(-i H dt) as an explicit matrix.
    pub fn propagator(&self, dt: f64) -> CMatrix {
        let (values, vectors) = self.eigen();
        let d = values.len();
        let phases = CVector::from_fn(d, |k, _| C64::from_polar(1.0, -values[k] * dt));
        let mut scaled = vectors.clone();
        for k in 0..d {
            let col = scaled.column(k) * phases[k];
            scaled.set_column(k, &col);
        }
        scaled * vectors.adjoint()
    }

    /// Evolve a state by exp(-i H dt), working in the eigenbasis.
    pub fn evolve(&self, state: &StateVector, dt: f64) -> Result<StateVector, DynamicsError> {
        if !dt.is_finite() {
            return Err(DynamicsError::NonFiniteTime(dt));
        }
        self.space.expect_same(state.space())?;
        let (values, vectors) = self.eigen();
        let mut coeffs = vectors.adjoint() * state.amplitudes();
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -values[k] * dt);
        }
        let amplitudes = vectors * coeffs;
        Ok(StateVector::new(self.space.clone(), amplitudes)?)
    }

    /// Expectation value ⟨ψ|H|ψ⟩.
    pub fn expectation(&self, state: &StateVector) -> Result<f64, DynamicsError> {
        self.space.expect_same(state.space())?;
        let image = &self.matrix * state.amplitudes();
        Ok(state.amplitudes().dotc(&image).re)
    }
}

/// One exact Schrödinger step: exp(-i h dt)|state⟩.
pub fn schrodinger_step(
    state: &StateVector,
    h: &Hamiltonian,
    dt: f64,
) -> Result<StateVector, DynamicsError> {
    h.evolve(state, dt)
}

/// Build the von Neumann measurement coupling between a system observable
/// and a pointer subsystem.
///
/// The generator is `strength · Â ⊗ N̂`, where Â assigns each eigenspace of
/// `system_obs` its index k (ascending eigenvalue order) and N̂ generates the
/// cyclic shift on the pointer lattice. Evolving for unit time at strength 1
/// maps `(Σ μ_k |s_k⟩) ⊗ |ready⟩` to `Σ μ_k |s_k⟩ ⊗ |k⟩`: the pointer moves
/// from its ready site (index 0) by k sites, so distinct outcomes land on
/// mutually orthogonal pointer states. Zero strength leaves a product state
/// untouched.
pub fn measurement_coupling(
    space: &SpaceSpec,
    system_obs: &Observable,
    pointer_label: &str,
    strength: f64,
) -> Result<Hamiltonian, DynamicsError> {
    let pointer_dim = space.dim_of(pointer_label)?;
    let eig = system_obs.eigensystem();
    let n_outcomes = eig.eigenvalues.len();
    if pointer_dim < n_outcomes {
        return Err(DynamicsError::PointerTooSmall {
            label: pointer_label.to_string(),
            dim: pointer_dim,
            needed: n_outcomes,
        });
    }

    // Â = Σ_k k P_k on the observable's own space.
    let d_sys = system_obs.space().total_dim();
    let mut index_op = CMatrix::zeros(d_sys, d_sys);
    for (k, projector) in eig.projectors.iter().enumerate() {
        index_op += projector.scale(k as f64);
    }

    // N̂ = F diag(2πk/M) F†, the generator of the cyclic shift S = exp(-iN̂).
    let m = pointer_dim;
    let momentum = CMatrix::from_fn(m, m, |r, c| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..m {
            let angle = 2.0 * PI * (k as f64) * (r as f64 - c as f64) / m as f64;
            acc += C64::from_polar(1.0, angle) * (2.0 * PI * k as f64 / m as f64);
        }
        acc / C64::new(m as f64, 0.0)
    });

    let lifted_index = embed_matrix(system_obs.space(), &index_op, space)?;
    let pointer_space = SpaceSpec::single(pointer_label, pointer_dim)?;
    let lifted_momentum = embed_matrix(&pointer_space, &momentum, space)?;
    let h = (&lifted_index * &lifted_momentum).scale(strength);
    Hamiltonian::new(space.clone(), h)
}

/// How strongly the environment resolves the pointer eigenspaces.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Coupling {
    /// Orthogonal environment records: one per pointer eigenvalue.
    Perfect,
    /// Environment records with pairwise overlap ε ∈ [0, 1]; ε = 0 is
    /// `Perfect`, ε = 1 records nothing.
    Partial(f64),
}

/// Specification of a single decoherence interaction.
#[derive(Debug, Clone)]
pub struct DecoherenceSpec {
    pub pointer_obs: Observable,
    pub env_label: String,
    pub coupling: Coupling,
}

impl DecoherenceSpec {
    pub fn new(
        pointer_obs: Observable,
        env_label: impl Into<String>,
        coupling: Coupling,
    ) -> Result<Self, DynamicsError> {
        if let Coupling::Partial(eps) = coupling {
            if !(0.0..=1.0).contains(&eps) || !eps.is_finite() {
                return Err(DynamicsError::InvalidOverlap(eps));
            }
        }
        Ok(Self {
            pointer_obs,
            env_label: env_label.into(),
            coupling,
        })
    }

    fn overlap(&self) -> f64 {
        match self.coupling {
            Coupling::Perfect => 0.0,
            Coupling::Partial(eps) => eps,
        }
    }
}

/// Entangle the environment subsystem with the pointer eigenspaces of a
/// state whose environment factor is in its ready state (basis index 0).
///
/// Writes, per pointer eigenvalue k, an environment record |ξ_k⟩ with
/// pairwise overlaps ⟨ξ_j|ξ_k⟩ = ε. With ε = 0 the records are the first n
/// environment basis states, so the reduced state on the remaining
/// subsystems is exactly block-diagonal in the pointer basis; generally the
/// off-diagonal blocks are scaled by ε. The output is a pure state: only
/// reduced states become mixed.
pub fn decohere(state: &StateVector, spec: &DecoherenceSpec) -> Result<StateVector, DynamicsError> {
    let space = state.space();
    let env_pos = space.position_of(&spec.env_label)?;
    let env_dim = space.subsystems()[env_pos].1;
    let env_stride = space.stride(env_pos);

    let eig = spec.pointer_obs.eigensystem();
    let n = eig.eigenvalues.len();
    if env_dim < n {
        return Err(DynamicsError::EnvTooSmall {
            label: spec.env_label.clone(),
            dim: env_dim,
            needed: n,
        });
    }

    let ready_weight = state.marginal_probabilities(&spec.env_label)?[0];
    if ready_weight < 1.0 - TOL_SPECTRAL {
        return Err(DynamicsError::EnvNotReady {
            label: spec.env_label.clone(),
            overlap: ready_weight,
        });
    }

    // Record vectors: columns of G^{1/2} for the Gram matrix
    // G = (1-ε)I + εJ, embedded into the environment's first n basis states.
    let eps = spec.overlap();
    let a = (1.0 - eps).sqrt();
    let b = ((1.0 + (n as f64 - 1.0) * eps).sqrt() - (1.0 - eps).sqrt()) / n as f64;
    let record = |k: usize, e: usize| -> f64 {
        if e >= n {
            return 0.0;
        }
        if e == k {
            a + b
        } else {
            b
        }
    };

    let d = space.total_dim();
    let mut out = CVector::zeros(d);
    for (k, projector) in eig.projectors.iter().enumerate() {
        let component = crate::hilbert::apply_embedded_matrix(
            spec.pointer_obs.space(),
            projector,
            space,
            state.amplitudes(),
        )?;
        for idx in 0..d {
            if !(idx / env_stride).is_multiple_of(env_dim) {
                continue;
            }
            let amp = component[idx];
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            for e in 0..n {
                out[idx + e * env_stride] += amp * record(k, e);
            }
        }
    }
    Ok(StateVector::normalized(space.clone(), out)?)
}
