//! Normalized complex amplitude vectors over a labeled product basis.

use serde::{Deserialize, Serialize};

use super::linalg;
use super::observable::Observable;
use super::space::SpaceSpec;
use super::HilbertError;
use crate::{CMatrix, CVector, C64, TOL_NULL_EVENT, TOL_STRUCTURAL};

/// A pure state: unit-norm complex amplitudes over the basis of a
/// [`SpaceSpec`].
///
/// Every constructor and every operation returning a `StateVector` leaves the
/// Euclidean norm within `1e-10` of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateVectorRepr", into = "StateVectorRepr")]
pub struct StateVector {
    space: SpaceSpec,
    amplitudes: CVector,
}

impl StateVector {
    /// Wrap amplitudes that are already normalized (within `1e-10`).
    pub fn new(space: SpaceSpec, amplitudes: CVector) -> Result<Self, HilbertError> {
        if amplitudes.len() != space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > TOL_STRUCTURAL {
            return Err(HilbertError::NotNormalized { norm });
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalize arbitrary amplitudes. Fails on an effectively zero vector.
    pub fn normalized(space: SpaceSpec, amplitudes: CVector) -> Result<Self, HilbertError> {
        if amplitudes.len() != space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: space.total_dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if norm < TOL_NULL_EVENT {
            return Err(HilbertError::ZeroNorm { norm });
        }
        Ok(Self {
            space,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// The computational basis state with the given flat index.
    pub fn basis_state(space: SpaceSpec, index: usize) -> Result<Self, HilbertError> {
        if index >= space.total_dim() {
            return Err(HilbertError::DimensionMismatch {
                expected: space.total_dim(),
                found: index,
            });
        }
        let mut amplitudes = CVector::zeros(space.total_dim());
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<C64, HilbertError> {
        self.space.expect_same(&other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Squared overlap |⟨self|other⟩|².
    pub fn fidelity(&self, other: &StateVector) -> Result<f64, HilbertError> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Kronecker product; the result's space is the concatenation of the two
    /// operand spaces.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector, HilbertError> {
        let space = self.space.tensor(&other.space)?;
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        let amplitudes = CVector::from_column_slice(amplitudes.as_slice());
        Ok(StateVector { space, amplitudes })
    }

    /// The rank-one density operator |ψ⟩⟨ψ|.
    pub fn density(&self) -> super::DensityOperator {
        super::DensityOperator::from_pure(self)
    }

    /// Born-rule outcome distribution of an observable on this state:
    /// `(eigenvalue, ⟨ψ|P_k|ψ⟩)` pairs in ascending eigenvalue order.
    pub fn born_probabilities(&self, obs: &Observable) -> Result<Vec<(f64, f64)>, HilbertError> {
        self.space.expect_same(obs.space())?;
        let eig = obs.eigensystem();
        Ok(eig
            .eigenvalues
            .iter()
            .zip(&eig.projectors)
            .map(|(&value, projector)| {
                let projected = projector * &self.amplitudes;
                (value, projected.norm_squared())
            })
            .collect())
    }

    /// Lüders update: project onto the range of `projector` and renormalize.
    ///
    /// Returns the post-measurement state and the outcome probability
    /// ‖Pψ‖². The projector must be Hermitian and idempotent within `1e-9`;
    /// probabilities below `1e-14` are rejected as projections onto an
    /// effectively orthogonal subspace.
    pub fn project(&self, projector: &CMatrix) -> Result<(StateVector, f64), HilbertError> {
        let d = self.space.total_dim();
        if projector.nrows() != d || projector.ncols() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: projector.nrows(),
            });
        }
        let defect = linalg::max_abs(&(projector * projector - projector))
            .max(linalg::hermiticity_defect(projector));
        if defect > crate::TOL_SPECTRAL {
            return Err(HilbertError::InvalidProjector { defect });
        }
        let projected = projector * &self.amplitudes;
        let probability = projected.norm_squared();
        if probability < TOL_NULL_EVENT {
            return Err(HilbertError::NullProjection { probability });
        }
        let state = StateVector {
            space: self.space.clone(),
            amplitudes: projected.unscale(probability.sqrt()),
        };
        Ok((state, probability))
    }

    /// Apply a norm-preserving operator. Fails if the image drifts off unit
    /// norm, which catches accidentally non-unitary inputs.
    pub fn apply_unitary(&self, m: &CMatrix) -> Result<StateVector, HilbertError> {
        let amplitudes = m * &self.amplitudes;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > TOL_STRUCTURAL {
            return Err(HilbertError::NotNormalized { norm });
        }
        Ok(StateVector {
            space: self.space.clone(),
            amplitudes,
        })
    }

    /// Apply an arbitrary operator and renormalize; returns the new state and
    /// the squared norm of the unnormalized image.
    pub fn apply_then_normalize(&self, m: &CMatrix) -> Result<(StateVector, f64), HilbertError> {
        let image = m * &self.amplitudes;
        let weight = image.norm_squared();
        if weight < TOL_NULL_EVENT {
            return Err(HilbertError::ZeroNorm {
                norm: weight.sqrt(),
            });
        }
        let state = StateVector {
            space: self.space.clone(),
            amplitudes: image.unscale(weight.sqrt()),
        };
        Ok((state, weight))
    }

    /// Probability of each basis value of one subsystem (the marginal
    /// distribution of that subsystem's computational basis).
    pub fn marginal_probabilities(&self, label: &str) -> Result<Vec<f64>, HilbertError> {
        let pos = self.space.position_of(label)?;
        let dim = self.space.subsystems()[pos].1;
        let stride = self.space.stride(pos);
        let mut probs = vec![0.0_f64; dim];
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            probs[(idx / stride) % dim] += amp.norm_sqr();
        }
        Ok(probs)
    }
}

#[derive(Serialize, Deserialize)]
struct StateVectorRepr {
    space: SpaceSpec,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<StateVectorRepr> for StateVector {
    type Error = HilbertError;

    fn try_from(repr: StateVectorRepr) -> Result<Self, Self::Error> {
        if repr.re.len() != repr.im.len() {
            return Err(HilbertError::DimensionMismatch {
                expected: repr.re.len(),
                found: repr.im.len(),
            });
        }
        let amplitudes = CVector::from_iterator(
            repr.re.len(),
            repr.re
                .iter()
                .zip(&repr.im)
                .map(|(&re, &im)| C64::new(re, im)),
        );
        StateVector::new(repr.space, amplitudes)
    }
}

impl From<StateVector> for StateVectorRepr {
    fn from(state: StateVector) -> Self {
        StateVectorRepr {
            space: state.space,
            re: state.amplitudes.iter().map(|z| z.re).collect(),
            im: state.amplitudes.iter().map(|z| z.im).collect(),
        }
    }
}
