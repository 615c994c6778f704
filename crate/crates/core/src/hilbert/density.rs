//! Density operators: positive unit-trace matrices over a labeled space.

use serde::{Deserialize, Serialize};

use super::linalg;
use super::space::SpaceSpec;
use super::state::StateVector;
use super::HilbertError;
use crate::{CMatrix, C64, TOL_STRUCTURAL};

/// A mixed (or pure) state as a positive, unit-trace, Hermitian matrix.
///
/// Validation at construction: Hermiticity and trace within `1e-10`,
/// eigenvalues ≥ `-1e-10`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct DensityOperator {
    space: SpaceSpec,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(space: SpaceSpec, matrix: CMatrix) -> Result<Self, HilbertError> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: matrix.nrows(),
            });
        }
        let defect = linalg::hermiticity_defect(&matrix);
        if defect > TOL_STRUCTURAL {
            return Err(HilbertError::NotHermitian { defect });
        }
        let trace = linalg::trace(&matrix);
        if (trace.re - 1.0).abs() > TOL_STRUCTURAL || trace.im.abs() > TOL_STRUCTURAL {
            return Err(HilbertError::NotUnitTrace { trace: trace.re });
        }
        let (values, _) = linalg::hermitian_eigen(&matrix);
        let min_eigenvalue = values.first().copied().unwrap_or(0.0);
        if min_eigenvalue < -TOL_STRUCTURAL {
            return Err(HilbertError::NotPositive { min_eigenvalue });
        }
        Ok(Self { space, matrix })
    }

    /// |ψ⟩⟨ψ| for a pure state. Valid by construction, so no spectral check.
    pub fn from_pure(state: &StateVector) -> Self {
        let matrix = linalg::outer(state.amplitudes(), state.amplitudes());
        Self {
            space: state.space().clone(),
            matrix,
        }
    }

    /// Convex combination Σ pᵢ ρᵢ. Probabilities must be nonnegative and sum
    /// to 1 within `1e-10`; all members must share a space.
    pub fn mixture(members: &[(f64, DensityOperator)]) -> Result<Self, HilbertError> {
        let first = members
            .first()
            .ok_or_else(|| HilbertError::SpaceMismatch("empty mixture".into()))?;
        let space = first.1.space.clone();
        let mut total = 0.0;
        let mut matrix = CMatrix::zeros(space.total_dim(), space.total_dim());
        for (p, rho) in members {
            if *p < 0.0 {
                return Err(HilbertError::NotPositive { min_eigenvalue: *p });
            }
            space.expect_same(&rho.space)?;
            matrix += rho.matrix.scale(*p);
            total += p;
        }
        if (total - 1.0).abs() > TOL_STRUCTURAL {
            return Err(HilbertError::NotUnitTrace { trace: total });
        }
        Ok(Self { space, matrix })
    }

    /// The maximally mixed state I/d.
    pub fn maximally_mixed(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        let matrix = CMatrix::identity(d, d).unscale(d as f64);
        Self { space, matrix }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// Tr(ρ²); equals 1 exactly for pure states.
    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.matrix * &self.matrix)).re
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix).0
    }

    /// Expectation value Tr(ρ M) of a Hermitian matrix.
    pub fn expectation(&self, m: &CMatrix) -> f64 {
        linalg::trace(&(&self.matrix * m)).re
    }

    /// Trace out every subsystem not named in `keep`; the result keeps the
    /// retained subsystems in their original order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator, HilbertError> {
        let reduced_space = self.space.subspace(keep)?;
        // Offsets of kept/traced digit combinations in the full flat index.
        let kept_positions: Vec<usize> = self
            .space
            .subsystems()
            .iter()
            .enumerate()
            .filter(|(_, (l, _))| keep.contains(&l.as_str()))
            .map(|(k, _)| k)
            .collect();
        let traced_positions: Vec<usize> = (0..self.space.subsystems().len())
            .filter(|k| !kept_positions.contains(k))
            .collect();
        let kept_offsets = offsets(&self.space, &kept_positions);
        let traced_offsets = offsets(&self.space, &traced_positions);

        let dk = reduced_space.total_dim();
        let mut matrix = CMatrix::zeros(dk, dk);
        for (a, &off_a) in kept_offsets.iter().enumerate() {
            for (b, &off_b) in kept_offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &off_t in &traced_offsets {
                    acc += self.matrix[(off_a + off_t, off_b + off_t)];
                }
                matrix[(a, b)] = acc;
            }
        }
        Ok(DensityOperator {
            space: reduced_space,
            matrix,
        })
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64, HilbertError> {
        self.space.expect_same(&other.space)?;
        let diff = &self.matrix - &other.matrix;
        let (values, _) = linalg::hermitian_eigen(&diff);
        Ok(0.5 * values.iter().map(|v| v.abs()).sum::<f64>())
    }

    pub(crate) fn from_parts_unchecked(space: SpaceSpec, matrix: CMatrix) -> Self {
        debug_assert_eq!(space.total_dim(), matrix.nrows());
        Self { space, matrix }
    }
}

/// Flat-index offsets of all digit combinations of the given subsystem
/// positions, in row-major order of those positions.
fn offsets(space: &SpaceSpec, positions: &[usize]) -> Vec<usize> {
    let mut result = vec![0usize];
    for &pos in positions {
        let (_, dim) = &space.subsystems()[pos];
        let stride = space.stride(pos);
        let mut next = Vec::with_capacity(result.len() * dim);
        for &base in &result {
            for digit in 0..*dim {
                next.push(base + digit * stride);
            }
        }
        result = next;
    }
    result
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    space: SpaceSpec,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<DensityRepr> for DensityOperator {
    type Error = HilbertError;

    fn try_from(repr: DensityRepr) -> Result<Self, Self::Error> {
        let d = repr.space.total_dim();
        if repr.re.len() != d * d || repr.im.len() != d * d {
            return Err(HilbertError::DimensionMismatch {
                expected: d * d,
                found: repr.re.len(),
            });
        }
        // Row-major flattening.
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            C64::new(repr.re[i * d + j], repr.im[i * d + j])
        });
        DensityOperator::new(repr.space, matrix)
    }
}

impl From<DensityOperator> for DensityRepr {
    fn from(rho: DensityOperator) -> Self {
        let d = rho.space.total_dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(rho.matrix[(i, j)].re);
                im.push(rho.matrix[(i, j)].im);
            }
        }
        DensityRepr {
            space: rho.space,
            re,
            im,
        }
    }
}
