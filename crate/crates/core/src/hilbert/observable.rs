//! Hermitian observables with lazily computed spectral decompositions.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg;
use super::space::SpaceSpec;
use super::state::StateVector;
use super::HilbertError;
use crate::{CMatrix, C64, TOL_SPECTRAL, TOL_STRUCTURAL};

/// Spectral decomposition of an observable: ascending distinct eigenvalues
/// with one orthogonal projector per eigenvalue. Eigenvalues closer than
/// `1e-9` are merged into a single degenerate block, so projectors depend
/// only on the eigenspace, never on an arbitrary basis choice inside it.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
}

/// A Hermitian operator on a labeled space.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "ObservableRepr", into = "ObservableRepr")]
pub struct Observable {
    space: SpaceSpec,
    matrix: CMatrix,
    #[serde(skip)]
    eigensystem: OnceLock<Eigensystem>,
}

impl Clone for Observable {
    fn clone(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.clone(),
            eigensystem: self.eigensystem.clone(),
        }
    }
}

impl Observable {
    /// Wrap a matrix, requiring Hermiticity within `1e-10`.
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
        Ok(Self {
            space,
            matrix,
            eigensystem: OnceLock::new(),
        })
    }

    /// Observable diagonal in the computational basis.
    pub fn from_diagonal(space: SpaceSpec, values: &[f64]) -> Result<Self, HilbertError> {
        let d = space.total_dim();
        if values.len() != d {
            return Err(HilbertError::DimensionMismatch {
                expected: d,
                found: values.len(),
            });
        }
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(space, matrix)
    }

    /// Wrap a matrix together with an already-known spectral decomposition.
    /// The matrix is still checked for Hermiticity; the eigensystem is
    /// trusted.
    pub(crate) fn with_eigensystem(
        space: SpaceSpec,
        matrix: CMatrix,
        eigensystem: Eigensystem,
    ) -> Result<Self, HilbertError> {
        let obs = Self::new(space, matrix)?;
        let _ = obs.eigensystem.set(eigensystem);
        Ok(obs)
    }

    /// Pauli σ_z on a single-qubit space: |0⟩ is the +1 eigenstate.
    pub fn sigma_z(space: SpaceSpec) -> Result<Self, HilbertError> {
        Self::from_diagonal(space, &[1.0, -1.0])
    }

    /// Pauli σ_x on a single-qubit space.
    pub fn sigma_x(space: SpaceSpec) -> Result<Self, HilbertError> {
        if space.total_dim() != 2 {
            return Err(HilbertError::DimensionMismatch {
                expected: 2,
                found: space.total_dim(),
            });
        }
        let matrix = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        Self::new(space, matrix)
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// The spectral decomposition, computed on first use and cached.
    pub fn eigensystem(&self) -> &Eigensystem {
        self.eigensystem.get_or_init(|| {
            let (values, vectors) = linalg::hermitian_eigen(&self.matrix);
            let mut eigenvalues = Vec::new();
            let mut projectors = Vec::new();
            let mut block_start = 0;
            for k in 0..values.len() {
                let block_ends = k + 1 == values.len() || values[k + 1] - values[k] > TOL_SPECTRAL;
                if block_ends {
                    let block = block_start..k + 1;
                    let mean =
                        values[block.clone()].iter().sum::<f64>() / (k + 1 - block_start) as f64;
                    eigenvalues.push(mean);
                    projectors.push(linalg::projector_from_columns(&vectors, block));
                    block_start = k + 1;
                }
            }
            Eigensystem {
                eigenvalues,
                projectors,
            }
        })
    }

    /// Expectation value ⟨ψ|O|ψ⟩.
    pub fn expectation(&self, state: &StateVector) -> Result<f64, HilbertError> {
        self.space.expect_same(state.space())?;
        let image = &self.matrix * state.amplitudes();
        Ok(state.amplitudes().dotc(&image).re)
    }

    /// Lift this observable into a larger space: it acts as-is on its own
    /// subsystems and as the identity on every other subsystem of `target`.
    pub fn embed(&self, target: &SpaceSpec) -> Result<Observable, HilbertError> {
        let matrix = embed_matrix(&self.space, &self.matrix, target)?;
        Ok(Observable {
            space: target.clone(),
            matrix,
            eigensystem: OnceLock::new(),
        })
    }

    /// Sample a projective measurement outcome by the Born rule and apply the
    /// Lüders update. The spectral projectors are trusted (they come from
    /// this observable's own decomposition), so no per-call idempotence
    /// check is run.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        state: &StateVector,
        rng: &mut R,
    ) -> Result<MeasurementOutcome, HilbertError> {
        let distribution = state.born_probabilities(self)?;
        let eig = self.eigensystem();
        let draw: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = distribution.len() - 1;
        for (k, (_, p)) in distribution.iter().enumerate() {
            acc += p;
            if draw < acc {
                chosen = k;
                break;
            }
        }
        let projected = &eig.projectors[chosen] * state.amplitudes();
        let probability = projected.norm_squared();
        if probability < crate::TOL_NULL_EVENT {
            return Err(HilbertError::NullProjection { probability });
        }
        let post_state = StateVector::normalized(state.space().clone(), projected)?;
        Ok(MeasurementOutcome {
            index: chosen,
            eigenvalue: distribution[chosen].0,
            probability,
            post_state,
        })
    }
}

/// Result of one sampled projective measurement.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    /// Index into the ascending eigenvalue list.
    pub index: usize,
    pub eigenvalue: f64,
    /// Born probability of the sampled outcome.
    pub probability: f64,
    pub post_state: StateVector,
}

/// Lift an arbitrary (not necessarily Hermitian) matrix on `op_space` into
/// `target` by tensoring with identities: the result acts as `m` on the
/// `op_space` subsystems and trivially elsewhere. The subsystems of
/// `op_space` may sit anywhere inside `target`, in any relative order, but
/// must match in dimension.
pub fn embed_matrix(
    op_space: &SpaceSpec,
    m: &CMatrix,
    target: &SpaceSpec,
) -> Result<CMatrix, HilbertError> {
    let d_op = op_space.total_dim();
    if m.nrows() != d_op || m.ncols() != d_op {
        return Err(HilbertError::DimensionMismatch {
            expected: d_op,
            found: m.nrows(),
        });
    }
    let mut op_positions = Vec::with_capacity(op_space.subsystems().len());
    for (label, dim) in op_space.subsystems() {
        let pos = target.position_of(label)?;
        if target.subsystems()[pos].1 != *dim {
            return Err(HilbertError::SpaceMismatch(format!(
                "subsystem `{label}` has dim {} in the operator space but {} in the target",
                dim,
                target.subsystems()[pos].1
            )));
        }
        op_positions.push(pos);
    }
    let rest_positions: Vec<usize> = (0..target.subsystems().len())
        .filter(|k| !op_positions.contains(k))
        .collect();

    // Flat-index offset of each op-space index inside the target space.
    let op_offsets: Vec<usize> = (0..d_op)
        .map(|a| {
            op_space
                .digits_of(a)
                .iter()
                .zip(&op_positions)
                .map(|(digit, &pos)| digit * target.stride(pos))
                .sum()
        })
        .collect();
    let rest_offsets = rest_index_offsets(target, &rest_positions);

    let d = target.total_dim();
    let mut out = CMatrix::zeros(d, d);
    for a in 0..d_op {
        for b in 0..d_op {
            let value = m[(a, b)];
            if value.norm_sqr() == 0.0 {
                continue;
            }
            for &r in &rest_offsets {
                out[(op_offsets[a] + r, op_offsets[b] + r)] = value;
            }
        }
    }
    Ok(out)
}

/// Apply a subsystem operator to full-space amplitudes without building the
/// embedded matrix: for every configuration of the untouched subsystems the
/// relevant sub-vector is gathered, multiplied, and scattered back.
pub fn apply_embedded_matrix(
    op_space: &SpaceSpec,
    m: &CMatrix,
    target: &SpaceSpec,
    amplitudes: &crate::CVector,
) -> Result<crate::CVector, HilbertError> {
    let d_op = op_space.total_dim();
    if m.nrows() != d_op || m.ncols() != d_op {
        return Err(HilbertError::DimensionMismatch {
            expected: d_op,
            found: m.nrows(),
        });
    }
    if amplitudes.len() != target.total_dim() {
        return Err(HilbertError::DimensionMismatch {
            expected: target.total_dim(),
            found: amplitudes.len(),
        });
    }
    let mut op_positions = Vec::with_capacity(op_space.subsystems().len());
    for (label, dim) in op_space.subsystems() {
        let pos = target.position_of(label)?;
        if target.subsystems()[pos].1 != *dim {
            return Err(HilbertError::SpaceMismatch(format!(
                "subsystem `{label}` has dim {} in the operator space but {} in the target",
                dim,
                target.subsystems()[pos].1
            )));
        }
        op_positions.push(pos);
    }
    let rest_positions: Vec<usize> = (0..target.subsystems().len())
        .filter(|k| !op_positions.contains(k))
        .collect();
    let op_offsets: Vec<usize> = (0..d_op)
        .map(|a| {
            op_space
                .digits_of(a)
                .iter()
                .zip(&op_positions)
                .map(|(digit, &pos)| digit * target.stride(pos))
                .sum()
        })
        .collect();
    let rest_offsets = rest_index_offsets(target, &rest_positions);

    let mut out = crate::CVector::zeros(target.total_dim());
    let mut sub = crate::CVector::zeros(d_op);
    for &r in &rest_offsets {
        for (a, &off) in op_offsets.iter().enumerate() {
            sub[a] = amplitudes[off + r];
        }
        let image = m * &sub;
        for (a, &off) in op_offsets.iter().enumerate() {
            out[off + r] = image[a];
        }
    }
    Ok(out)
}

fn rest_index_offsets(space: &SpaceSpec, positions: &[usize]) -> Vec<usize> {
    let mut result = vec![0usize];
    for &pos in positions {
        let dim = space.subsystems()[pos].1;
        let stride = space.stride(pos);
        let mut next = Vec::with_capacity(result.len() * dim);
        for &base in &result {
            for digit in 0..dim {
                next.push(base + digit * stride);
            }
        }
        result = next;
    }
    result
}

#[derive(Serialize, Deserialize)]
struct ObservableRepr {
    space: SpaceSpec,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<ObservableRepr> for Observable {
    type Error = HilbertError;

    fn try_from(repr: ObservableRepr) -> Result<Self, Self::Error> {
        let d = repr.space.total_dim();
        if repr.re.len() != d * d || repr.im.len() != d * d {
            return Err(HilbertError::DimensionMismatch {
                expected: d * d,
                found: repr.re.len(),
            });
        }
        let matrix = CMatrix::from_fn(d, d, |i, j| {
            C64::new(repr.re[i * d + j], repr.im[i * d + j])
        });
        Observable::new(repr.space, matrix)
    }
}

impl From<Observable> for ObservableRepr {
    fn from(obs: Observable) -> Self {
        let d = obs.space.total_dim();
        let mut re = Vec::with_capacity(d * d);
        let mut im = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                re.push(obs.matrix[(i, j)].re);
                im.push(obs.matrix[(i, j)].im);
            }
        }
        ObservableRepr {
            space: obs.space,
            re,
            im,
        }
    }
}
