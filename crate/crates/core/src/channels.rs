//! Quantum channels as Kraus operator sets, their Stinespring dilations onto
//! an enlarged space, and the numerical check that reduced unitary dynamics
//! on the enlarged space reproduces the channel exactly.

use thiserror::Error;

use crate::hilbert::linalg;
use crate::hilbert::{DensityOperator, HilbertError, SpaceSpec, StateVector};
use crate::{CMatrix, CVector, C64, TOL_SPECTRAL};

#[derive(Debug, Clone, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error("a channel needs at least one Kraus operator")]
    NoKrausOperators,

    #[error("Kraus completeness violated: max |ΣK†K - I| = {defect:.3e}")]
    IncompleteKraus { defect: f64 },

    #[error("dilation was built for a different channel (dims {expected} vs {found})")]
    DilationMismatch { expected: usize, found: usize },

    #[error("isometry defect |V†V - I| = {defect:.3e}")]
    NotIsometry { defect: f64 },
}

/// A completely positive trace-preserving map ρ ↦ Σ K ρ K†.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct Channel {
    space: SpaceSpec,
    kraus: Vec<CMatrix>,
}

impl Channel {
    /// Validates that ΣK†K = I within `1e-9`.
    pub fn new(space: SpaceSpec, kraus: Vec<CMatrix>) -> Result<Self, ChannelError> {
        if kraus.is_empty() {
            return Err(ChannelError::NoKrausOperators);
        }
        let d = space.total_dim();
        for k in &kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(HilbertError::DimensionMismatch {
                    expected: d,
                    found: k.nrows(),
                }
                .into());
            }
        }
        let mut sum = CMatrix::zeros(d, d);
        for k in &kraus {
            sum += k.adjoint() * k;
        }
        let defect = linalg::max_abs(&(sum - CMatrix::identity(d, d)));
        if defect > TOL_SPECTRAL {
            return Err(ChannelError::IncompleteKraus { defect });
        }
        Ok(Self { space, kraus })
    }

    /// The identity channel.
    pub fn identity(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        Self {
            space,
            kraus: vec![CMatrix::identity(d, d)],
        }
    }

    /// Fully dephasing channel in the computational basis: one projector per
    /// basis state, erasing every off-diagonal element.
    pub fn dephasing(space: SpaceSpec) -> Self {
        let d = space.total_dim();
        let kraus = (0..d)
            .map(|i| {
                let mut k = CMatrix::zeros(d, d);
                k[(i, i)] = C64::new(1.0, 0.0);
                k
            })
            .collect();
        Self { space, kraus }
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Apply the channel: Σ K ρ K†.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator, ChannelError> {
        self.space.expect_same(rho.space())?;
        let d = self.space.total_dim();
        let mut out = CMatrix::zeros(d, d);
        for k in &self.kraus {
            out += k * rho.matrix() * k.adjoint();
        }
        Ok(DensityOperator::new(self.space.clone(), out)?)
    }

    /// Lift the channel into a larger space: each Kraus operator acts as-is
    /// on this channel's subsystems and as the identity elsewhere.
    pub fn embed(&self, target: &SpaceSpec) -> Result<Channel, ChannelError> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| crate::hilbert::embed_matrix(&self.space, k, target))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Channel {
            space: target.clone(),
            kraus,
        })
    }

    /// Apply the n-fold composition of the channel.
    pub fn apply_iterated(
        &self,
        rho: &DensityOperator,
        n: usize,
    ) -> Result<DensityOperator, ChannelError> {
        let mut out = rho.clone();
        for _ in 0..n {
            out = self.apply(&out)?;
        }
        Ok(out)
    }
}

/// Stinespring dilation of a channel: an isometry V from the system into
/// system ⊗ environment with `Tr_E[VρV†] = Σ KρK†`.
///
/// Only the isometry is exposed; completing it to a unitary on the enlarged
/// space is non-unique and nothing here needs it.
#[derive(Debug, Clone)]
pub struct Dilation {
    isometry: CMatrix,
    env_dim: usize,
    env_ready_index: usize,
}

impl Dilation {
    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    /// Which environment basis state plays the role of "ready" if the
    /// isometry is ever completed to a controlled unitary.
    pub fn env_ready_index(&self) -> usize {
        self.env_ready_index
    }

    /// Apply the isometry to a pure state, appending a fresh environment
    /// factor with the given label. The environment index varies fastest:
    /// V|ψ⟩ = Σ_i (K_i|ψ⟩) ⊗ |i⟩.
    pub fn apply_to_state(
        &self,
        state: &StateVector,
        env_label: &str,
    ) -> Result<StateVector, ChannelError> {
        let d = state.space().total_dim();
        if self.isometry.ncols() != d {
            return Err(ChannelError::DilationMismatch {
                expected: self.isometry.ncols(),
                found: d,
            });
        }
        let env_space = SpaceSpec::single(env_label, self.env_dim)?;
        let space = state.space().tensor(&env_space)?;
        let amplitudes = &self.isometry * state.amplitudes();
        Ok(StateVector::new(space, amplitudes)?)
    }

    /// Apply the isometry to the *first factor* of a larger pure state whose
    /// leading subsystems form the channel's system. Used for fresh-ancilla
    /// iteration: the new environment slots in right after the system.
    pub fn apply_to_system_factor(
        &self,
        system_dim: usize,
        amplitudes: &CVector,
    ) -> Result<CVector, ChannelError> {
        if self.isometry.ncols() != system_dim {
            return Err(ChannelError::DilationMismatch {
                expected: self.isometry.ncols(),
                found: system_dim,
            });
        }
        let rest = amplitudes.len() / system_dim;
        debug_assert_eq!(system_dim * rest, amplitudes.len());
        let mut out = CVector::zeros(system_dim * self.env_dim * rest);
        for s in 0..system_dim {
            for r in 0..rest {
                let amp = amplitudes[s * rest + r];
                if amp.norm_sqr() == 0.0 {
                    continue;
                }
                for row in 0..system_dim * self.env_dim {
                    let v = self.isometry[(row, s)];
                    if v.norm_sqr() != 0.0 {
                        out[row * rest + r] += v * amp;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Canonical Stinespring dilation: V|ψ⟩ = Σ_i (K_i|ψ⟩) ⊗ |i⟩ with one
/// environment dimension per Kraus operator.
pub fn stinespring_dilate(ch: &Channel) -> Result<Dilation, ChannelError> {
    let d = ch.space.total_dim();
    let e = ch.kraus.len();
    let mut isometry = CMatrix::zeros(d * e, d);
    for (i, k) in ch.kraus.iter().enumerate() {
        for s in 0..d {
            for t in 0..d {
                isometry[(s * e + i, t)] = k[(s, t)];
            }
        }
    }
    let defect = linalg::max_abs(&(isometry.adjoint() * &isometry - CMatrix::identity(d, d)));
    if defect > TOL_SPECTRAL {
        return Err(ChannelError::NotIsometry { defect });
    }
    Ok(Dilation {
        isometry,
        env_dim: e,
        env_ready_index: 0,
    })
}

/// Maximum trace distance, over the test states, between the dilated reduced
/// dynamics Tr_E[VρV†] and the direct channel output Σ KρK†.
pub fn verify_dilation(
    ch: &Channel,
    dil: &Dilation,
    test_states: &[DensityOperator],
) -> Result<f64, ChannelError> {
    let d = ch.space.total_dim();
    if dil.isometry.ncols() != d {
        return Err(ChannelError::DilationMismatch {
            expected: dil.isometry.ncols(),
            found: d,
        });
    }
    let env_label = fresh_env_label(&ch.space, 0);
    let env_space = SpaceSpec::single(env_label.as_str(), dil.env_dim)?;
    let big_space = ch.space.tensor(&env_space)?;
    let keep: Vec<&str> = ch.space.labels().collect();

    let mut max_distance: f64 = 0.0;
    for rho in test_states {
        ch.space.expect_same(rho.space())?;
        let lifted = &dil.isometry * rho.matrix() * dil.isometry.adjoint();
        let lifted = DensityOperator::from_parts_unchecked(big_space.clone(), lifted);
        let reduced = lifted.partial_trace(&keep)?;
        let direct = ch.apply(rho)?;
        max_distance = max_distance.max(reduced.trace_distance(&direct)?);
    }
    Ok(max_distance)
}

/// An environment label not already present in `space`.
pub fn fresh_env_label(space: &SpaceSpec, index: usize) -> String {
    let mut n = index;
    loop {
        let candidate = format!("E{n}");
        if !space.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ChannelRepr {
    space: SpaceSpec,
    kraus: Vec<MatrixRepr>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MatrixRepr {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl TryFrom<ChannelRepr> for Channel {
    type Error = ChannelError;

    fn try_from(repr: ChannelRepr) -> Result<Self, Self::Error> {
        let d = repr.space.total_dim();
        let kraus = repr
            .kraus
            .into_iter()
            .map(|m| {
                if m.re.len() != d * d || m.im.len() != d * d {
                    return Err(ChannelError::Hilbert(HilbertError::DimensionMismatch {
                        expected: d * d,
                        found: m.re.len(),
                    }));
                }
                Ok(CMatrix::from_fn(d, d, |i, j| {
                    C64::new(m.re[i * d + j], m.im[i * d + j])
                }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Channel::new(repr.space, kraus)
    }
}

impl From<Channel> for ChannelRepr {
    fn from(ch: Channel) -> Self {
        let d = ch.space.total_dim();
        let kraus = ch
            .kraus
            .iter()
            .map(|k| {
                let mut re = Vec::with_capacity(d * d);
                let mut im = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        re.push(k[(i, j)].re);
                        im.push(k[(i, j)].im);
                    }
                }
                MatrixRepr { re, im }
            })
            .collect();
        ChannelRepr {
            space: ch.space,
            kraus,
        }
    }
}
