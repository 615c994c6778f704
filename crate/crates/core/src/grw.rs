//! Discrete spontaneous-localization dynamics: Poisson-timed Gaussian
//! collapse jumps in lattice position space, single stochastic trajectories,
//! and the completely positive channel the jumps induce on density
//! operators.
//!
//! Position lives on a periodic 1-D lattice per positional subsystem, with
//! distances measured around the ring. The jump factor is square-normalized,
//! `Σ_x j(x - c)² · a = 1`; on the ring this normalization is independent of
//! the center, which makes the center distribution sum to one exactly and
//! the induced Kraus set complete to machine precision. Branch-selection
//! statistics do not depend on this convention.
//!
//! A macroscopic pointer is modeled as one lattice coordinate carrying an
//! effective particle count N, so its jump rate is N/τ without simulating N
//! literal degrees of freedom. The physical constants are configurable;
//! experiments typically rescale (τ, Δ, N) so that collapse happens within
//! simulated time, while [`GrwParams::PUBLISHED_DELTA_CM`] and
//! [`GrwParams::PUBLISHED_TAU_SECONDS`] record the published magnitudes.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channels::Channel;
use crate::dynamics::{DynamicsError, Hamiltonian};
use crate::hilbert::{HilbertError, SpaceSpec, StateVector};
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Error)]
pub enum GrwError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),

    #[error("{name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },

    #[error("particle count for `{label}` must be finite and nonnegative, got {value}")]
    InvalidParticleCount { label: String, value: f64 },

    #[error("lattice for `{label}` needs at least 2 sites, got {sites}")]
    LatticeTooSmall { label: String, sites: usize },

    #[error("jump center {center} is outside the {sites}-site lattice")]
    CenterOffLattice { center: usize, sites: usize },

    #[error("subsystem `{label}` is not a positional (lattice) subsystem")]
    NotPositional { label: String },

    #[error(
        "lattice for `{label}` has {expected} sites but the state's subsystem has dim {found}"
    )]
    LatticeMismatch {
        label: String,
        expected: usize,
        found: usize,
    },

    #[error("first-order channel requires rate·dt ≤ 0.1, got {rate_dt}")]
    DtTooLarge { rate_dt: f64 },

    #[error("negative evolution time {0}")]
    NegativeTime(f64),

    #[error("jump annihilated the state; the center distribution must be inconsistent")]
    StateAnnihilated,
}

/// A periodic 1-D position lattice: `sites` points with lattice constant
/// `spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub spacing: f64,
}

impl LatticeSpec {
    /// Ring distance between two sites, in coordinate units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let raw = a.abs_diff(b);
        raw.min(self.sites - raw) as f64 * self.spacing
    }

    /// Coordinate of a site.
    pub fn coordinate(&self, site: usize) -> f64 {
        site as f64 * self.spacing
    }
}

/// Per-subsystem localization data: the effective particle count and the
/// lattice the subsystem's basis indexes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrwSubsystem {
    pub particles: f64,
    pub lattice: LatticeSpec,
}

/// The localization constants Δ and τ plus the positional subsystems they
/// act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GrwParamsRepr", into = "GrwParamsRepr")]
pub struct GrwParams {
    delta: f64,
    tau: f64,
    subsystems: BTreeMap<String, GrwSubsystem>,
}

impl GrwParams {
    /// Published magnitude of the localization width, in centimeters.
    pub const PUBLISHED_DELTA_CM: f64 = 1e-5;
    /// Published magnitude of the per-particle mean time between jumps, in
    /// seconds.
    pub const PUBLISHED_TAU_SECONDS: f64 = 1e15;

    pub fn new(delta: f64, tau: f64) -> Result<Self, GrwError> {
        if delta <= 0.0 || !delta.is_finite() {
            return Err(GrwError::NonPositiveConstant {
                name: "delta",
                value: delta,
            });
        }
        if tau <= 0.0 || !tau.is_finite() {
            return Err(GrwError::NonPositiveConstant {
                name: "tau",
                value: tau,
            });
        }
        Ok(Self {
            delta,
            tau,
            subsystems: BTreeMap::new(),
        })
    }

    /// Register a positional subsystem carrying `particles` effective
    /// wavefunction arguments.
    pub fn with_subsystem(
        mut self,
        label: impl Into<String>,
        particles: f64,
        lattice: LatticeSpec,
    ) -> Result<Self, GrwError> {
        let label = label.into();
        if particles < 0.0 || !particles.is_finite() {
            return Err(GrwError::InvalidParticleCount {
                label,
                value: particles,
            });
        }
        if lattice.sites < 2 {
            return Err(GrwError::LatticeTooSmall {
                label,
                sites: lattice.sites,
            });
        }
        if lattice.spacing <= 0.0 || !lattice.spacing.is_finite() {
            return Err(GrwError::NonPositiveConstant {
                name: "lattice spacing",
                value: lattice.spacing,
            });
        }
        self.subsystems
            .insert(label, GrwSubsystem { particles, lattice });
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn subsystems(&self) -> &BTreeMap<String, GrwSubsystem> {
        &self.subsystems
    }

    pub fn lattice_of(&self, label: &str) -> Result<LatticeSpec, GrwError> {
        self.subsystems
            .get(label)
            .map(|s| s.lattice)
            .ok_or_else(|| GrwError::NotPositional {
                label: label.to_string(),
            })
    }

    pub fn total_particles(&self) -> f64 {
        self.subsystems.values().map(|s| s.particles).sum()
    }

    /// Replace one subsystem's particle count, keeping its lattice.
    pub fn with_particles(mut self, label: &str, particles: f64) -> Result<Self, GrwError> {
        let sub = self
            .subsystems
            .get_mut(label)
            .ok_or_else(|| GrwError::NotPositional {
                label: label.to_string(),
            })?;
        if particles < 0.0 || !particles.is_finite() {
            return Err(GrwError::InvalidParticleCount {
                label: label.to_string(),
                value: particles,
            });
        }
        sub.particles = particles;
        Ok(self)
    }
}

/// Total jump rate (ΣN)/τ. State-independent: only the number of
/// wavefunction arguments enters.
pub fn total_jump_rate(params: &GrwParams) -> f64 {
    params.total_particles() / params.tau()
}

/// The Gaussian factor by site offset: `profile[k]` is the (normalized)
/// value at ring distance `min(k, M-k)·a` from the center. Every
/// center-specific factor is a rotation of this profile, so it is computed
/// once per jump rather than once per candidate center.
fn ring_profile(lattice: &LatticeSpec, delta: f64) -> Result<Vec<f64>, GrwError> {
    if delta <= 0.0 || delta.is_nan() {
        return Err(GrwError::NonPositiveConstant {
            name: "delta",
            value: delta,
        });
    }
    let mut profile: Vec<f64> = (0..lattice.sites)
        .map(|k| {
            let d = lattice.distance(k, 0);
            (-d * d / (2.0 * delta * delta)).exp()
        })
        .collect();
    let norm_sq: f64 = profile.iter().map(|j| j * j).sum::<f64>() * lattice.spacing;
    let k = 1.0 / norm_sq.sqrt();
    for j in &mut profile {
        *j *= k;
    }
    Ok(profile)
}

/// The diagonal localization factor centered on `center_site`: entries
/// `K exp(-d(x, c)²/2Δ²)` over the lattice sites, square-normalized so that
/// `Σ_x j(x)² a = 1`.
pub fn localization_factor(
    lattice: &LatticeSpec,
    delta: f64,
    center_site: usize,
) -> Result<Vec<f64>, GrwError> {
    if center_site >= lattice.sites {
        return Err(GrwError::CenterOffLattice {
            center: center_site,
            sites: lattice.sites,
        });
    }
    let profile = ring_profile(lattice, delta)?;
    Ok((0..lattice.sites)
        .map(|site| profile[(site + lattice.sites - center_site) % lattice.sites])
        .collect())
}

/// Probability of each candidate jump center for a jump on the given
/// subsystem: `w_c = a · ‖J_c ψ‖²`, which on the periodic lattice sums to
/// one exactly. Since the factor is diagonal in position, the weights reduce
/// to a convolution of the factor squared with the position marginal.
pub fn jump_center_distribution(
    state: &StateVector,
    subsystem: &str,
    params: &GrwParams,
) -> Result<Vec<f64>, GrwError> {
    let lattice = params.lattice_of(subsystem)?;
    let found = state.space().dim_of(subsystem)?;
    if found != lattice.sites {
        return Err(GrwError::LatticeMismatch {
            label: subsystem.to_string(),
            expected: lattice.sites,
            found,
        });
    }
    let marginal = state.marginal_probabilities(subsystem)?;
    let profile = ring_profile(&lattice, params.delta())?;
    weights_from_profile(&profile, &marginal, lattice.spacing)
}

fn weights_from_profile(
    profile: &[f64],
    marginal: &[f64],
    spacing: f64,
) -> Result<Vec<f64>, GrwError> {
    let m = profile.len();
    let mut weights = Vec::with_capacity(m);
    for center in 0..m {
        let mut w = 0.0;
        for (site, mass) in marginal.iter().enumerate() {
            if *mass > 0.0 {
                let j = profile[(site + m - center) % m];
                w += j * j * mass;
            }
        }
        weights.push(w * spacing);
    }
    Ok(weights)
}

/// One localization jump on the (already sampled) subsystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Trajectory time of the jump.
    #[serde(rename = "t")]
    pub time: f64,
    /// Which positional subsystem jumped.
    pub subsystem: String,
    /// Sampled center coordinate.
    pub center: f64,
    /// Sampled center as a lattice site index.
    pub center_site: usize,
    /// Probability density (per coordinate unit) of the sampled center just
    /// before the jump.
    pub pre_jump_prob_density: f64,
    /// Position marginal of the jumped subsystem just before the jump.
    pub branch_weights: Vec<f64>,
}

/// Sample a jump center by the collapsed-norm rule, multiply the state by
/// the localization factor on that subsystem, and renormalize.
pub fn apply_jump<R: Rng + ?Sized>(
    state: &StateVector,
    subsystem: &str,
    params: &GrwParams,
    rng: &mut R,
) -> Result<(StateVector, JumpEvent), GrwError> {
    let lattice = params.lattice_of(subsystem)?;
    let found = state.space().dim_of(subsystem)?;
    if found != lattice.sites {
        return Err(GrwError::LatticeMismatch {
            label: subsystem.to_string(),
            expected: lattice.sites,
            found,
        });
    }
    let branch_weights = state.marginal_probabilities(subsystem)?;
    let profile = ring_profile(&lattice, params.delta())?;
    let weights = weights_from_profile(&profile, &branch_weights, lattice.spacing)?;

    let draw: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut center_site = weights.len() - 1;
    for (c, w) in weights.iter().enumerate() {
        acc += w;
        if draw < acc {
            center_site = c;
            break;
        }
    }

    let pos = state.space().position_of(subsystem)?;
    let stride = state.space().stride(pos);
    let dim = lattice.sites;
    let mut amplitudes = state.amplitudes().clone();
    for (idx, amp) in amplitudes.iter_mut().enumerate() {
        *amp *= C64::new(
            profile[((idx / stride) % dim + dim - center_site) % dim],
            0.0,
        );
    }
    let new_state = StateVector::normalized(state.space().clone(), amplitudes)
        .map_err(|_| GrwError::StateAnnihilated)?;

    let event = JumpEvent {
        time: 0.0,
        subsystem: subsystem.to_string(),
        center: lattice.coordinate(center_site),
        center_site,
        pre_jump_prob_density: weights[center_site] / lattice.spacing,
        branch_weights,
    };
    Ok((new_state, event))
}

/// A single stochastic realization: jump events interleaved with unitary
/// segments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    /// Seed of the stream that produced this trajectory.
    pub seed: u64,
    /// Segment boundaries: 0, each jump time, and the final time.
    pub times: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    pub final_state: StateVector,
}

impl Trajectory {
    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }
}

/// Evolve under Schrödinger dynamics punctuated by localization jumps at
/// exponentially distributed waiting times of rate (ΣN)/τ. At each jump the
/// subsystem is chosen with probability N_label/ΣN.
///
/// The trajectory derives its own random stream from `seed`, so a
/// `(initial state, parameters, seed)` triple fully determines the outcome.
pub fn evolve_grw(
    state: &StateVector,
    h: Option<&Hamiltonian>,
    params: &GrwParams,
    t_total: f64,
    seed: u64,
) -> Result<Trajectory, GrwError> {
    let mut rng = crate::rng::derived_stream(seed, 0);
    evolve_grw_with_rng(state, h, params, t_total, &mut rng, seed)
}

/// [`evolve_grw`] driven by an external stream; `seed_tag` is recorded in
/// the trajectory for bookkeeping.
pub fn evolve_grw_with_rng<R: Rng + ?Sized>(
    state: &StateVector,
    h: Option<&Hamiltonian>,
    params: &GrwParams,
    t_total: f64,
    rng: &mut R,
    seed_tag: u64,
) -> Result<Trajectory, GrwError> {
    if t_total < 0.0 || !t_total.is_finite() {
        return Err(GrwError::NegativeTime(t_total));
    }
    if let Some(h) = h {
        h.space().expect_same(state.space())?;
    }
    // Partial rates per label; only labels present with N > 0 can jump.
    let mut jumpy: Vec<(&str, f64)> = Vec::new();
    for (label, sub) in params.subsystems() {
        if sub.particles > 0.0 {
            let found = state.space().dim_of(label)?;
            if found != sub.lattice.sites {
                return Err(GrwError::LatticeMismatch {
                    label: label.clone(),
                    expected: sub.lattice.sites,
                    found,
                });
            }
            jumpy.push((label.as_str(), sub.particles));
        }
    }
    let total_n: f64 = jumpy.iter().map(|(_, n)| n).sum();
    let rate = total_n / params.tau();

    let mut current = state.clone();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let mut jumps = Vec::new();

    let waiting = if rate > 0.0 {
        Some(Exp::new(rate).expect("positive rate"))
    } else {
        None
    };
    loop {
        let wait = match &waiting {
            Some(dist) => {
                let mut w = dist.sample(rng);
                while w <= 0.0 {
                    w = dist.sample(rng);
                }
                w
            }
            None => f64::INFINITY,
        };
        if t + wait >= t_total {
            let remaining = t_total - t;
            if let Some(h) = h {
                if remaining > 0.0 {
                    current = h.evolve(&current, remaining)?;
                }
            }
            times.push(t_total);
            break;
        }
        if let Some(h) = h {
            current = h.evolve(&current, wait)?;
        }
        t += wait;

        // Pick the jumping subsystem proportionally to its particle count.
        let draw: f64 = rng.random::<f64>() * total_n;
        let mut acc = 0.0;
        let mut chosen = jumpy.len() - 1;
        for (k, (_, n)) in jumpy.iter().enumerate() {
            acc += n;
            if draw < acc {
                chosen = k;
                break;
            }
        }
        let (next, mut event) = apply_jump(&current, jumpy[chosen].0, params, rng)?;
        event.time = t;
        times.push(t);
        jumps.push(event);
        current = next;
    }

    Ok(Trajectory {
        seed: seed_tag,
        times,
        jumps,
        final_state: current,
    })
}

/// First-order localization channel over a time step dt: the no-jump Kraus
/// operator `√(1-p)·I` plus one jump Kraus operator
/// `√(p · N_s/ΣN · a) · Ĵ_c` per positional subsystem s and center c, where
/// p = rate·dt. Requires rate·dt ≤ 0.1.
pub fn grw_channel(params: &GrwParams, dt: f64, space: &SpaceSpec) -> Result<Channel, GrwError> {
    if dt < 0.0 || !dt.is_finite() {
        return Err(GrwError::NegativeTime(dt));
    }
    let rate = total_jump_rate(params);
    let p = rate * dt;
    if p > 0.1 {
        return Err(GrwError::DtTooLarge { rate_dt: p });
    }
    let d = space.total_dim();
    let mut kraus = vec![CMatrix::identity(d, d).scale((1.0 - p).sqrt())];
    if p > 0.0 {
        let total_n = params.total_particles();
        for (label, sub) in params.subsystems() {
            if sub.particles <= 0.0 {
                continue;
            }
            let found = space.dim_of(label)?;
            if found != sub.lattice.sites {
                return Err(GrwError::LatticeMismatch {
                    label: label.clone(),
                    expected: sub.lattice.sites,
                    found,
                });
            }
            let pos = space.position_of(label)?;
            let stride = space.stride(pos);
            let weight = sub.particles / total_n;
            let scale = (p * weight * sub.lattice.spacing).sqrt();
            for center in 0..sub.lattice.sites {
                let factor = localization_factor(&sub.lattice, params.delta(), center)?;
                let mut k = CMatrix::zeros(d, d);
                for i in 0..d {
                    k[(i, i)] = C64::new(scale * factor[(i / stride) % sub.lattice.sites], 0.0);
                }
                kraus.push(k);
            }
        }
    }
    let kraus = if kraus.len() == 1 {
        vec![CMatrix::identity(d, d)]
    } else {
        kraus
    };
    Channel::new(space.clone(), kraus).map_err(|e| match e {
        crate::channels::ChannelError::Hilbert(h) => GrwError::Hilbert(h),
        other => panic!("ring normalization should keep the Kraus set complete: {other}"),
    })
}

#[derive(Serialize, Deserialize)]
struct GrwParamsRepr {
    delta: f64,
    tau: f64,
    subsystems: BTreeMap<String, GrwSubsystem>,
}

impl TryFrom<GrwParamsRepr> for GrwParams {
    type Error = GrwError;

    fn try_from(repr: GrwParamsRepr) -> Result<Self, Self::Error> {
        let mut params = GrwParams::new(repr.delta, repr.tau)?;
        for (label, sub) in repr.subsystems {
            params = params.with_subsystem(label, sub.particles, sub.lattice)?;
        }
        Ok(params)
    }
}

impl From<GrwParams> for GrwParamsRepr {
    fn from(p: GrwParams) -> Self {
        GrwParamsRepr {
            delta: p.delta,
            tau: p.tau,
            subsystems: p.subsystems,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::DensityOperator;
    use crate::CVector;

    fn lattice(sites: usize, spacing: f64) -> LatticeSpec {
        LatticeSpec { sites, spacing }
    }

    /// Equal two-branch superposition at the given sites.
    fn two_branch(space: &SpaceSpec, a: usize, b: usize, wa: f64, wb: f64) -> StateVector {
        let mut amps = CVector::zeros(space.total_dim());
        amps[a] = C64::new(wa, 0.0);
        amps[b] = C64::new(wb, 0.0);
        StateVector::normalized(space.clone(), amps).unwrap()
    }

    #[test]
    fn rate_law_paper_constants() {
        let params = GrwParams::new(1.0, 1e15)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(4, 1.0))
            .unwrap();
        assert_eq!(total_jump_rate(&params), 1e-15);

        let macroscopic = params.with_particles("Q", 1e23).unwrap();
        assert!((total_jump_rate(&macroscopic) - 1e8).abs() / 1e8 < 1e-12);
    }

    #[test]
    fn rate_zero_without_particles() {
        let params = GrwParams::new(1.0, 10.0)
            .unwrap()
            .with_subsystem("Q", 0.0, lattice(4, 1.0))
            .unwrap();
        assert_eq!(total_jump_rate(&params), 0.0);
    }

    #[test]
    fn micro_regime_jump_probability_is_negligible() {
        // With the published constants and N ≤ 10, the chance of any jump in
        // one second is below 1e-13; evaluated from the rate law directly.
        let params = GrwParams::new(
            GrwParams::PUBLISHED_DELTA_CM,
            GrwParams::PUBLISHED_TAU_SECONDS,
        )
        .unwrap()
        .with_subsystem("Q", 10.0, lattice(16, 1e-5))
        .unwrap();
        let rate = total_jump_rate(&params);
        let p_jump = 1.0 - (-rate * 1.0).exp();
        assert!(p_jump < 1e-13, "p = {p_jump}");
    }

    #[test]
    fn localization_factor_gaussian_shape() {
        // Spacing Δ/2: site at distance exactly Δ exists two sites away.
        let delta = 1.0;
        let lat = lattice(33, 0.5);
        let factor = localization_factor(&lat, delta, 16).unwrap();
        let peak = factor[16];
        assert!(factor.iter().all(|&j| j <= peak));
        assert!((factor[18] / peak - (-0.5_f64).exp()).abs() < 1e-12);
        assert!((factor[14] / peak - (-0.5_f64).exp()).abs() < 1e-12);
        // Square normalization over the lattice.
        let norm: f64 = factor.iter().map(|j| j * j).sum::<f64>() * lat.spacing;
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn localization_factor_flat_limit() {
        let lat = lattice(8, 1.0);
        let factor = localization_factor(&lat, 1e9, 3).unwrap();
        let (min, max) = factor
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &j| {
                (lo.min(j), hi.max(j))
            });
        assert!((max - min) / max < 1e-12);
    }

    #[test]
    fn center_off_lattice_rejected() {
        let lat = lattice(8, 1.0);
        assert!(matches!(
            localization_factor(&lat, 1.0, 8),
            Err(GrwError::CenterOffLattice { .. })
        ));
    }

    #[test]
    fn center_distribution_matches_matrix_oracle() {
        // Independent route: build the embedded localization operator as a
        // full matrix and take ‖J_c ψ‖² directly.
        let space = SpaceSpec::new([("P", 2), ("Q", 8)]).unwrap();
        let params = GrwParams::new(0.7, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(8, 0.9))
            .unwrap();
        let mut rng = crate::rng::derived_stream(31, 0);
        let psi = crate::random::random_state(&space, &mut rng);
        let weights = jump_center_distribution(&psi, "Q", &params).unwrap();

        let lat = params.lattice_of("Q").unwrap();
        let q_space = SpaceSpec::single("Q", 8).unwrap();
        for (c, weight) in weights.iter().enumerate() {
            let factor = localization_factor(&lat, 0.7, c).unwrap();
            let j_c = CMatrix::from_fn(8, 8, |i, j| {
                if i == j {
                    C64::new(factor[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            });
            let lifted = crate::hilbert::embed_matrix(&q_space, &j_c, &space).unwrap();
            let image = &lifted * psi.amplitudes();
            let oracle = image.norm_squared() * lat.spacing;
            assert!((weight - oracle).abs() < 1e-12);
        }
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn center_distribution_peaked_when_localized() {
        let space = SpaceSpec::single("Q", 16).unwrap();
        // Δ much smaller than the spacing: a collapsed state keeps its site.
        let params = GrwParams::new(0.05, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(16, 1.0))
            .unwrap();
        let psi = StateVector::basis_state(space, 5).unwrap();
        let weights = jump_center_distribution(&psi, "Q", &params).unwrap();
        assert!(weights[5] > 0.999);
    }

    #[test]
    fn center_distribution_splits_between_far_branches() {
        let space = SpaceSpec::single("Q", 32).unwrap();
        let params = GrwParams::new(0.5, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(32, 4.0))
            .unwrap();
        let psi = two_branch(&space, 4, 20, 1.0, 1.0);
        let weights = jump_center_distribution(&psi, "Q", &params).unwrap();
        // Mass within 3 sites of each branch site.
        let near = |c0: usize| -> f64 {
            weights
                .iter()
                .enumerate()
                .filter(|(c, _)| c.abs_diff(c0).min(32 - c.abs_diff(c0)) <= 3)
                .map(|(_, w)| w)
                .sum()
        };
        assert!((near(4) - 0.5).abs() < 1e-10);
        assert!((near(20) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn center_distribution_flat_for_huge_delta() {
        let space = SpaceSpec::single("Q", 8).unwrap();
        let params = GrwParams::new(1e7, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(8, 1.0))
            .unwrap();
        let mut rng = crate::rng::derived_stream(31, 1);
        let psi = crate::random::random_state(&space, &mut rng);
        let weights = jump_center_distribution(&psi, "Q", &params).unwrap();
        for w in &weights {
            assert!((w - 0.125).abs() < 1e-9);
        }
    }

    #[test]
    fn jump_kills_the_far_branch() {
        let space = SpaceSpec::single("Q", 16).unwrap();
        // Branch separation 8 sites · 1.0 spacing = 8Δ at Δ = 1.
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(16, 1.0))
            .unwrap();
        let psi = two_branch(&space, 2, 10, 1.0, 1.0);
        let mut rng = crate::rng::derived_stream(31, 2);
        let (post, event) = apply_jump(&psi, "Q", &params, &mut rng).unwrap();
        let marginal = post.marginal_probabilities("Q").unwrap();
        // Relative amplitude beyond 5Δ of the sampled center is below 1e-4.
        for (site, mass) in marginal.iter().enumerate() {
            if params
                .lattice_of("Q")
                .unwrap()
                .distance(site, event.center_site)
                > 5.0
            {
                assert!(mass.sqrt() < 1e-4);
            }
        }
    }

    #[test]
    fn jump_preserves_already_localized_state() {
        let space = SpaceSpec::single("Q", 16).unwrap();
        // Wavepacket over two adjacent sites, Δ much larger than its width.
        let params = GrwParams::new(500.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(16, 1.0))
            .unwrap();
        let psi = two_branch(&space, 7, 8, 1.0, 1.0);
        let mut rng = crate::rng::derived_stream(31, 3);
        let (post, _) = apply_jump(&psi, "Q", &params, &mut rng).unwrap();
        assert!(post.fidelity(&psi).unwrap() > 1.0 - 1e-9);
    }

    #[test]
    fn branch_selection_follows_squared_amplitudes() {
        let space = SpaceSpec::single("Q", 16).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(16, 6.0))
            .unwrap();
        let (wa, wb) = (0.6, 0.8);
        let psi = two_branch(&space, 3, 11, wa, wb);
        let trials = 10_000;
        let mut hits_a = 0u64;
        let mut rng = crate::rng::derived_stream(31, 4);
        for _ in 0..trials {
            let (post, _) = apply_jump(&psi, "Q", &params, &mut rng).unwrap();
            let marginal = post.marginal_probabilities("Q").unwrap();
            if marginal[3] > 0.5 {
                hits_a += 1;
            }
        }
        let est = crate::stats::Estimate::binomial(hits_a, trials);
        assert!(
            est.within_sigma(wa * wa, 3.0),
            "branch frequency {} ± {} vs {}",
            est.value,
            est.stderr,
            wa * wa
        );
    }

    #[test]
    fn zero_rate_evolution_is_pure_schrodinger() {
        let space = SpaceSpec::new([("P", 2), ("Q", 4)]).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 0.0, lattice(4, 1.0))
            .unwrap();
        let mut rng = crate::rng::derived_stream(31, 5);
        let h = Hamiltonian::new(
            space.clone(),
            crate::random::random_hermitian(space.total_dim(), &mut rng),
        )
        .unwrap();
        let psi = crate::random::random_state(&space, &mut rng);
        let trajectory = evolve_grw(&psi, Some(&h), &params, 2.5, 99).unwrap();
        assert_eq!(trajectory.jump_count(), 0);
        let direct = h.evolve(&psi, 2.5).unwrap();
        assert!(trajectory.final_state.fidelity(&direct).unwrap() > 1.0 - 1e-10);
    }

    #[test]
    fn trajectory_states_stay_normalized_and_times_increase() {
        let space = SpaceSpec::single("Q", 8).unwrap();
        let params = GrwParams::new(1.0, 0.25)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(8, 3.0))
            .unwrap();
        let psi = two_branch(&space, 1, 5, 1.0, 1.0);
        for seed in 0..20 {
            let trajectory = evolve_grw(&psi, None, &params, 5.0, seed).unwrap();
            assert!((trajectory.final_state.norm() - 1.0).abs() < 1e-10);
            for pair in trajectory.times.windows(2) {
                assert!(pair[1] > pair[0] || (pair[0] == 0.0 && pair[1] == 0.0));
            }
        }
    }

    #[test]
    fn jump_gaps_are_exponential() {
        // One long trajectory; inter-jump gaps are complete exponential
        // samples (only the final, censored gap is unobserved).
        let space = SpaceSpec::single("Q", 4).unwrap();
        let params = GrwParams::new(2.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(4, 1.0))
            .unwrap();
        let psi = StateVector::basis_state(space, 0).unwrap();
        let rate = total_jump_rate(&params);
        let trajectory = evolve_grw(&psi, None, &params, 10_500.0, 17).unwrap();
        assert!(trajectory.jump_count() >= 10_000);
        let gaps: Vec<f64> = trajectory
            .jumps
            .windows(2)
            .map(|pair| pair[1].time - pair[0].time)
            .collect();
        let p = crate::stats::ks_exponential_pvalue(&gaps, rate);
        assert!(p > 0.001, "exponential GOF p = {p}");
    }

    #[test]
    fn jump_counts_are_poisson() {
        let space = SpaceSpec::single("Q", 4).unwrap();
        let params = GrwParams::new(2.0, 0.5)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(4, 1.0))
            .unwrap();
        let psi = StateVector::basis_state(space, 0).unwrap();
        let lambda = total_jump_rate(&params) * 1.5;
        let counts: Vec<u64> = (0..4000)
            .map(|seed| {
                evolve_grw(&psi, None, &params, 1.5, seed)
                    .unwrap()
                    .jump_count() as u64
            })
            .collect();
        let p = crate::stats::poisson_chi_square_pvalue(&counts, lambda);
        assert!(p > 0.001, "Poisson GOF p = {p}");
    }

    #[test]
    fn channel_with_zero_rate_is_identity() {
        let space = SpaceSpec::single("Q", 4).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 0.0, lattice(4, 1.0))
            .unwrap();
        let ch = grw_channel(&params, 0.05, &space).unwrap();
        assert_eq!(ch.kraus().len(), 1);
    }

    #[test]
    fn channel_kraus_count_is_sites_plus_one() {
        let space = SpaceSpec::single("Q", 12).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(12, 2.0))
            .unwrap();
        let ch = grw_channel(&params, 0.05, &space).unwrap();
        assert_eq!(ch.kraus().len(), 13);
    }

    #[test]
    fn channel_rejects_large_steps() {
        let space = SpaceSpec::single("Q", 4).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(4, 1.0))
            .unwrap();
        assert!(matches!(
            grw_channel(&params, 0.2, &space),
            Err(GrwError::DtTooLarge { .. })
        ));
    }

    #[test]
    fn channel_fixes_localized_states() {
        let space = SpaceSpec::single("Q", 8).unwrap();
        // Δ far above the wavepacket width (two adjacent sites).
        let params = GrwParams::new(1000.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(8, 1.0))
            .unwrap();
        let psi = two_branch(&space, 3, 4, 1.0, 1.0);
        let rho = psi.density();
        let ch = grw_channel(&params, 0.08, &space).unwrap();
        let out = ch.apply(&rho).unwrap();
        assert!(out.trace_distance(&rho).unwrap() < 1e-6);
    }

    #[test]
    fn channel_decay_factor_matches_overlap_formula() {
        // Off-diagonal elements shrink by 1 - p(1 - G(x,y)), with G the
        // square-normalized Gaussian overlap summed over centers.
        let space = SpaceSpec::single("Q", 16).unwrap();
        let delta = 1.3;
        let lat = lattice(16, 1.0);
        let params = GrwParams::new(delta, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lat)
            .unwrap();
        let dt = 0.09;
        let p = total_jump_rate(&params) * dt;
        let (x, y) = (2usize, 9usize);
        let psi = two_branch(&space, x, y, 1.0, 1.0);
        let ch = grw_channel(&params, dt, &space).unwrap();
        let out = ch.apply(&psi.density()).unwrap();

        let mut overlap = 0.0;
        for c in 0..16 {
            let factor = localization_factor(&lat, delta, c).unwrap();
            overlap += factor[x] * factor[y] * lat.spacing;
        }
        let expected = 0.5 * ((1.0 - p) + p * overlap);
        assert!((out.matrix()[(x, y)].re - expected).abs() < 1e-12);
        // Diagonal untouched for a symmetric two-branch state.
        assert!((out.matrix()[(x, x)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn channel_matches_trajectory_average() {
        let space = SpaceSpec::single("Q", 8).unwrap();
        let params = GrwParams::new(1.0, 1.0)
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(8, 2.5))
            .unwrap();
        let dt = 0.05;
        let psi = two_branch(&space, 1, 5, 0.6, 0.8);
        let ch = grw_channel(&params, dt, &space).unwrap();
        let direct = ch.apply(&psi.density()).unwrap();

        let n = 10_000;
        let d = space.total_dim();
        let mut mean = CMatrix::zeros(d, d);
        let mut samples = Vec::with_capacity(n as usize);
        for seed in 0..n {
            let tr = evolve_grw(&psi, None, &params, dt, seed).unwrap();
            let rho = tr.final_state.density();
            mean += rho.matrix();
            samples.push(rho);
        }
        mean.unscale_mut(n as f64);
        let averaged = DensityOperator::new(space, mean).unwrap();
        let distance = averaged.trace_distance(&direct).unwrap();

        // Standard error of the mean under the trace-distance metric.
        let spread: f64 = samples
            .iter()
            .map(|r| r.trace_distance(&averaged).unwrap().powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        let mc_error = (spread / n as f64).sqrt();
        assert!(
            distance <= 3.0 * mc_error + 2e-3,
            "trace distance {distance} vs MC error {mc_error}"
        );
    }

    #[test]
    fn params_json_round_trip() {
        let params = GrwParams::new(0.5, 2.0)
            .unwrap()
            .with_subsystem("A", 3.0, lattice(8, 1.5))
            .unwrap()
            .with_subsystem("Q", 1.0, lattice(4, 0.5))
            .unwrap();
        let json = serde_json::to_string(&params).unwrap();
        let back: GrwParams = serde_json::from_str(&json).unwrap();
        assert_eq!(params, back);
    }
}
