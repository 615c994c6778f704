//! An observer-in-the-box interference experiment, end to end.
//!
//! A spin-half system `P` is measured by an observer `A` whose memory is a
//! macroscopic pointer coordinate: after the measurement interaction the
//! joint state is `α|+z⟩|see up⟩ + β|−z⟩|see down⟩`. A second, nondemolition
//! observable Ô on `P+A` has exactly that superposition as its +1
//! eigenstate, so its statistics are maximally sensitive to whether the
//! superposition survived:
//!
//! * under purely unitary dynamics, Ô = +1 with certainty;
//! * under localization jumps, the pointer collapses to one branch during
//!   the measurement and Ô = +1 only with the branch-conditional
//!   probability;
//! * under decoherence against an inaccessible environment, the `P+A`
//!   statistics equal the collapsed ones, while the corresponding verifier
//!   on `P+A+E` still returns +1 with certainty.
//!
//! The experiment runner samples trials under a chosen regime, reports the
//! Ô statistics with their analytic reference values, and supports one
//! nesting level: recording the Ô outcome in a further register `B` and
//! verifying the resulting `P+A+B` state with an Ô₂ observable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, Coupling, DecoherenceSpec, DynamicsError};
use crate::grw::{self, GrwError, GrwParams, LatticeSpec};
use crate::hilbert::linalg;
use crate::hilbert::{
    apply_embedded_matrix, commutator_norm, embed_matrix, Eigensystem, HilbertError, Observable,
    SpaceSpec, StateVector,
};
use crate::stats::Estimate;
use crate::{CMatrix, CVector, C64, TOL_STRUCTURAL};

/// Spin subsystem label.
pub const LABEL_SPIN: &str = "P";
/// Observer-memory pointer label.
pub const LABEL_MEMORY: &str = "A";
/// Record register label (communication target / Ô-outcome record).
pub const LABEL_RECORD: &str = "B";
/// Environment label for the decoherence regime.
pub const LABEL_ENV: &str = "E";

/// Pointer site representing "see down" (also the ready site).
pub const SEE_DOWN_SITE: usize = 0;
/// Pointer site representing "see up".
pub const SEE_UP_SITE: usize = 1;

/// Expected number of localization jumps during one measurement hold; the
/// no-collapse probability e^-20 ≈ 2e-9 is far below the 1e-6 budget.
const HOLD_JUMP_EXPECTATION: f64 = 20.0;

#[derive(Debug, Clone, Error)]
pub enum WignerError {
    #[error(transparent)]
    Hilbert(#[from] HilbertError),

    #[error(transparent)]
    Dynamics(#[from] DynamicsError),

    #[error(transparent)]
    Grw(#[from] GrwError),

    #[error("|alpha|² + |beta|² = {0}, expected 1")]
    AmplitudesNotNormalized(f64),

    #[error("alpha and beta must both be nonzero; the verifier observable degenerates otherwise")]
    DegenerateObservable,

    #[error("branch separation {0}Δ is below the 5Δ needed for single-jump distinguishability")]
    SeparationTooSmall(f64),

    #[error("pointer needs at least 2 sites, got {0}")]
    PointerTooSmall(usize),

    #[error("localization parameters carry no `{LABEL_MEMORY}` subsystem for the pointer")]
    MissingPointerParams,

    #[error("at least one trial is required")]
    ZeroTrials,

    #[error("expected a state on exactly {{P, A, B}}, got {0:?}")]
    NotPostRecordSpace(Vec<String>),

    #[error("the nested-verifier experiment supports the unitary and grw regimes only")]
    UnsupportedRegime,
}

/// Which dynamics governs the spin measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// No collapse: the measurement is the bare entangling unitary.
    Unitary,
    /// Localization jumps collapse the pointer during the measurement.
    Grw,
    /// The pointer decoheres against an environment register; no collapse.
    Decoherence,
}

/// Full experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerConfig {
    pub alpha: C64,
    pub beta: C64,
    /// Lattice size of the observer's memory pointer.
    pub pointer_sites: usize,
    /// Distance between the "see up" and "see down" sites, in units of Δ.
    pub branch_separation: f64,
    /// Localization constants; must register the pointer under label `A`.
    /// The pointer's lattice geometry is derived from `pointer_sites` and
    /// `branch_separation` and overrides whatever the entry carries.
    pub grw: GrwParams,
    pub regime: Regime,
    pub n_trials: u64,
    pub master_seed: u64,
    /// Record the observer's memory into register `B` before the Ô
    /// measurement (the "tell an outside observer" variant).
    pub communicate_to_b: bool,
    /// Effective particle count of the Ô-outcome record register; 0 keeps
    /// the record microscopic so recording cannot itself trigger collapse.
    pub o_record_particles: f64,
}

impl WignerConfig {
    /// A config with the default geometry: 16 pointer sites separated by
    /// 6Δ, Δ = τ = 1, pointer particle count 50.
    pub fn new(alpha: C64, beta: C64, regime: Regime, n_trials: u64, master_seed: u64) -> Self {
        let grw = GrwParams::new(1.0, 1.0)
            .expect("positive constants")
            .with_subsystem(
                LABEL_MEMORY,
                50.0,
                LatticeSpec {
                    sites: 16,
                    spacing: 6.0,
                },
            )
            .expect("valid subsystem");
        Self {
            alpha,
            beta,
            pointer_sites: 16,
            branch_separation: 6.0,
            grw,
            regime,
            n_trials,
            master_seed,
            communicate_to_b: false,
            o_record_particles: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), WignerError> {
        let norm = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if (norm - 1.0).abs() > TOL_STRUCTURAL {
            return Err(WignerError::AmplitudesNotNormalized(norm));
        }
        if self.pointer_sites < 2 {
            return Err(WignerError::PointerTooSmall(self.pointer_sites));
        }
        if self.branch_separation < 5.0 {
            return Err(WignerError::SeparationTooSmall(self.branch_separation));
        }
        if !self.grw.subsystems().contains_key(LABEL_MEMORY) {
            return Err(WignerError::MissingPointerParams);
        }
        Ok(())
    }

    /// |α|⁴ + |β|⁴: the Ô = +1 probability on the branch mixture.
    pub fn mixture_value(&self) -> f64 {
        self.alpha.norm_sqr().powi(2) + self.beta.norm_sqr().powi(2)
    }

    /// Localization parameters with the pointer lattice geometry derived
    /// from this config (and the record register, when massive).
    pub fn effective_grw(&self) -> Result<GrwParams, WignerError> {
        let lattice = LatticeSpec {
            sites: self.pointer_sites,
            spacing: self.branch_separation * self.grw.delta(),
        };
        let pointer = self.grw.subsystems()[LABEL_MEMORY];
        let mut params = GrwParams::new(self.grw.delta(), self.grw.tau())?.with_subsystem(
            LABEL_MEMORY,
            pointer.particles,
            lattice,
        )?;
        if self.o_record_particles > 0.0 {
            params = params.with_subsystem(LABEL_RECORD, self.o_record_particles, lattice)?;
        }
        Ok(params)
    }

    /// Hold time after the measurement interaction giving 20 expected jumps
    /// on the pointer.
    pub fn measurement_hold_time(&self) -> Result<f64, WignerError> {
        let pointer = self.grw.subsystems()[LABEL_MEMORY];
        if pointer.particles <= 0.0 {
            return Ok(0.0);
        }
        Ok(HOLD_JUMP_EXPECTATION * self.grw.tau() / pointer.particles)
    }
}

/// Which branch a collapsed trial ended up in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinBranch {
    Up,
    Down,
}

/// One trial's outcome.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// The collapsed branch, when there is a fact of the matter
    /// (localization regime only).
    pub spin_branch: Option<SpinBranch>,
    /// Sampled Ô outcome, ±1.
    pub o_outcome: i8,
}

/// Aggregated experiment outcome with the analytic reference values
/// attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerResult {
    pub regime: Regime,
    pub n_trials: u64,
    pub master_seed: u64,
    pub communicate_to_b: bool,
    /// Estimated P(Ô = +1).
    pub p_o_plus: Estimate,
    /// Conditional estimates over the collapsed sub-samples; present only
    /// when the conditioning branch occurred at least once.
    pub p_o_plus_given_up: Option<Estimate>,
    pub p_o_plus_given_down: Option<Estimate>,
    /// Branch-update prediction: P(Ô=+1 | up) = |α|².
    pub option_a_given_up: f64,
    /// Branch-update prediction: P(Ô=+1 | down) = |β|².
    pub option_a_given_down: f64,
    /// No-collapse prediction: P(Ô=+1) = 1.
    pub option_b_prediction: f64,
    /// Branch-mixture prediction: |α|⁴ + |β|⁴.
    pub mixture_value: f64,
    /// Spectral norm of [Ô, σ_z ⊗ 1].
    pub commutator_with_spin: f64,
    /// Spectral norm of [Ô, memory position observable].
    pub commutator_with_memory: f64,
    /// Largest probability any post-Ô state assigned to the anti-correlated
    /// spin/memory events, across all trials.
    pub max_anticorrelation: f64,
    /// Smallest post-Ô fidelity with the superposed reference state, across
    /// unitary-regime trials.
    pub min_fidelity_with_reference: Option<f64>,
    pub trials: Vec<TrialRecord>,
}

/// The verifier observable of a pure state: `2|ψ⟩⟨ψ| − 1`, with +1 exactly
/// on the state and −1 on its orthogonal complement.
pub fn verifier_observable(state: &StateVector) -> Observable {
    let d = state.space().total_dim();
    let p_plus = linalg::outer(state.amplitudes(), state.amplitudes());
    let p_minus = CMatrix::identity(d, d) - &p_plus;
    let matrix = &p_plus - &p_minus;
    let eigensystem = Eigensystem {
        eigenvalues: vec![-1.0, 1.0],
        projectors: vec![p_minus, p_plus],
    };
    Observable::with_eigensystem(state.space().clone(), matrix, eigensystem)
        .expect("2vv† - 1 is Hermitian")
}

/// The spin ⊗ pointer space of the core experiment.
fn pa_space(cfg: &WignerConfig) -> Result<SpaceSpec, WignerError> {
    Ok(SpaceSpec::new([
        (LABEL_SPIN, 2),
        (LABEL_MEMORY, cfg.pointer_sites),
    ])?)
}

fn full_space(cfg: &WignerConfig, with_record: bool) -> Result<SpaceSpec, WignerError> {
    let mut subsystems = vec![
        (LABEL_SPIN.to_string(), 2),
        (LABEL_MEMORY.to_string(), cfg.pointer_sites),
    ];
    if with_record || cfg.communicate_to_b {
        subsystems.push((LABEL_RECORD.to_string(), cfg.pointer_sites));
    }
    if cfg.regime == Regime::Decoherence {
        subsystems.push((LABEL_ENV.to_string(), cfg.pointer_sites));
    }
    Ok(SpaceSpec::new(subsystems)?)
}

/// `(α|+z⟩ + β|−z⟩) ⊗ |ready⟩`, with every further register (record,
/// environment) in its ready state.
pub fn build_initial(cfg: &WignerConfig) -> Result<StateVector, WignerError> {
    cfg.validate()?;
    build_initial_on(cfg, &full_space(cfg, false)?)
}

fn build_initial_on(cfg: &WignerConfig, space: &SpaceSpec) -> Result<StateVector, WignerError> {
    let mut amps = CVector::zeros(space.total_dim());
    let mut digits = vec![0usize; space.subsystems().len()];
    amps[space.index_of(&digits)] = cfg.alpha;
    digits[0] = 1;
    amps[space.index_of(&digits)] = cfg.beta;
    Ok(StateVector::new(space.clone(), amps)?)
}

/// The measurement interaction as a unitary on the `P+A` factor: the von
/// Neumann coupling of σ_z to the pointer, evolved for unit time. The lower
/// eigenvalue (−z) leaves the pointer at site 0, the higher (+z) shifts it
/// to site 1.
fn coupling_unitary(cfg: &WignerConfig) -> Result<CMatrix, WignerError> {
    let pa = pa_space(cfg)?;
    let spin_space = SpaceSpec::single(LABEL_SPIN, 2)?;
    let sz = Observable::sigma_z(spin_space)?;
    let h = dynamics::measurement_coupling(&pa, &sz, LABEL_MEMORY, 1.0)?;
    Ok(h.propagator(1.0))
}

/// The superposed post-measurement reference state on `P+A`.
fn reference_state_pa(cfg: &WignerConfig) -> Result<StateVector, WignerError> {
    let pa = pa_space(cfg)?;
    let initial = build_initial_on(cfg, &pa)?;
    Ok(initial.apply_unitary(&coupling_unitary(cfg)?)?)
}

/// Run the spin measurement on a freshly prepared state, under the config's
/// regime. Unitary: exactly the entangling interaction. Localization: the
/// interaction followed by a jump-dominated hold, which collapses the
/// pointer to one branch with squared-amplitude frequencies. Decoherence:
/// the interaction followed by one perfect environment-record interaction.
pub fn run_spin_measurement<R: rand::Rng + ?Sized>(
    state: &StateVector,
    cfg: &WignerConfig,
    rng: &mut R,
) -> Result<StateVector, WignerError> {
    cfg.validate()?;
    let u = coupling_unitary(cfg)?;
    let pa = pa_space(cfg)?;
    let coupled = StateVector::new(
        state.space().clone(),
        apply_embedded_matrix(&pa, &u, state.space(), state.amplitudes())?,
    )?;
    match cfg.regime {
        Regime::Unitary => Ok(coupled),
        Regime::Grw => {
            let params = cfg.effective_grw()?;
            let hold = cfg.measurement_hold_time()?;
            let trajectory = grw::evolve_grw_with_rng(&coupled, None, &params, hold, rng, 0)?;
            Ok(trajectory.final_state)
        }
        Regime::Decoherence => {
            let spec = decoherence_spec(cfg)?;
            Ok(dynamics::decohere(&coupled, &spec)?)
        }
    }
}

fn decoherence_spec(cfg: &WignerConfig) -> Result<DecoherenceSpec, WignerError> {
    let memory_space = SpaceSpec::single(LABEL_MEMORY, cfg.pointer_sites)?;
    let sites: Vec<f64> = (0..cfg.pointer_sites).map(|s| s as f64).collect();
    let position = Observable::from_diagonal(memory_space, &sites)?;
    Ok(DecoherenceSpec::new(
        position,
        LABEL_ENV,
        Coupling::Perfect,
    )?)
}

/// The nondemolition verifier Ô on the `P+A` factor: +1 exactly on the
/// superposed post-measurement state, −1 on its complement. Fails when α or
/// β vanishes, since Ô then commutes with the spin and memory observables
/// and stops being interference-sensitive.
pub fn o_observable(cfg: &WignerConfig) -> Result<Observable, WignerError> {
    cfg.validate()?;
    if cfg.alpha.norm() < 1e-12 || cfg.beta.norm() < 1e-12 {
        return Err(WignerError::DegenerateObservable);
    }
    Ok(verifier_observable(&reference_state_pa(cfg)?))
}

/// Sample a projective measurement of `obs` on `state` (embedding `obs`
/// first if it lives on a sub-space), applying the Lüders update. When
/// `record_label` is given, the sampled outcome index is additionally
/// written into that register by a conditional pointer shift, so distinct
/// outcomes leave orthogonal records.
pub fn measure_o<R: rand::Rng + ?Sized>(
    state: &StateVector,
    obs: &Observable,
    rng: &mut R,
    record_label: Option<&str>,
) -> Result<(f64, StateVector), WignerError> {
    let lifted;
    let obs = if obs.space() == state.space() {
        obs
    } else {
        lifted = obs.embed(state.space())?;
        &lifted
    };
    let outcome = obs.measure(state, rng)?;
    let mut post = outcome.post_state;
    if let Some(label) = record_label {
        let dim = state.space().dim_of(label)?;
        let shift = shift_matrix(dim, outcome.index);
        let record_space = SpaceSpec::single(label, dim)?;
        post = StateVector::new(
            post.space().clone(),
            apply_embedded_matrix(&record_space, &shift, post.space(), post.amplitudes())?,
        )?;
    }
    Ok((outcome.eigenvalue, post))
}

/// Cyclic shift by `k` sites.
fn shift_matrix(dim: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |r, c| {
        if r == (c + k) % dim {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Controlled copy of the memory pointer into the record register:
/// `|m⟩_A |b⟩_B ↦ |m⟩_A |b + m⟩_B`.
fn communication_unitary(sites: usize) -> CMatrix {
    let d = sites * sites;
    CMatrix::from_fn(d, d, |row, col| {
        let (m_r, b_r) = (row / sites, row % sites);
        let (m_c, b_c) = (col / sites, col % sites);
        if m_r == m_c && b_r == (b_c + m_c) % sites {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Precomputed per-experiment machinery shared by all trials.
struct Machine {
    cfg: WignerConfig,
    space: SpaceSpec,
    initial: StateVector,
    coupling: CMatrix,
    pa: SpaceSpec,
    reference_pa: StateVector,
    /// Ô embedded in the full space, with its exact two-block eigensystem.
    o_full: Observable,
    /// Reference (no-collapse) post-measurement state on the full space.
    reference_full: StateVector,
    comm: Option<CMatrix>,
    params: GrwParams,
    hold: f64,
    deco: Option<DecoherenceSpec>,
}

impl Machine {
    fn new(cfg: &WignerConfig, with_record: bool) -> Result<Self, WignerError> {
        cfg.validate()?;
        if cfg.alpha.norm() < 1e-12 || cfg.beta.norm() < 1e-12 {
            return Err(WignerError::DegenerateObservable);
        }
        let space = full_space(cfg, with_record)?;
        let initial = build_initial_on(cfg, &space)?;
        let coupling = coupling_unitary(cfg)?;
        let pa = pa_space(cfg)?;
        let reference_pa = reference_state_pa(cfg)?;

        let d = space.total_dim();
        let p_plus = embed_matrix(
            &pa,
            &linalg::outer(reference_pa.amplitudes(), reference_pa.amplitudes()),
            &space,
        )?;
        let p_minus = CMatrix::identity(d, d) - &p_plus;
        let o_full = Observable::with_eigensystem(
            space.clone(),
            &p_plus - &p_minus,
            Eigensystem {
                eigenvalues: vec![-1.0, 1.0],
                projectors: vec![p_minus, p_plus],
            },
        )?;

        let reference_full = StateVector::new(
            space.clone(),
            apply_embedded_matrix(&pa, &coupling, &space, initial.amplitudes())?,
        )?;

        let comm = if cfg.communicate_to_b {
            Some(communication_unitary(cfg.pointer_sites))
        } else {
            None
        };

        Ok(Self {
            cfg: cfg.clone(),
            space,
            initial,
            coupling,
            pa,
            reference_pa,
            o_full,
            reference_full,
            comm,
            params: cfg.effective_grw()?,
            hold: cfg.measurement_hold_time()?,
            deco: if cfg.regime == Regime::Decoherence {
                Some(decoherence_spec(cfg)?)
            } else {
                None
            },
        })
    }

    /// State just before the Ô measurement, given the trial's stream.
    fn pre_o_state<R: rand::Rng + ?Sized>(
        &self,
        rng: &mut R,
        trial: u64,
    ) -> Result<StateVector, WignerError> {
        let mut state = StateVector::new(
            self.space.clone(),
            apply_embedded_matrix(
                &self.pa,
                &self.coupling,
                &self.space,
                self.initial.amplitudes(),
            )?,
        )?;
        if self.cfg.regime == Regime::Grw {
            let trajectory =
                grw::evolve_grw_with_rng(&state, None, &self.params, self.hold, rng, trial)?;
            state = trajectory.final_state;
        } else if let Some(deco) = &self.deco {
            state = dynamics::decohere(&state, deco)?;
        }
        if let Some(comm) = &self.comm {
            let ab = SpaceSpec::new([
                (LABEL_MEMORY, self.cfg.pointer_sites),
                (LABEL_RECORD, self.cfg.pointer_sites),
            ])?;
            state = StateVector::new(
                self.space.clone(),
                apply_embedded_matrix(&ab, comm, &self.space, state.amplitudes())?,
            )?;
        }
        Ok(state)
    }

    fn spin_branch(&self, state: &StateVector) -> Result<Option<SpinBranch>, WignerError> {
        if self.cfg.regime != Regime::Grw {
            return Ok(None);
        }
        let marginal = state.marginal_probabilities(LABEL_MEMORY)?;
        if marginal[SEE_UP_SITE] >= 1.0 - 1e-6 {
            Ok(Some(SpinBranch::Up))
        } else if marginal[SEE_DOWN_SITE] >= 1.0 - 1e-6 {
            Ok(Some(SpinBranch::Down))
        } else {
            Ok(None)
        }
    }

    /// Probability the state assigns to the anti-correlated spin/memory
    /// events: (+z, see down) or (−z, see up).
    fn anticorrelation(&self, state: &StateVector) -> Result<f64, WignerError> {
        let spin_pos = self.space.position_of(LABEL_SPIN)?;
        let mem_pos = self.space.position_of(LABEL_MEMORY)?;
        let spin_stride = self.space.stride(spin_pos);
        let mem_stride = self.space.stride(mem_pos);
        let mem_dim = self.cfg.pointer_sites;
        let mut weight = 0.0;
        for (idx, amp) in state.amplitudes().iter().enumerate() {
            let spin = (idx / spin_stride) % 2;
            let site = (idx / mem_stride) % mem_dim;
            let anti = (spin == 0 && site == SEE_DOWN_SITE) || (spin == 1 && site == SEE_UP_SITE);
            if anti {
                weight += amp.norm_sqr();
            }
        }
        Ok(weight)
    }
}

struct TrialOutput {
    record: TrialRecord,
    anticorrelation: f64,
    fidelity_with_reference: Option<f64>,
}

/// Run `n_trials` independent prepare–measure–verify trials under the
/// configured regime and aggregate the Ô statistics.
pub fn run_experiment(cfg: &WignerConfig) -> Result<WignerResult, WignerError> {
    if cfg.n_trials == 0 {
        return Err(WignerError::ZeroTrials);
    }
    let machine = Machine::new(cfg, false)?;

    let deterministic_pre_o = cfg.regime != Regime::Grw;
    let outputs: Vec<TrialOutput> = if deterministic_pre_o {
        // The pre-measurement state is trial-independent: precompute the
        // outcome distribution and per-outcome post states once, then each
        // trial only samples an outcome.
        let mut probe = crate::rng::derived_stream(cfg.master_seed, 0);
        let state = machine.pre_o_state(&mut probe, 0)?;
        let distribution = state.born_probabilities(&machine.o_full)?;
        let eig = machine.o_full.eigensystem();
        let posts: Vec<Option<(f64, Option<f64>)>> = distribution
            .iter()
            .zip(&eig.projectors)
            .map(|((_, p), projector)| {
                if *p < 1e-12 {
                    return Ok(None);
                }
                let (post, _) = state.project(projector)?;
                let anti = machine.anticorrelation(&post)?;
                let fid = if cfg.regime == Regime::Unitary {
                    Some(post.fidelity(&machine.reference_full)?)
                } else {
                    None
                };
                Ok(Some((anti, fid)))
            })
            .collect::<Result<_, WignerError>>()?;

        (0..cfg.n_trials)
            .map(|trial| {
                let mut rng = crate::rng::derived_stream(cfg.master_seed, trial);
                let draw: f64 = rand::Rng::random(&mut rng);
                let mut acc = 0.0;
                let mut index = distribution.len() - 1;
                for (k, (_, p)) in distribution.iter().enumerate() {
                    acc += p;
                    if draw < acc {
                        index = k;
                        break;
                    }
                }
                // Guard against a draw landing in the rounding slack of an
                // impossible outcome.
                if posts[index].is_none() {
                    index = distribution
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                        .map(|(k, _)| k)
                        .unwrap();
                }
                let (anti, fid) = posts[index].as_ref().unwrap();
                TrialOutput {
                    record: TrialRecord {
                        trial,
                        spin_branch: None,
                        o_outcome: if distribution[index].0 > 0.0 { 1 } else { -1 },
                    },
                    anticorrelation: *anti,
                    fidelity_with_reference: *fid,
                }
            })
            .collect()
    } else {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = crate::rng::derived_stream(cfg.master_seed, trial);
                let state = machine.pre_o_state(&mut rng, trial)?;
                let branch = machine.spin_branch(&state)?;
                let outcome = machine.o_full.measure(&state, &mut rng)?;
                let anti = machine.anticorrelation(&outcome.post_state)?;
                Ok(TrialOutput {
                    record: TrialRecord {
                        trial,
                        spin_branch: branch,
                        o_outcome: if outcome.eigenvalue > 0.0 { 1 } else { -1 },
                    },
                    anticorrelation: anti,
                    fidelity_with_reference: None,
                })
            })
            .collect::<Result<_, WignerError>>()?
    };

    let spin_space = SpaceSpec::single(LABEL_SPIN, 2)?;
    let sz_lifted = Observable::sigma_z(spin_space)?.embed(&machine.pa)?;
    let memory_space = SpaceSpec::single(LABEL_MEMORY, cfg.pointer_sites)?;
    let sites: Vec<f64> = (0..cfg.pointer_sites).map(|s| s as f64).collect();
    let memory_lifted = Observable::from_diagonal(memory_space, &sites)?.embed(&machine.pa)?;
    let o_pa = verifier_observable(&machine.reference_pa);

    let trials: Vec<TrialRecord> = outputs.iter().map(|o| o.record).collect();
    let plus = |records: &[&TrialRecord]| -> Option<Estimate> {
        if records.is_empty() {
            return None;
        }
        let successes = records.iter().filter(|r| r.o_outcome == 1).count() as u64;
        Some(Estimate::binomial(successes, records.len() as u64))
    };
    let all: Vec<&TrialRecord> = trials.iter().collect();
    let ups: Vec<&TrialRecord> = trials
        .iter()
        .filter(|r| r.spin_branch == Some(SpinBranch::Up))
        .collect();
    let downs: Vec<&TrialRecord> = trials
        .iter()
        .filter(|r| r.spin_branch == Some(SpinBranch::Down))
        .collect();

    Ok(WignerResult {
        regime: cfg.regime,
        n_trials: cfg.n_trials,
        master_seed: cfg.master_seed,
        communicate_to_b: cfg.communicate_to_b,
        p_o_plus: plus(&all).expect("n_trials >= 1"),
        p_o_plus_given_up: plus(&ups),
        p_o_plus_given_down: plus(&downs),
        option_a_given_up: cfg.alpha.norm_sqr(),
        option_a_given_down: cfg.beta.norm_sqr(),
        option_b_prediction: 1.0,
        mixture_value: cfg.mixture_value(),
        commutator_with_spin: commutator_norm(o_pa.matrix(), sz_lifted.matrix()),
        commutator_with_memory: commutator_norm(o_pa.matrix(), memory_lifted.matrix()),
        max_anticorrelation: outputs
            .iter()
            .map(|o| o.anticorrelation)
            .fold(0.0, f64::max),
        min_fidelity_with_reference: outputs
            .iter()
            .filter_map(|o| o.fidelity_with_reference)
            .fold(None, |acc: Option<f64>, f| {
                Some(acc.map_or(f, |a| a.min(f)))
            }),
        trials,
    })
}

/// Build the level-2 verifier for a post-record state on `{P, A, B}`:
/// Ô₂ = 2|Φ⟩⟨Φ| − 1, where |Φ⟩ is the given state. Returns the observable
/// together with its +1 eigenstate.
pub fn extend_with_o2(
    state: &StateVector,
    cfg: &WignerConfig,
) -> Result<(Observable, StateVector), WignerError> {
    cfg.validate()?;
    let labels: Vec<String> = state.space().labels().map(str::to_string).collect();
    if labels != [LABEL_SPIN, LABEL_MEMORY, LABEL_RECORD] {
        return Err(WignerError::NotPostRecordSpace(labels));
    }
    Ok((verifier_observable(state), state.clone()))
}

/// Outcome of the nested-verifier experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct O2Result {
    pub regime: Regime,
    pub n_trials: u64,
    pub master_seed: u64,
    /// Estimated P(Ô₂ = +1) after the recorded Ô measurement and a second
    /// hold.
    pub p_o2_plus: Estimate,
    /// Level-1 P(Ô = +1) in the same runs.
    pub p_o_plus: Estimate,
    /// ⟨Φ|Ô₂|Φ⟩ on the reference state; +1 by construction.
    pub reference_expectation: f64,
}

/// Run the nested experiment: spin measurement, Ô measurement recorded into
/// `B`, a second hold, then the Ô₂ verification against the no-collapse
/// reference state of `P+A+B`.
pub fn run_o2_experiment(cfg: &WignerConfig) -> Result<O2Result, WignerError> {
    if cfg.n_trials == 0 {
        return Err(WignerError::ZeroTrials);
    }
    if cfg.regime == Regime::Decoherence {
        return Err(WignerError::UnsupportedRegime);
    }
    let mut record_cfg = cfg.clone();
    record_cfg.communicate_to_b = false;
    let machine = Machine::new(&record_cfg, true)?;

    // No-collapse reference: the Ô measurement on the superposed state
    // yields +1 with certainty, so the recorded state is deterministic.
    let eig = machine.o_full.eigensystem();
    let plus_index = 1usize;
    let (reference_recorded, _) = machine
        .reference_full
        .project(&eig.projectors[plus_index])?;
    let record_space = SpaceSpec::single(LABEL_RECORD, cfg.pointer_sites)?;
    let reference_recorded = StateVector::new(
        machine.space.clone(),
        apply_embedded_matrix(
            &record_space,
            &shift_matrix(cfg.pointer_sites, plus_index),
            &machine.space,
            reference_recorded.amplitudes(),
        )?,
    )?;
    let (o2, phi) = extend_with_o2(&reference_recorded, &record_cfg)?;
    let reference_expectation = o2.expectation(&phi)?;

    let run_trial = |trial: u64| -> Result<(i8, i8), WignerError> {
        let mut rng = crate::rng::derived_stream(cfg.master_seed, trial);
        let state = machine.pre_o_state(&mut rng, trial)?;
        let (o_outcome, mut state) =
            measure_o(&state, &machine.o_full, &mut rng, Some(LABEL_RECORD))?;
        if cfg.regime == Regime::Grw {
            let trajectory = grw::evolve_grw_with_rng(
                &state,
                None,
                &machine.params,
                machine.hold,
                &mut rng,
                trial,
            )?;
            state = trajectory.final_state;
        }
        let outcome2 = o2.measure(&state, &mut rng)?;
        Ok((
            if o_outcome > 0.0 { 1 } else { -1 },
            if outcome2.eigenvalue > 0.0 { 1 } else { -1 },
        ))
    };

    let outcomes: Vec<(i8, i8)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(run_trial)
        .collect::<Result<_, WignerError>>()?;

    let o_plus = outcomes.iter().filter(|(o, _)| *o == 1).count() as u64;
    let o2_plus = outcomes.iter().filter(|(_, o)| *o == 1).count() as u64;
    Ok(O2Result {
        regime: cfg.regime,
        n_trials: cfg.n_trials,
        master_seed: cfg.master_seed,
        p_o2_plus: Estimate::binomial(o2_plus, cfg.n_trials),
        p_o_plus: Estimate::binomial(o_plus, cfg.n_trials),
        reference_expectation,
    })
}
