//! Run configuration: one flat TOML file per run, validated up front.
//!
//! Every run names an experiment, a master seed (there is no silent
//! nondeterminism), and one parameter table per experiment kind. Unknown
//! keys are rejected so typos surface as config errors rather than silently
//! ignored settings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use qjump_core::grw::{GrwParams, LatticeSpec};
use qjump_core::protocols::CommitmentRegime;
use qjump_core::wigner::{Regime, WignerConfig};
use qjump_core::C64;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Wigner,
    GrwTrajectory,
    Protocols,
    Dilation,
    Sweep,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Wigner => "wigner",
            ExperimentKind::GrwTrajectory => "grw-trajectory",
            ExperimentKind::Protocols => "protocols",
            ExperimentKind::Dilation => "dilation",
            ExperimentKind::Sweep => "sweep",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Jsonl,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Jsonl]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub wigner: Option<WignerParams>,
    #[serde(default)]
    pub grw_trajectory: Option<TrajectoryParams>,
    #[serde(default)]
    pub protocols: Option<ProtocolsParams>,
    #[serde(default)]
    pub dilation: Option<DilationParams>,
    #[serde(default)]
    pub sweep: Option<SweepParams>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                config.schema_version
            )));
        }
        config.table_for_experiment()?;
        Ok(config)
    }

    /// The parameter table the configured experiment needs; the error names
    /// the missing key.
    pub fn table_for_experiment(&self) -> Result<(), CliError> {
        let missing = |key: &str| CliError::Config(format!("missing parameter table `{key}`"));
        match self.experiment {
            ExperimentKind::Wigner if self.wigner.is_none() => Err(missing("wigner")),
            ExperimentKind::GrwTrajectory if self.grw_trajectory.is_none() => {
                Err(missing("grw_trajectory"))
            }
            ExperimentKind::Protocols if self.protocols.is_none() => Err(missing("protocols")),
            ExperimentKind::Dilation if self.dilation.is_none() => Err(missing("dilation")),
            ExperimentKind::Sweep => {
                let sweep = self.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
                if sweep.target == ExperimentKind::Sweep {
                    return Err(CliError::Config(
                        "sweep.target: a sweep cannot target another sweep".into(),
                    ));
                }
                if sweep.values.is_empty() {
                    return Err(CliError::Config("sweep.values: at least one value".into()));
                }
                let mut probe = self.clone();
                probe.experiment = sweep.target;
                probe.table_for_experiment()
            }
            _ => Ok(()),
        }
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerParams {
    /// Spin amplitudes as [re, im] pairs; |alpha|² + |beta|² must be 1.
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    #[serde(default = "WignerParams::default_pointer_sites")]
    pub pointer_sites: usize,
    #[serde(default = "WignerParams::default_branch_separation")]
    pub branch_separation: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "WignerParams::default_pointer_particles")]
    pub pointer_particles: f64,
    pub regime: Regime,
    pub n_trials: u64,
    #[serde(default)]
    pub communicate_to_b: bool,
    #[serde(default)]
    pub o_record_particles: f64,
    /// Also run the nested (Ô₂) level after the main experiment.
    #[serde(default)]
    pub nested: bool,
}

impl WignerParams {
    fn default_pointer_sites() -> usize {
        16
    }
    fn default_branch_separation() -> f64 {
        6.0
    }
    fn default_pointer_particles() -> f64 {
        50.0
    }

    pub fn to_core(&self, master_seed: u64) -> Result<WignerConfig, CliError> {
        let grw = GrwParams::new(self.delta, self.tau)
            .and_then(|p| {
                p.with_subsystem(
                    qjump_core::wigner::LABEL_MEMORY,
                    self.pointer_particles,
                    LatticeSpec {
                        sites: self.pointer_sites,
                        spacing: self.branch_separation * self.delta,
                    },
                )
            })
            .map_err(|e| CliError::Config(format!("wigner: {e}")))?;
        let cfg = WignerConfig {
            alpha: C64::new(self.alpha[0], self.alpha[1]),
            beta: C64::new(self.beta[0], self.beta[1]),
            pointer_sites: self.pointer_sites,
            branch_separation: self.branch_separation,
            grw,
            regime: self.regime,
            n_trials: self.n_trials,
            master_seed,
            communicate_to_b: self.communicate_to_b,
            o_record_particles: self.o_record_particles,
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("wigner: {e}")))?;
        Ok(cfg)
    }

    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), CliError> {
        match axis {
            "pointer_particles" => self.pointer_particles = value,
            "branch_separation" => self.branch_separation = value,
            "delta" => self.delta = value,
            "tau" => self.tau = value,
            "o_record_particles" => self.o_record_particles = value,
            "n_trials" => self.n_trials = value as u64,
            other => {
                return Err(CliError::Config(format!(
                    "sweep.axis: `{other}` is not a numeric wigner parameter"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryParams {
    pub sites: usize,
    pub spacing: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub tau: f64,
    pub particles: f64,
    /// The two occupied lattice sites of the initial superposition.
    pub branch_sites: [usize; 2],
    /// Unnormalized amplitudes of the two branches.
    #[serde(default = "TrajectoryParams::default_amplitudes")]
    pub branch_amplitudes: [f64; 2],
    pub t_total: f64,
    pub n_trajectories: u64,
    /// Write every trajectory's final state (can be large).
    #[serde(default)]
    pub save_final_states: bool,
}

impl TrajectoryParams {
    fn default_amplitudes() -> [f64; 2] {
        [
            std::f64::consts::FRAC_1_SQRT_2,
            std::f64::consts::FRAC_1_SQRT_2,
        ]
    }

    pub fn grw_params(&self) -> Result<GrwParams, CliError> {
        GrwParams::new(self.delta, self.tau)
            .and_then(|p| {
                p.with_subsystem(
                    "Q",
                    self.particles,
                    LatticeSpec {
                        sites: self.sites,
                        spacing: self.spacing,
                    },
                )
            })
            .map_err(|e| CliError::Config(format!("grw_trajectory: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grw_params()?;
        if self.branch_sites[0] >= self.sites || self.branch_sites[1] >= self.sites {
            return Err(CliError::Config(
                "grw_trajectory.branch_sites: site outside the lattice".into(),
            ));
        }
        if self.branch_sites[0] == self.branch_sites[1] {
            return Err(CliError::Config(
                "grw_trajectory.branch_sites: the two sites must differ".into(),
            ));
        }
        if self.n_trajectories == 0 {
            return Err(CliError::Config(
                "grw_trajectory.n_trajectories: must be ≥ 1".into(),
            ));
        }
        if self.t_total < 0.0 || !self.t_total.is_finite() {
            return Err(CliError::Config(
                "grw_trajectory.t_total: must be ≥ 0".into(),
            ));
        }
        Ok(())
    }

    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), CliError> {
        match axis {
            "particles" => self.particles = value,
            "t_total" => self.t_total = value,
            "delta" => self.delta = value,
            "tau" => self.tau = value,
            "spacing" => self.spacing = value,
            "n_trajectories" => self.n_trajectories = value as u64,
            other => {
                return Err(CliError::Config(format!(
                    "sweep.axis: `{other}` is not a numeric grw-trajectory parameter"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolsParams {
    /// Random joint-state/local-channel pairs for the no-signaling sweep.
    #[serde(default = "ProtocolsParams::default_pairs")]
    pub no_signaling_pairs: u64,
    #[serde(default = "ProtocolsParams::default_alice_dim")]
    pub alice_dim: usize,
    #[serde(default = "ProtocolsParams::default_bob_dim")]
    pub bob_dim: usize,
    /// Bit-commitment demo settings.
    pub bit: u8,
    pub commitment_regime: CommitmentRegime,
    pub hold_time: f64,
    pub n_runs: u64,
    #[serde(default = "ProtocolsParams::default_sites")]
    pub sites: usize,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub tau: f64,
    pub particles: f64,
}

impl ProtocolsParams {
    fn default_pairs() -> u64 {
        100
    }
    fn default_alice_dim() -> usize {
        3
    }
    fn default_bob_dim() -> usize {
        2
    }
    fn default_sites() -> usize {
        16
    }

    pub fn grw_params(&self) -> Result<GrwParams, CliError> {
        GrwParams::new(self.delta, self.tau)
            .and_then(|p| {
                p.with_subsystem(
                    "Q",
                    self.particles,
                    LatticeSpec {
                        sites: self.sites,
                        spacing: self.spacing,
                    },
                )
            })
            .map_err(|e| CliError::Config(format!("protocols: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grw_params()?;
        if self.bit > 1 {
            return Err(CliError::Config("protocols.bit: must be 0 or 1".into()));
        }
        if self.n_runs == 0 {
            return Err(CliError::Config("protocols.n_runs: must be ≥ 1".into()));
        }
        if self.alice_dim < 2 || self.bob_dim < 2 {
            return Err(CliError::Config(
                "protocols.alice_dim/bob_dim: must be ≥ 2".into(),
            ));
        }
        Ok(())
    }

    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), CliError> {
        match axis {
            "particles" => self.particles = value,
            "hold_time" => self.hold_time = value,
            "delta" => self.delta = value,
            "tau" => self.tau = value,
            "n_runs" => self.n_runs = value as u64,
            other => {
                return Err(CliError::Config(format!(
                    "sweep.axis: `{other}` is not a numeric protocols parameter"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DilationParams {
    pub sites: usize,
    #[serde(default = "one")]
    pub spacing: f64,
    #[serde(default = "one")]
    pub delta: f64,
    #[serde(default = "one")]
    pub tau: f64,
    pub particles: f64,
    /// Channel time step; rate·dt must stay ≤ 0.1.
    pub dt: f64,
    #[serde(default = "DilationParams::default_states")]
    pub n_test_states: u64,
    /// Fresh-ancilla iteration depth for the composition check.
    #[serde(default = "DilationParams::default_steps")]
    pub iteration_steps: usize,
    /// Trajectories for the Monte Carlo consistency check.
    #[serde(default = "DilationParams::default_trajectories")]
    pub n_trajectories: u64,
}

impl DilationParams {
    fn default_states() -> u64 {
        100
    }
    fn default_steps() -> usize {
        5
    }
    fn default_trajectories() -> u64 {
        10_000
    }

    pub fn grw_params(&self) -> Result<GrwParams, CliError> {
        GrwParams::new(self.delta, self.tau)
            .and_then(|p| {
                p.with_subsystem(
                    "Q",
                    self.particles,
                    LatticeSpec {
                        sites: self.sites,
                        spacing: self.spacing,
                    },
                )
            })
            .map_err(|e| CliError::Config(format!("dilation: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.grw_params()?;
        if self.n_test_states == 0 {
            return Err(CliError::Config(
                "dilation.n_test_states: must be ≥ 1".into(),
            ));
        }
        // The fresh-ancilla iteration grows the pure state by one
        // environment factor per step.
        let grown =
            (self.sites as f64) * ((self.sites + 1) as f64).powi(self.iteration_steps as i32);
        if grown > 4e6 {
            return Err(CliError::Config(format!(
                "dilation.iteration_steps: {} steps over {} sites needs a {grown:.0}-amplitude \
                 state; reduce sites or steps",
                self.iteration_steps, self.sites
            )));
        }
        Ok(())
    }

    pub fn set_axis(&mut self, axis: &str, value: f64) -> Result<(), CliError> {
        match axis {
            "particles" => self.particles = value,
            "dt" => self.dt = value,
            "delta" => self.delta = value,
            "tau" => self.tau = value,
            other => {
                return Err(CliError::Config(format!(
                    "sweep.axis: `{other}` is not a numeric dilation parameter"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Which experiment to sweep.
    pub target: ExperimentKind,
    /// Name of the numeric parameter to vary.
    pub axis: String,
    pub values: Vec<f64>,
}
