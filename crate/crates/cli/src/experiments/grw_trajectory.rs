//! Stochastic localization trajectories on a two-branch superposition:
//! jump-event JSONL, collapse statistics, and the micro-to-macro rate law.

use rayon::prelude::*;
use serde::Serialize;

use qjump_core::grw::{self, JumpEvent, Trajectory};
use qjump_core::hilbert::{SpaceSpec, StateVector};
use qjump_core::stats::{self, Estimate};
use qjump_core::{CVector, C64};

use super::Summary;
use crate::config::{Format, RunConfig, TrajectoryParams};
use crate::output::OutputWriter;
use crate::CliError;

#[derive(Serialize)]
struct JumpRow {
    trajectory: u64,
    #[serde(flatten)]
    event: JumpEvent,
}

#[derive(Serialize)]
struct FinalStateRow {
    trajectory: u64,
    state: StateVector,
}

#[derive(Serialize)]
pub struct Payload {
    pub n_trajectories: u64,
    pub jump_rate: f64,
    pub jump_expectation: f64,
    pub mean_jump_count: f64,
    pub jump_count_poisson_pvalue: f64,
    /// Fraction of trajectories with at least one jump.
    pub collapse_probability: Estimate,
    pub analytic_collapse_probability: f64,
    /// Frequency of the first branch surviving, among collapsed runs.
    pub branch0_frequency: Option<Estimate>,
    pub expected_branch0_probability: f64,
    /// Among jumped trajectories, how often the final state is effectively
    /// one-branch (minority/majority weight ratio ≤ 1e-8).
    pub branch_kill_rate: Option<Estimate>,
    /// Final state of trajectory 0, as a reload-able snapshot.
    pub sample_final_state: StateVector,
    #[serde(skip)]
    pub trajectories: Vec<Trajectory>,
}

fn initial_state(params: &TrajectoryParams) -> Result<StateVector, CliError> {
    let space = SpaceSpec::single("Q", params.sites)
        .map_err(|e| CliError::Config(format!("grw_trajectory: {e}")))?;
    let mut amps = CVector::zeros(params.sites);
    amps[params.branch_sites[0]] = C64::new(params.branch_amplitudes[0], 0.0);
    amps[params.branch_sites[1]] = C64::new(params.branch_amplitudes[1], 0.0);
    StateVector::normalized(space, amps)
        .map_err(|e| CliError::Config(format!("grw_trajectory.branch_amplitudes: {e}")))
}

pub fn compute(config: &RunConfig) -> Result<(Payload, Summary), CliError> {
    let params = config.grw_trajectory.as_ref().expect("validated");
    params.validate()?;
    let grw_params = params.grw_params()?;
    let initial = initial_state(params)?;
    let rate = grw::total_jump_rate(&grw_params);
    let lambda = rate * params.t_total;

    let trajectories: Vec<Trajectory> = (0..params.n_trajectories)
        .into_par_iter()
        .map(|run| {
            let mut rng = qjump_core::rng::derived_stream(config.master_seed, run);
            grw::evolve_grw_with_rng(&initial, None, &grw_params, params.t_total, &mut rng, run)
                .map_err(|e| CliError::Runtime(format!("trajectory {run}: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let counts: Vec<u64> = trajectories.iter().map(|t| t.jump_count() as u64).collect();
    let n = params.n_trajectories;
    let jumped = counts.iter().filter(|&&c| c > 0).count() as u64;
    let mean_jump_count = counts.iter().sum::<u64>() as f64 / n as f64;
    let poisson_p = if lambda > 0.0 {
        stats::poisson_chi_square_pvalue(&counts, lambda)
    } else {
        1.0
    };

    // Branch statistics over collapsed runs.
    let w0 = params.branch_amplitudes[0].powi(2)
        / (params.branch_amplitudes[0].powi(2) + params.branch_amplitudes[1].powi(2));
    let mut branch0 = 0u64;
    let mut collapsed = 0u64;
    let mut killed = 0u64;
    for t in &trajectories {
        if t.jump_count() == 0 {
            continue;
        }
        let marginal = t
            .final_state
            .marginal_probabilities("Q")
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let (a, b) = (
            marginal[params.branch_sites[0]],
            marginal[params.branch_sites[1]],
        );
        if a.min(b) / a.max(b) <= 1e-8 {
            killed += 1;
        }
        if a > b {
            branch0 += 1;
        }
        collapsed += 1;
    }

    let payload = Payload {
        n_trajectories: n,
        jump_rate: rate,
        jump_expectation: lambda,
        mean_jump_count,
        jump_count_poisson_pvalue: poisson_p,
        collapse_probability: Estimate::binomial(jumped, n),
        analytic_collapse_probability: 1.0 - (-lambda).exp(),
        branch0_frequency: (collapsed > 0).then(|| Estimate::binomial(branch0, collapsed)),
        expected_branch0_probability: w0,
        branch_kill_rate: (collapsed > 0).then(|| Estimate::binomial(killed, collapsed)),
        sample_final_state: trajectories[0].final_state.clone(),
        trajectories,
    };

    let mut summary = Summary::new();
    summary.insert("mean_jump_count".into(), payload.mean_jump_count);
    summary.insert(
        "jump_count_poisson_pvalue".into(),
        payload.jump_count_poisson_pvalue,
    );
    summary.insert(
        "collapse_probability".into(),
        payload.collapse_probability.value,
    );
    summary.insert(
        "collapse_probability_stderr".into(),
        payload.collapse_probability.stderr,
    );
    summary.insert(
        "analytic_collapse_probability".into(),
        payload.analytic_collapse_probability,
    );
    if let Some(b0) = &payload.branch0_frequency {
        summary.insert("branch0_frequency".into(), b0.value);
    }
    summary.insert(
        "expected_branch0_probability".into(),
        payload.expected_branch0_probability,
    );
    if let Some(kill) = &payload.branch_kill_rate {
        summary.insert("branch_kill_rate".into(), kill.value);
    }
    Ok((payload, summary))
}

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    let params = config.grw_trajectory.as_ref().expect("validated");
    let (payload, summary) = compute(config)?;
    if config.wants(Format::Jsonl) {
        let rows: Vec<JumpRow> = payload
            .trajectories
            .iter()
            .enumerate()
            .flat_map(|(k, t)| {
                t.jumps.iter().map(move |event| JumpRow {
                    trajectory: k as u64,
                    event: event.clone(),
                })
            })
            .collect();
        writer.add_jsonl("jumps.jsonl", &rows)?;
        if params.save_final_states {
            let rows: Vec<FinalStateRow> = payload
                .trajectories
                .iter()
                .enumerate()
                .map(|(k, t)| FinalStateRow {
                    trajectory: k as u64,
                    state: t.final_state.clone(),
                })
                .collect();
            writer.add_jsonl("final_states.jsonl", &rows)?;
        }
    }
    if config.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = payload
            .trajectories
            .iter()
            .enumerate()
            .map(|(k, t)| vec![k.to_string(), t.jump_count().to_string()])
            .collect();
        writer.add_csv("jump_counts.csv", &["trajectory", "jumps"], &rows);
    }
    if config.wants(Format::Json) {
        writer.add_json("result.json", &payload)?;
    }
    Ok(summary)
}
