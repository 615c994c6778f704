//! The ancilla equivalence check: dilate the localization channel, compare
//! reduced unitary dynamics against the direct Kraus action, iterate with
//! fresh ancillas, and cross-check against trajectory averages.

use rayon::prelude::*;
use serde::Serialize;

use qjump_core::channels::{stinespring_dilate, verify_dilation};
use qjump_core::grw::{self};
use qjump_core::hilbert::{DensityOperator, SpaceSpec};
use qjump_core::random::{random_density, random_state};
use qjump_core::CMatrix;

use super::Summary;
use crate::config::{Format, RunConfig};
use crate::output::OutputWriter;
use crate::CliError;

#[derive(Serialize)]
pub struct Payload {
    pub kraus_count: usize,
    pub env_dim: usize,
    /// Max trace distance between Tr_E[VρV†] and ΣKρK† over the test states.
    pub dilation_max_distance: f64,
    /// Disagreement between the n-step iterated channel and the fresh-ancilla
    /// iterated dilation.
    pub iteration_steps: usize,
    pub iterated_distance: f64,
    /// Trajectory-average consistency.
    pub n_trajectories: u64,
    pub mc_trace_distance: f64,
    pub mc_error: f64,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("dilation: {e}"))
}

pub fn compute(config: &RunConfig) -> Result<(Payload, Summary), CliError> {
    let params = config.dilation.as_ref().expect("validated");
    params.validate()?;
    let grw_params = params.grw_params()?;
    let space = SpaceSpec::single("Q", params.sites).map_err(runtime)?;
    let channel = grw::grw_channel(&grw_params, params.dt, &space)
        .map_err(|e| CliError::Config(format!("dilation: {e}")))?;
    let dilation = stinespring_dilate(&channel).map_err(runtime)?;

    let mut rng = qjump_core::rng::derived_stream(config.master_seed, 0);
    let test_states: Vec<DensityOperator> = (0..params.n_test_states)
        .map(|_| random_density(&space, &mut rng))
        .collect();
    let dilation_max_distance =
        verify_dilation(&channel, &dilation, &test_states).map_err(runtime)?;

    // Fresh-ancilla iteration on a pure input vs the iterated channel.
    let initial = random_state(&space, &mut rng);
    let mut amplitudes = initial.amplitudes().clone();
    let d = space.total_dim();
    for _ in 0..params.iteration_steps {
        amplitudes = dilation
            .apply_to_system_factor(d, &amplitudes)
            .map_err(runtime)?;
    }
    // Reduced state on the system factor of the grown pure state.
    let rest = amplitudes.len() / d;
    let mut reduced = CMatrix::zeros(d, d);
    for s in 0..d {
        for t in 0..d {
            let mut acc = qjump_core::C64::new(0.0, 0.0);
            for r in 0..rest {
                acc += amplitudes[s * rest + r] * amplitudes[t * rest + r].conj();
            }
            reduced[(s, t)] = acc;
        }
    }
    let reduced = DensityOperator::new(space.clone(), reduced).map_err(runtime)?;
    let direct = channel
        .apply_iterated(&initial.density(), params.iteration_steps)
        .map_err(runtime)?;
    let iterated_distance = reduced.trace_distance(&direct).map_err(runtime)?;

    // Monte Carlo: trajectory average over one step vs the channel.
    let mc_initial = initial.clone();
    let n = params.n_trajectories;
    let trajectories: Vec<DensityOperator> = (0..n)
        .into_par_iter()
        .map(|run| {
            let mut rng = qjump_core::rng::derived_stream(config.master_seed, run + 1);
            grw::evolve_grw_with_rng(&mc_initial, None, &grw_params, params.dt, &mut rng, run)
                .map(|t| t.final_state.density())
                .map_err(|e| CliError::Runtime(format!("dilation trajectory {run}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let mut mean = CMatrix::zeros(d, d);
    for rho in &trajectories {
        mean += rho.matrix();
    }
    mean.unscale_mut(n as f64);
    let averaged = DensityOperator::new(space, mean).map_err(runtime)?;
    let direct_one = channel.apply(&mc_initial.density()).map_err(runtime)?;
    let mc_trace_distance = averaged.trace_distance(&direct_one).map_err(runtime)?;
    let spread: f64 = trajectories
        .iter()
        .map(|r| r.trace_distance(&averaged).map(|v| v * v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?
        .iter()
        .sum::<f64>()
        / (n as f64 - 1.0);
    let mc_error = (spread / n as f64).sqrt();

    let payload = Payload {
        kraus_count: channel.kraus().len(),
        env_dim: dilation.env_dim(),
        dilation_max_distance,
        iteration_steps: params.iteration_steps,
        iterated_distance,
        n_trajectories: n,
        mc_trace_distance,
        mc_error,
    };
    let mut summary = Summary::new();
    summary.insert(
        "dilation_max_distance".into(),
        payload.dilation_max_distance,
    );
    summary.insert("iterated_distance".into(), payload.iterated_distance);
    summary.insert("mc_trace_distance".into(), payload.mc_trace_distance);
    summary.insert("mc_error".into(), payload.mc_error);
    summary.insert("env_dim".into(), payload.env_dim as f64);
    Ok((payload, summary))
}

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    let (payload, summary) = compute(config)?;
    if config.wants(Format::Json) {
        writer.add_json("result.json", &payload)?;
    }
    Ok(summary)
}
