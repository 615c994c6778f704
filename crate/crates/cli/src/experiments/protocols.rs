//! The protocol suite: a randomized no-signaling sweep, cloning dichotomy
//! demonstrations, steering of two ensembles from one marginal, and the
//! bit-commitment cheat under the configured dynamics.

use serde::Serialize;

use qjump_core::hilbert::{DensityOperator, SpaceSpec, StateVector};
use qjump_core::protocols::{
    attempt_cloning, bit_commitment_demo, check_no_signaling, steer, Ensemble, ProtocolReport,
};
use qjump_core::random::{random_channel, random_density};
use qjump_core::{CVector, C64};

use super::Summary;
use crate::config::{Format, RunConfig};
use crate::output::OutputWriter;
use crate::CliError;

#[derive(Serialize)]
pub struct Payload {
    pub reports: Vec<ProtocolReport>,
}

#[derive(Serialize)]
struct TranscriptRow<'a> {
    report: &'a str,
    step: &'a str,
    detail: &'a str,
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("protocols: {e}"))
}

pub fn compute(config: &RunConfig) -> Result<(Payload, Summary), CliError> {
    let params = config.protocols.as_ref().expect("validated");
    params.validate()?;
    let mut reports = Vec::new();

    // No-signaling over random joint states and local channels.
    let alice_space = SpaceSpec::single("A", params.alice_dim).map_err(runtime)?;
    let joint_space =
        SpaceSpec::new([("A", params.alice_dim), ("B", params.bob_dim)]).map_err(runtime)?;
    let mut worst_distance: f64 = 0.0;
    for pair in 0..params.no_signaling_pairs {
        let mut rng = qjump_core::rng::derived_stream(config.master_seed, pair);
        let joint = random_density(&joint_space, &mut rng);
        let op = random_channel(&alice_space, 2, &mut rng).map_err(runtime)?;
        let report = check_no_signaling(&joint, &[op]).map_err(runtime)?;
        worst_distance = worst_distance.max(report.metrics["max_remote_trace_distance"]);
        if pair == 0 {
            reports.push(report);
        }
    }
    if let Some(first) = reports.first_mut() {
        first
            .metrics
            .insert("pairs_checked".into(), params.no_signaling_pairs as f64);
        first
            .metrics
            .insert("worst_distance_over_pairs".into(), worst_distance);
    }

    // Cloning dichotomy on the canonical pairs.
    let qubit = SpaceSpec::single("S", 2).map_err(runtime)?;
    let zero = StateVector::basis_state(qubit.clone(), 0).map_err(runtime)?;
    let one = StateVector::basis_state(qubit.clone(), 1).map_err(runtime)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::new(
        qubit.clone(),
        CVector::from_vec(vec![C64::new(h, 0.0), C64::new(h, 0.0)]),
    )
    .map_err(runtime)?;
    reports.push(attempt_cloning(&zero, &one).map_err(runtime)?);
    reports.push(attempt_cloning(&zero, &plus).map_err(runtime)?);

    // Two ensembles steered from the same maximally mixed marginal.
    let marginal = DensityOperator::maximally_mixed(qubit.clone());
    let minus = StateVector::new(
        qubit.clone(),
        CVector::from_vec(vec![C64::new(h, 0.0), C64::new(-h, 0.0)]),
    )
    .map_err(runtime)?;
    let classical =
        Ensemble::new(vec![(0.5, zero.density()), (0.5, one.density())]).map_err(runtime)?;
    let rotated =
        Ensemble::new(vec![(0.5, plus.density()), (0.5, minus.density())]).map_err(runtime)?;
    reports.push(steer(&marginal, &classical).map_err(runtime)?.report);
    reports.push(steer(&marginal, &rotated).map_err(runtime)?.report);

    // Bit commitment under the configured regime.
    let commitment = bit_commitment_demo(
        params.bit,
        params.commitment_regime,
        &params.grw_params()?,
        params.hold_time,
        params.n_runs,
        config.master_seed,
    )
    .map_err(runtime)?;

    let mut summary = Summary::new();
    summary.insert("no_signaling_worst_distance".into(), worst_distance);
    summary.insert(
        "cheat_success_rate".into(),
        commitment.metrics["cheat_success_rate"],
    );
    summary.insert(
        "analytic_no_jump_probability".into(),
        commitment.metrics["analytic_no_jump_probability"],
    );
    summary.insert(
        "jump_expectation".into(),
        commitment.metrics["jump_expectation"],
    );
    reports.push(commitment);

    Ok((Payload { reports }, summary))
}

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    let (payload, summary) = compute(config)?;
    if config.wants(Format::Json) {
        writer.add_json("reports.json", &payload)?;
    }
    if config.wants(Format::Jsonl) {
        let rows: Vec<TranscriptRow> = payload
            .reports
            .iter()
            .flat_map(|r| {
                r.transcript.iter().map(move |e| TranscriptRow {
                    report: &r.name,
                    step: &e.step,
                    detail: &e.detail,
                })
            })
            .collect();
        writer.add_jsonl("transcript.jsonl", &rows)?;
    }
    Ok(summary)
}
