//! One module per experiment kind; each exposes a compute step returning a
//! serializable payload plus a flat numeric summary (used by sweeps), and an
//! execute step that also writes the payload files.

use std::collections::BTreeMap;

use crate::config::{ExperimentKind, RunConfig};
use crate::output::OutputWriter;
use crate::CliError;

pub mod dilation;
pub mod grw_trajectory;
pub mod protocols;
pub mod sweep;
pub mod wigner;

pub type Summary = BTreeMap<String, f64>;

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    match config.experiment {
        ExperimentKind::Wigner => wigner::execute(config, writer),
        ExperimentKind::GrwTrajectory => grw_trajectory::execute(config, writer),
        ExperimentKind::Protocols => protocols::execute(config, writer),
        ExperimentKind::Dilation => dilation::execute(config, writer),
        ExperimentKind::Sweep => sweep::execute(config, writer),
    }
}

/// Compute a non-sweep experiment's summary without writing files.
pub fn summarize(kind: ExperimentKind, config: &RunConfig) -> Result<Summary, CliError> {
    match kind {
        ExperimentKind::Wigner => Ok(wigner::compute(config)?.1),
        ExperimentKind::GrwTrajectory => Ok(grw_trajectory::compute(config)?.1),
        ExperimentKind::Protocols => Ok(protocols::compute(config)?.1),
        ExperimentKind::Dilation => Ok(dilation::compute(config)?.1),
        ExperimentKind::Sweep => Err(CliError::Config(
            "sweep.target: nested sweeps are not supported".into(),
        )),
    }
}
