//! Parameter sweeps: run the target experiment once per axis value and
//! tabulate the summary statistics as plot-ready CSV.

use serde::Serialize;

use super::Summary;
use crate::config::{ExperimentKind, Format, RunConfig};
use crate::output::{csv_float, OutputWriter};
use crate::CliError;

#[derive(Serialize)]
pub struct Payload {
    pub target: ExperimentKind,
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub summary: Summary,
}

pub fn compute(config: &RunConfig) -> Result<(Payload, Summary), CliError> {
    let sweep = config.sweep.as_ref().expect("validated");
    let mut rows = Vec::new();
    for &value in &sweep.values {
        let mut point = config.clone();
        point.experiment = sweep.target;
        match sweep.target {
            ExperimentKind::Wigner => {
                point
                    .wigner
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing parameter table `wigner`".into()))?
                    .set_axis(&sweep.axis, value)?;
            }
            ExperimentKind::GrwTrajectory => {
                point
                    .grw_trajectory
                    .as_mut()
                    .ok_or_else(|| {
                        CliError::Config("missing parameter table `grw_trajectory`".into())
                    })?
                    .set_axis(&sweep.axis, value)?;
            }
            ExperimentKind::Protocols => {
                point
                    .protocols
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing parameter table `protocols`".into()))?
                    .set_axis(&sweep.axis, value)?;
            }
            ExperimentKind::Dilation => {
                point
                    .dilation
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing parameter table `dilation`".into()))?
                    .set_axis(&sweep.axis, value)?;
            }
            ExperimentKind::Sweep => {
                return Err(CliError::Config(
                    "sweep.target: nested sweeps are not supported".into(),
                ))
            }
        }
        let summary = super::summarize(sweep.target, &point)?;
        rows.push(SweepRow { value, summary });
    }

    // Flat summary of the sweep itself: first and last row headline values.
    let mut summary = Summary::new();
    summary.insert("points".into(), rows.len() as f64);
    let payload = Payload {
        target: sweep.target,
        axis: sweep.axis.clone(),
        rows,
    };
    Ok((payload, summary))
}

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    let sweep = config.sweep.as_ref().expect("validated");
    let (payload, summary) = compute(config)?;
    if config.wants(Format::Json) {
        writer.add_json("sweep.json", &payload)?;
    }
    if config.wants(Format::Csv) {
        // Union of summary columns over all rows, in sorted order.
        let mut columns: Vec<String> = Vec::new();
        for row in &payload.rows {
            for key in row.summary.keys() {
                if !columns.contains(key) {
                    columns.push(key.clone());
                }
            }
        }
        columns.sort();
        let mut header: Vec<&str> = vec![sweep.axis.as_str()];
        header.extend(columns.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = payload
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![csv_float(row.value)];
                for col in &columns {
                    cells.push(
                        row.summary
                            .get(col)
                            .map(|v| csv_float(*v))
                            .unwrap_or_default(),
                    );
                }
                cells
            })
            .collect();
        writer.add_csv("sweep.csv", &header, &rows);
    }
    Ok(summary)
}
