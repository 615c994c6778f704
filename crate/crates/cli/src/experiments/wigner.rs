//! The observer-in-the-box experiment: result JSON plus a per-trial CSV.

use serde::Serialize;

use qjump_core::wigner::{self, O2Result, SpinBranch, WignerResult};

use super::Summary;
use crate::config::{Format, RunConfig};
use crate::output::OutputWriter;
use crate::CliError;

#[derive(Serialize)]
pub struct Payload {
    pub config_echo: crate::config::WignerParams,
    pub result: WignerResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nested: Option<O2Result>,
}

pub fn compute(config: &RunConfig) -> Result<(Payload, Summary), CliError> {
    let params = config.wigner.as_ref().expect("validated");
    let core_cfg = params.to_core(config.master_seed)?;
    let result =
        wigner::run_experiment(&core_cfg).map_err(|e| CliError::Runtime(format!("wigner: {e}")))?;
    let nested = if params.nested {
        Some(
            wigner::run_o2_experiment(&core_cfg)
                .map_err(|e| CliError::Runtime(format!("wigner nested: {e}")))?,
        )
    } else {
        None
    };

    let mut summary = Summary::new();
    summary.insert("p_o_plus".into(), result.p_o_plus.value);
    summary.insert("p_o_plus_stderr".into(), result.p_o_plus.stderr);
    if let Some(up) = &result.p_o_plus_given_up {
        summary.insert("p_o_plus_given_up".into(), up.value);
    }
    if let Some(down) = &result.p_o_plus_given_down {
        summary.insert("p_o_plus_given_down".into(), down.value);
    }
    summary.insert("mixture_value".into(), result.mixture_value);
    summary.insert("option_b_prediction".into(), result.option_b_prediction);
    summary.insert("max_anticorrelation".into(), result.max_anticorrelation);
    if let Some(nested) = &nested {
        summary.insert("p_o2_plus".into(), nested.p_o2_plus.value);
    }
    Ok((
        Payload {
            config_echo: params.clone(),
            result,
            nested,
        },
        summary,
    ))
}

pub fn execute(config: &RunConfig, writer: &mut OutputWriter) -> Result<Summary, CliError> {
    let (payload, summary) = compute(config)?;
    if config.wants(Format::Json) {
        writer.add_json("result.json", &payload)?;
    }
    if config.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = payload
            .result
            .trials
            .iter()
            .map(|t| {
                vec![
                    t.trial.to_string(),
                    format!("{:?}", payload.result.regime).to_lowercase(),
                    match t.spin_branch {
                        Some(SpinBranch::Up) => "up".to_string(),
                        Some(SpinBranch::Down) => "down".to_string(),
                        None => String::new(),
                    },
                    t.o_outcome.to_string(),
                ]
            })
            .collect();
        writer.add_csv(
            "trials.csv",
            &["trial", "regime", "spin_branch", "o_outcome"],
            &rows,
        );
    }
    Ok(summary)
}
