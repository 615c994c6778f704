//! `qjump`: configuration-driven runner for the quantum dynamics toolkit.
//!
//! One flat config file per run; the flags only point at the config and
//! override the seed, output directory, and worker count. Identical config
//! and seed produce byte-identical payload files regardless of `--jobs`.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime fault.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

mod config;
mod experiments;
mod output;

use config::{ExperimentKind, RunConfig};
use output::OutputWriter;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Runtime(String),
}

#[derive(Parser)]
#[command(
    name = "qjump",
    version,
    about = "Collapse-vs-unitary quantum dynamics experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config file names.
    Run(RunArgs),
    /// Run an observer-in-the-box experiment config.
    Wigner(RunArgs),
    /// Run a localization-trajectory config.
    GrwTrajectory(RunArgs),
    /// Run a protocol-suite config.
    Protocols(RunArgs),
    /// Run an ancilla-dilation config.
    Dilation(RunArgs),
    /// Run a parameter-sweep config.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent trials (results do not depend on
    /// this).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() {
    let cli = Cli::parse();
    let (args, expected) = match &cli.command {
        Command::Run(a) => (a, None),
        Command::Wigner(a) => (a, Some(ExperimentKind::Wigner)),
        Command::GrwTrajectory(a) => (a, Some(ExperimentKind::GrwTrajectory)),
        Command::Protocols(a) => (a, Some(ExperimentKind::Protocols)),
        Command::Dilation(a) => (a, Some(ExperimentKind::Dilation)),
        Command::Sweep(a) => (a, Some(ExperimentKind::Sweep)),
    };
    match run(args, expected) {
        Ok(()) => {}
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            std::process::exit(2);
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("runtime fault: {msg}");
            std::process::exit(3);
        }
    }
}

fn run(args: &RunArgs, expected: Option<ExperimentKind>) -> Result<(), CliError> {
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs: must be at least 1".into()));
    }
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        CliError::Config(format!(
            "config: cannot read {}: {e}",
            args.config.display()
        ))
    })?;
    let mut config = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = Some(dir.clone());
    }
    if let Some(expected) = expected {
        if config.experiment != expected {
            return Err(CliError::Config(format!(
                "experiment: config names `{}` but the subcommand expects `{expected}`",
                config.experiment
            )));
        }
    }
    let output_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("output_dir: not set in config or --output-dir".into()))?;

    rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;

    let started = Instant::now();
    let mut writer = OutputWriter::new(&output_dir);
    let summary = experiments::execute(&config, &mut writer)?;
    let hashes = writer.finish(&config, started.elapsed().as_secs_f64())?;

    println!(
        "{} run complete: {} files in {}",
        config.experiment,
        hashes.len() + 1,
        output_dir.display()
    );
    for (key, value) in &summary {
        println!("  {key} = {value}");
    }
    Ok(())
}
