#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;

use clap::{Parser, Subcommand};
use config::{ConfigError, RawConfig};
use experiments::{build_config, run, Experiment, Overrides, RunError};
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

/// Numerical experiments for Grushin-type hypoelliptic operators.
#[derive(Debug, Parser)]
#[command(name = "hypolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving `<experiment>.csv` and `<experiment>.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Eigenvalue table of the operator.
    Spectrum,
    /// Eigenfunction mass in ω against frequency.
    Tunneling,
    /// Normal geodesic from one cotangent point, optionally its distance to a box.
    Geodesics,
    /// Heat-to-wave kernel I(T, λ) against its asymptotics.
    Transmute,
    /// Observability cost of the heat equation on E_λ.
    LowfreqCost,
    /// Exponent needed in the parabolic cost tradeoff.
    Parabolic,
    /// Exponent needed in the Gevrey cost tradeoff.
    Gevrey,
    /// Cost against the frequency function of the data.
    FrequencyCost,
    /// Subelliptic ratio on the torus across frequency bands.
    Subelliptic,
    /// Every acceptance criterion.
    AcceptAll,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Spectrum => Experiment::Spectrum,
            Command::Tunneling => Experiment::Tunneling,
            Command::Geodesics => Experiment::Geodesics,
            Command::Transmute => Experiment::Transmute,
            Command::LowfreqCost => Experiment::LowfreqCost,
            Command::Parabolic => Experiment::Parabolic,
            Command::Gevrey => Experiment::Gevrey,
            Command::FrequencyCost => Experiment::FrequencyCost,
            Command::Subelliptic => Experiment::Subelliptic,
            Command::AcceptAll => Experiment::AcceptAll,
        }
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot start the thread pool: {0}")]
    Threads(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure in {0}")]
    Numerical(#[from] RunError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(&path, text).map_err(|source| CliError::Output { path, source })
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let experiment = cli.command.experiment();
    let over = Overrides {
        output_dir: cli.out,
        seed: cli.seed,
        threads: cli.threads,
    };
    let cfg = build_config(experiment, RawConfig::parse(&text)?.reader(), over)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }

    let artifacts = run(&cfg)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| CliError::Output {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let stem = experiment.key();
    write(cfg.output_dir.join(format!("{stem}.csv")), &artifacts.csv)?;
    let json = serde_json::to_string_pretty(&Value::Object(artifacts.json)).expect("JSON values serialize");
    write(cfg.output_dir.join(format!("{stem}.json")), &(json + "\n"))?;

    if artifacts.failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed acceptance criteria: {}", artifacts.failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
