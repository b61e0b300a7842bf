//! `transduce` command line: config parsing, dispatch and result emission.

pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;

pub use config::{Command, ConfigError, RunConfig};

use crate::error::Error;
use crate::experiments::{bloch_sweep, noise_heatmap, run_dynamics, thermal_sweep, validate, ResonatorInit, Scenario};
use output::{dynamics_csv, sweep_csv, write_files, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTEGRATION: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "transduce", version, about = "Qubit-to-atom state transduction simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Flat TOML config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set omega_mhz=24`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Sampled trajectory of one protocol run.
    Dynamics(RunArgs),
    /// Final fidelity over the Bloch sphere.
    BlochSweep(RunArgs),
    /// Noisy final fidelity over (lambda/kappa, omega/kappa).
    NoiseHeatmap(RunArgs),
    /// Final fidelity versus lambda/kappa for several thermal occupations.
    ThermalSweep(RunArgs),
    /// Oracle and convergence checks.
    Validate(RunArgs),
}

impl CliCommand {
    fn split(&self) -> (Command, &RunArgs) {
        match self {
            Self::Dynamics(a) => (Command::Dynamics, a),
            Self::BlochSweep(a) => (Command::BlochSweep, a),
            Self::NoiseHeatmap(a) => (Command::NoiseHeatmap, a),
            Self::ThermalSweep(a) => (Command::ThermalSweep, a),
            Self::Validate(a) => (Command::Validate, a),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("integration error: {0}")]
    Integration(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Integration(_) => EXIT_INTEGRATION,
            Self::Validation(_) => EXIT_VALIDATION,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.0)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration { .. } => Self::Integration(e.to_string()),
            other => Self::Config(other.to_string()),
        }
    }
}

/// Resolves the config of a parsed command line.
pub fn resolve(cli: &Cli) -> Result<(RunConfig, PathBuf), CliError> {
    let (command, args) = cli.command.split();
    let mut overrides = args.set.clone();
    if let Some(w) = args.workers {
        overrides.push(format!("workers={w}"));
    }
    let config = RunConfig::load(command, &args.config, &overrides)?;
    Ok((config, args.out.clone()))
}

/// Runs `config` and writes its outputs into `out`; returns the written paths.
pub fn execute(config: &RunConfig, out: &std::path::Path) -> Result<Vec<PathBuf>, CliError> {
    let params = config.params();
    let summary = Summary::new(config);
    let echo = ("config.toml", config.to_toml());
    info!("{} ({}) -> {}", config.command, config.kind, out.display());
    let files = match config.command {
        Command::Dynamics => {
            let t = if config.coupling == crate::model::CouplingModel::Microscopic {
                run_dynamics(&params, config.kind, config.bloch(), ResonatorInit::from_nbar(config.nbar))?
            } else {
                let s = Scenario::new(params, config.kind, config.bloch()).with_coupling(config.coupling);
                s.run(&s.default_config()?)?
            };
            vec![("dynamics.csv", dynamics_csv(&t)), ("summary.json", summary.with_trajectory(&t).to_json()), echo]
        }
        Command::BlochSweep | Command::NoiseHeatmap | Command::ThermalSweep => {
            let grid = config.grid()?.expect("sweep grid");
            let opts = config.sweep_options();
            let (name, result) = match config.command {
                Command::BlochSweep => ("bloch.csv", bloch_sweep(&params, config.kind, &grid, &opts)?),
                Command::NoiseHeatmap => ("heatmap.csv", noise_heatmap(&params, config.kind, config.bloch(), &grid, &opts)?),
                _ => ("thermal.csv", thermal_sweep(&params, config.kind, config.bloch(), &grid, &opts)?),
            };
            vec![(name, sweep_csv(&result)), ("summary.json", summary.with_sweep(&result).to_json()), echo]
        }
        Command::Validate => {
            let report = validate(std::slice::from_ref(&params), &config.sweep_options())?;
            let files = vec![("summary.json", summary.with_validation(&report).to_json()), echo];
            write_files(out, &files)?;
            if !report.all_passed() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::Validation(failed.join(", ")));
            }
            return Ok(files.iter().map(|(n, _)| out.join(n)).collect());
        }
    };
    Ok(write_files(out, &files)?)
}

/// Entry point shared by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match resolve(&cli).and_then(|(config, out)| execute(&config, &out)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("transduce: {e}");
            e.exit_code()
        }
    }
}
