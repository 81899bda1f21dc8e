//! `qfpme`: steady states, dynamics and signal statistics of continuously
//! monitored quantum systems from a JSON run configuration.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qfpme::QfpmeError;

use config::{apply_overrides, RunConfig};
use output::Sink;

#[derive(Parser)]
#[command(name = "qfpme", version, about = "Quantum Fokker-Planck master equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration (or a previous output file to re-run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config entry, e.g. `--set model.params.lambda=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Directory for output files; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and trajectory ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Steady state summary as JSON.
    Steady,
    /// Signal mean, variance and populations over time.
    Evolve,
    /// Signal distribution P(D).
    Distribution,
    /// Signal moments.
    Moments,
    /// Mutual information between signal and system.
    MutualInfo,
    /// Signal-observable covariances.
    Covariance,
    /// Two-time correlation of the filtered signal.
    Correlation,
    /// Fisher information over a (lambda, gamma) grid.
    Fisher,
    /// Weak-feedback perturbation series against the exact steady state.
    Perturb,
    /// Stochastic trajectory histograms.
    Trajectories,
    /// Cross-check solvers and trajectories on the configured model.
    Validate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(QfpmeError),
    ValidationFailed,
}

impl From<QfpmeError> for CliError {
    fn from(e: QfpmeError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::ValidationFailed => 3,
        }
    }

    fn report(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("config".to_string(), m.clone()),
            CliError::Numerical(e) => (e.kind().to_string(), e.to_string()),
            CliError::ValidationFailed => ("validation".to_string(), "one or more checks failed".to_string()),
        };
        json!({ "error": kind, "message": message, "exit_code": self.exit_code() })
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => json!({}),
    };
    let mut value = apply_overrides(base, &cli.sets)?;
    if let Some(seed) = cli.seed {
        value = apply_overrides(value, &[format!("seed={seed}")])?;
    }
    let cfg = RunConfig::from_value(value)?;
    let sink = Sink::new(cli.out.clone())?;
    match cli.command {
        Command::Steady => commands::steady(&cfg, &sink),
        Command::Evolve => commands::evolve(&cfg, &sink),
        Command::Distribution => commands::distribution(&cfg, &sink),
        Command::Moments => commands::moments(&cfg, &sink),
        Command::MutualInfo => commands::mutual_info(&cfg, &sink),
        Command::Covariance => commands::covariance(&cfg, &sink),
        Command::Correlation => commands::correlation(&cfg, &sink),
        Command::Fisher => commands::fisher(&cfg, &sink),
        Command::Perturb => commands::perturb(&cfg, &sink),
        Command::Trajectories => commands::trajectories(&cfg, &sink),
        Command::Validate => {
            if commands::validate(&cfg, &sink)? {
                Ok(())
            } else {
                Err(CliError::ValidationFailed)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
