//! `gpsample` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
//! 4 numerical failure.

mod commands;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use error::{CliError, CliResult};
use output::Manifest;

#[derive(Debug, Parser)]
#[command(name = "gpsample", version, about = "GP posterior sample paths: studies, sensitivity analysis and optimization")]
struct Cli {
    /// JSON configuration for the command; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "gpsample-out")]
    out: PathBuf,
    /// Worker threads for independent runs; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Fit GP hyperparameters to a CSV dataset.
    Fit,
    /// Relative kernel error against the number of features.
    ConvergenceStudy,
    /// Sobol' indices from GP sample paths.
    Gsa,
    /// Single-objective Bayesian optimization.
    Optimize,
    /// Multi-objective Thompson sampling.
    MoOptimize,
    /// Posterior sample paths on a grid or query set.
    Sample,
    /// 2-Wasserstein distance of approximate posteriors.
    WassersteinStudy,
    /// Write the benchmark registry.
    Benchmarks,
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Fit => "fit",
            Cmd::ConvergenceStudy => "convergence-study",
            Cmd::Gsa => "gsa",
            Cmd::Optimize => "optimize",
            Cmd::MoOptimize => "mo-optimize",
            Cmd::Sample => "sample",
            Cmd::WassersteinStudy => "wasserstein-study",
            Cmd::Benchmarks => "benchmarks",
            Cmd::Replay { .. } => "replay",
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<Value> {
    let Some(path) = path else {
        return Ok(Value::Object(Default::default()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(CliError::config("config must be a JSON object"));
    }
    Ok(v)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Cmd::Replay { manifest } => {
            if cli.config.is_some() {
                return Err(CliError::config("replay takes its configuration from the manifest"));
            }
            let m = Manifest::load(manifest)?;
            if !commands::COMMANDS.contains(&m.command.as_str()) {
                return Err(CliError::config(format!("manifest names unknown command `{}`", m.command)));
            }
            commands::dispatch(&m.command, m.config, cli.seed.unwrap_or(m.seed), &cli.out)
        }
        cmd => commands::dispatch(cmd.name(), load_config(cli.config.as_deref())?, cli.seed.unwrap_or(0), &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
