//! One module per subcommand. Each exposes a config type (unknown keys rejected),
//! a `resolve` step that validates and fills derived defaults, and `run`.

pub mod benchmarks;
pub mod convergence;
pub mod fit;
pub mod gsa;
pub mod mo_optimize;
pub mod optimize;
pub mod sample;
pub mod wasserstein;

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use gpsample::testbeds::Problem;

use crate::error::{CliError, CliResult};
use crate::output::{Manifest, OutDir};

pub const COMMANDS: [&str; 8] =
    ["fit", "convergence-study", "gsa", "optimize", "mo-optimize", "sample", "wasserstein-study", "benchmarks"];

trait Command: Serialize + DeserializeOwned + Sized {
    /// Validate and fill in derived defaults. Must be idempotent so that a
    /// resolved config replays unchanged.
    fn resolve(self) -> CliResult<Self>;
    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()>;
}

fn execute<C: Command>(name: &str, config: Value, seed: u64, out: &Path) -> CliResult<()> {
    let cfg: C = serde_json::from_value(config).map_err(|e| CliError::config(format!("{name}: {e}")))?;
    let cfg = cfg.resolve()?;
    let out = OutDir::create(out)?;
    out.write_manifest(&Manifest::new(name, seed, serde_json::to_value(&cfg)?))?;
    log::info!("{name}: seed {seed}, writing to {}", out.path("").display());
    cfg.run(seed, &out)
}

/// Run `command` with a raw JSON config.
pub fn dispatch(command: &str, config: Value, seed: u64, out: &Path) -> CliResult<()> {
    match command {
        "fit" => execute::<fit::FitConfig>(command, config, seed, out),
        "convergence-study" => execute::<convergence::ConvergenceConfig>(command, config, seed, out),
        "gsa" => execute::<gsa::GsaCmdConfig>(command, config, seed, out),
        "optimize" => execute::<optimize::OptimizeConfig>(command, config, seed, out),
        "mo-optimize" => execute::<mo_optimize::MoOptimizeConfig>(command, config, seed, out),
        "sample" => execute::<sample::SampleConfig>(command, config, seed, out),
        "wasserstein-study" => execute::<wasserstein::WassersteinStudyConfig>(command, config, seed, out),
        "benchmarks" => execute::<benchmarks::BenchmarksConfig>(command, config, seed, out),
        other => Err(CliError::config(format!("unknown command `{other}`"))),
    }
}

pub(crate) fn require_positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(format!("`{name}` must be positive, got {v}")))
    }
}

pub(crate) fn require_nonzero(name: &str, v: usize) -> CliResult<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::config(format!("`{name}` must be at least 1")))
    }
}

pub(crate) fn problem(name: &str) -> CliResult<Problem> {
    Problem::by_name(name).map_err(|_| {
        let known: Vec<String> = Problem::all().iter().map(|p| p.name().to_string()).collect();
        CliError::config(format!("unknown problem `{name}` (known: {})", known.join(", ")))
    })
}

/// Absolute form of an input path so that a manifest replays from any directory.
pub(crate) fn absolute(path: PathBuf) -> CliResult<PathBuf> {
    std::path::absolute(&path).map_err(|e| CliError::io(path, e))
}
