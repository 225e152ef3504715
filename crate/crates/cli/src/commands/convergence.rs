use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use gpsample::kernels::{KernelFamily, KernelSpec};
use gpsample::paths::studies::{convergence_study, ConvergenceConfig as StudyConfig, UniformGrid};
use gpsample::paths::FeatureKind;
use gpsample::rng::RngStream;

use super::{require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::{num, OutDir};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub family: KernelFamily,
    pub sigma_f: f64,
    pub lengthscale: f64,
    pub grid: GridSpec,
    /// Any of `rff`, `qmc`, `mercer`, `hilbert`.
    pub methods: Vec<String>,
    pub n_features: Vec<usize>,
    pub repeats: usize,
    pub mercer_sigma: f64,
    /// Defaults to three times the largest absolute grid coordinate.
    pub hilbert_half_width: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            sigma_f: 1.0,
            lengthscale: 5f64.sqrt(),
            grid: GridSpec { lo: -10.0, hi: 10.0, n: 1000 },
            methods: FeatureKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            n_features: vec![4, 8, 16, 32, 64, 128],
            repeats: 100,
            mercer_sigma: 3f64.sqrt() / 2.0,
            hilbert_half_width: None,
        }
    }
}

#[derive(Serialize)]
struct Slopes {
    slopes: BTreeMap<&'static str, f64>,
}

impl ConvergenceConfig {
    fn kinds(&self) -> CliResult<Vec<FeatureKind>> {
        self.methods.iter().map(|m| FeatureKind::from_name(m).map_err(|_| CliError::config(format!("unknown method `{m}`")))).collect()
    }
}

impl Command for ConvergenceConfig {
    fn resolve(mut self) -> CliResult<Self> {
        require_positive("sigma_f", self.sigma_f)?;
        require_positive("lengthscale", self.lengthscale)?;
        require_positive("mercer_sigma", self.mercer_sigma)?;
        require_nonzero("repeats", self.repeats)?;
        UniformGrid::new(self.grid.lo, self.grid.hi, self.grid.n).map_err(CliError::config)?;
        if self.methods.is_empty() || self.n_features.is_empty() || self.n_features.contains(&0) {
            return Err(CliError::config("`methods` and `n_features` must be non-empty and positive"));
        }
        self.kinds()?;
        let hw = self.hilbert_half_width.unwrap_or(3.0 * self.grid.lo.abs().max(self.grid.hi.abs()));
        require_positive("hilbert_half_width", hw)?;
        self.hilbert_half_width = Some(hw);
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let cfg = StudyConfig {
            kernel: KernelSpec::isotropic(self.family, self.sigma_f, self.lengthscale, 1)?,
            grid: UniformGrid::new(self.grid.lo, self.grid.hi, self.grid.n)?,
            methods: self.kinds()?,
            n_features: self.n_features.clone(),
            repeats: self.repeats,
            mercer_sigma: self.mercer_sigma,
            hilbert_half_width: self.hilbert_half_width.expect("resolved"),
        };
        let s = convergence_study(&cfg, &RngStream::new(seed, 0))?;
        let header: Vec<String> =
            ["method", "n_features", "repeats", "mean", "median", "q05", "q95"].map(String::from).to_vec();
        let mut w = out.csv("convergence.csv", &header)?;
        for r in &s.rows {
            w.row([
                r.method.to_string(),
                r.n_features.to_string(),
                r.repeats.to_string(),
                num(r.mean),
                num(r.median),
                num(r.q05),
                num(r.q95),
            ])?;
        }
        w.finish()?;
        for (m, v) in &s.slopes {
            log::info!("{m}: log-log slope {v:.3}");
        }
        out.write_json("slopes.json", &Slopes { slopes: s.slopes.iter().copied().collect() })
    }
}
