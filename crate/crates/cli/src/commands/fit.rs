use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use gpsample::gp::{fit, Dataset, FitOptions};
use gpsample::kernels::{KernelFamily, KernelRecord};
use gpsample::rng::RngStream;

use super::{absolute, require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// CSV with header `x1,…,xd,y`.
    pub data: Option<PathBuf>,
    /// Input box used for normalization; defaults to the data range.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub family: KernelFamily,
    pub sigma_n: f64,
    pub fit_noise: bool,
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { data: None, bounds: None, family: KernelFamily::SquaredExponential, sigma_n: 1e-3, fit_noise: false, restarts: 10 }
    }
}

/// Contents of `model.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub kernel: KernelRecord,
    pub log_marginal_likelihood: f64,
    /// Squared ratio of the largest to smallest Cholesky diagonal entry; a lower
    /// bound on the condition number of the noisy Gram matrix.
    pub condition_estimate: f64,
    pub n: usize,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Command for FitConfig {
    fn resolve(mut self) -> CliResult<Self> {
        let data = self.data.take().ok_or_else(|| CliError::config("`data` is required"))?;
        self.data = Some(absolute(data)?);
        require_positive("sigma_n", self.sigma_n)?;
        require_nonzero("restarts", self.restarts)?;
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let data = Dataset::from_csv(self.data.as_deref().expect("resolved"), self.bounds.clone())?;
        let opts = FitOptions { restarts: self.restarts, fit_noise: self.fit_noise, ..FitOptions::default() };
        let gp = fit(&data, self.family, self.sigma_n, &opts, &mut RngStream::new(seed, 0))?;
        let diag = gp.factor().l_ref().diagonal();
        let model = ModelFile {
            kernel: KernelRecord::from_spec(gp.kernel(), gp.sigma_n()),
            log_marginal_likelihood: gp.log_marginal_likelihood(),
            condition_estimate: (diag.max() / diag.min()).powi(2),
            n: data.len(),
            dim: data.dim(),
            bounds: data.bounds().to_vec(),
            y_mean: data.y_mean(),
            y_std: data.y_std(),
        };
        log::info!("log marginal likelihood {:.4}", model.log_marginal_likelihood);
        out.write_json("model.json", &model)
    }
}
