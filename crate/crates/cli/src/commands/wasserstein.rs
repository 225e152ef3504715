use serde::{Deserialize, Serialize};

use gpsample::gp::FitOptions;
use gpsample::paths::studies::{wasserstein_study, WassersteinConfig};
use gpsample::rng::RngStream;
use gpsample::stats::median;

use super::{require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::{num, OutDir};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WassersteinStudyConfig {
    pub n_train: Vec<usize>,
    pub n_features: usize,
    pub n_query: usize,
    pub realizations: usize,
    pub sigma_n: f64,
    pub train_interval: (f64, f64),
    pub restarts: usize,
    pub rank_tol: f64,
}

impl Default for WassersteinStudyConfig {
    fn default() -> Self {
        let w = WassersteinConfig::default();
        Self {
            n_train: w.n_train,
            n_features: w.n_features,
            n_query: w.n_query,
            realizations: w.realizations,
            sigma_n: w.sigma_n,
            train_interval: w.train_interval,
            restarts: w.fit.restarts,
            rank_tol: w.rank_tol,
        }
    }
}

#[derive(Serialize)]
struct MedianRow {
    n_train: usize,
    method: &'static str,
    median: f64,
}

#[derive(Serialize)]
struct Summary {
    medians: Vec<MedianRow>,
}

impl Command for WassersteinStudyConfig {
    fn resolve(self) -> CliResult<Self> {
        if self.n_train.is_empty() || self.n_train.iter().any(|&n| n < 2) {
            return Err(CliError::config("`n_train` needs sizes of at least 2"));
        }
        for (name, v) in [
            ("n_features", self.n_features),
            ("n_query", self.n_query),
            ("realizations", self.realizations),
            ("restarts", self.restarts),
        ] {
            require_nonzero(name, v)?;
        }
        require_positive("sigma_n", self.sigma_n)?;
        require_positive("rank_tol", self.rank_tol)?;
        let (lo, hi) = self.train_interval;
        if !(lo < hi && (-10.0..=10.0).contains(&lo) && (-10.0..=10.0).contains(&hi)) {
            return Err(CliError::config("`train_interval` must be an increasing pair inside [-10, 10]"));
        }
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let cfg = WassersteinConfig {
            n_train: self.n_train.clone(),
            n_features: self.n_features,
            n_query: self.n_query,
            realizations: self.realizations,
            sigma_n: self.sigma_n,
            train_interval: self.train_interval,
            fit: FitOptions { restarts: self.restarts, ..WassersteinConfig::default().fit },
            rank_tol: self.rank_tol,
        };
        let rows = wasserstein_study(&cfg, &RngStream::new(seed, 0))?;
        let header = ["n_train", "method", "realization", "distance"].map(String::from).to_vec();
        let mut w = out.csv("wasserstein.csv", &header)?;
        for r in &rows {
            w.row([r.n_train.to_string(), r.method.to_string(), r.realization.to_string(), num(r.distance)])?;
        }
        w.finish()?;
        let mut medians = Vec::new();
        for &n in &self.n_train {
            for method in ["pc", "rff"] {
                let v: Vec<f64> = rows.iter().filter(|r| r.n_train == n && r.method == method).map(|r| r.distance).collect();
                if !v.is_empty() {
                    log::info!("N = {n}: {method} median {:.4e}", median(&v));
                    medians.push(MedianRow { n_train: n, method, median: median(&v) });
                }
            }
        }
        out.write_json("summary.json", &Summary { medians })
    }
}
