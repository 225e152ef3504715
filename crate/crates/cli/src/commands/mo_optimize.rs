use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gpsample::bo::initial_design;
use gpsample::kernels::KernelFamily;
use gpsample::mo::{gp_ts_mo, hypervolume, nsga2, MoCampaign, MoConfig, MultiObjective, Nsga2Config};
use gpsample::paths::PathKind;
use gpsample::rng::RngStream;
use gpsample::testbeds::Problem;

use super::{problem, require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::{columns, num, OutDir};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MoOptimizeConfig {
    pub problem: String,
    /// Latin hypercube size; defaults to ten points per dimension.
    pub n_initial: Option<usize>,
    pub iterations: usize,
    pub sampler: PathKind,
    pub family: KernelFamily,
    /// One value per objective, or a single value for all.
    pub sigma_n: Vec<f64>,
    pub n_features: usize,
    pub nsga2: Nsga2Config,
    pub fit_restarts: usize,
    pub observation_noise: f64,
    pub min_dist: f64,
    pub hvi_samples: usize,
    /// Monte Carlo samples for reported hypervolumes with three or more objectives.
    pub hv_samples: usize,
    /// Fixed reporting reference point; defaults to the problem's.
    pub reference: Option<Vec<f64>>,
    /// NSGA-II run on the true objectives whose hypervolume normalizes γ.
    pub baseline: Option<Nsga2Config>,
    pub runs: usize,
}

impl Default for MoOptimizeConfig {
    fn default() -> Self {
        let m = MoConfig::default();
        Self {
            problem: "vlmop2".into(),
            n_initial: None,
            iterations: m.iterations,
            sampler: m.sampler,
            family: m.family,
            sigma_n: m.sigma_n,
            n_features: m.n_features,
            nsga2: m.nsga2,
            fit_restarts: m.fit_restarts,
            observation_noise: m.observation_noise,
            min_dist: m.min_dist,
            hvi_samples: m.hvi_samples,
            hv_samples: 1_000_000,
            reference: None,
            baseline: None,
            runs: 1,
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    archive_size: usize,
    final_hypervolume: f64,
    final_gamma: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    problem: String,
    reference: Vec<f64>,
    baseline_hypervolume: Option<f64>,
    runs: Vec<RunSummary>,
}

fn objective(p: Problem) -> MultiObjective {
    Arc::new(move |x: &[f64]| p.eval(x))
}

impl Command for MoOptimizeConfig {
    fn resolve(mut self) -> CliResult<Self> {
        let p = problem(&self.problem)?;
        let m = p.n_objectives();
        if m < 2 {
            return Err(CliError::config(format!("`{}` has a single objective; use optimize", p.name())));
        }
        self.problem = p.name().to_string();
        let n0 = self.n_initial.unwrap_or(10 * p.dim());
        if n0 < 2 {
            return Err(CliError::config("`n_initial` must be at least 2"));
        }
        self.n_initial = Some(n0);
        if self.sigma_n.len() != 1 && self.sigma_n.len() != m {
            return Err(CliError::config(format!("`sigma_n` needs 1 or {m} values")));
        }
        for &s in &self.sigma_n {
            require_positive("sigma_n", s)?;
        }
        for (name, v) in [
            ("n_features", self.n_features),
            ("hvi_samples", self.hvi_samples),
            ("hv_samples", self.hv_samples),
            ("runs", self.runs),
        ] {
            require_nonzero(name, v)?;
        }
        require_positive("min_dist", self.min_dist)?;
        self.nsga2.validate()?;
        if let Some(b) = &self.baseline {
            b.validate()?;
        }
        let reference = match self.reference.take() {
            Some(r) => r,
            None => p.info().reference_point.ok_or_else(|| CliError::config("`reference` is required for this problem"))?,
        };
        if reference.len() != m {
            return Err(CliError::config(format!("`reference` needs {m} values")));
        }
        self.reference = Some(reference);
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let p = problem(&self.problem)?;
        let bounds = p.bounds();
        let reference = self.reference.clone().expect("resolved");
        let n0 = self.n_initial.expect("resolved");
        let cfg = MoConfig {
            family: self.family,
            sigma_n: self.sigma_n.clone(),
            n_features: self.n_features,
            iterations: self.iterations,
            nsga2: self.nsga2,
            sampler: self.sampler,
            fit_restarts: self.fit_restarts,
            observation_noise: self.observation_noise,
            min_dist: self.min_dist,
            hvi_samples: self.hvi_samples,
        };

        // baseline uses stream 0; run r uses streams 2r + 1 (design) and 2r + 2 (loop)
        let baseline = match &self.baseline {
            Some(b) => {
                let front = nsga2(|x| p.eval(x).unwrap_or_else(|_| vec![f64::NAN; reference.len()]), &bounds, b, &mut RngStream::new(seed, 0))?;
                let hv = hypervolume(&front.ys(), &reference, self.hv_samples, &mut RngStream::new(seed, u64::MAX))?.value;
                log::info!("baseline hypervolume {hv:.6}");
                Some(hv)
            }
            None => None,
        };
        let campaigns = (0..self.runs)
            .into_par_iter()
            .map(|r| {
                let init = initial_design(&bounds, n0, &mut RngStream::new(seed, 2 * r as u64 + 1));
                let mut c = MoCampaign::new(objective(p), bounds.clone(), init, reference.clone())?;
                c.set_hv_samples(self.hv_samples)?;
                if let Some(hv) = baseline {
                    c.set_baseline(hv)?;
                }
                gp_ts_mo(&mut c, &cfg, &mut RngStream::new(seed, 2 * r as u64 + 2))?;
                log::info!("run {r}: archive of {}", c.archive().len());
                Ok(c)
            })
            .collect::<gpsample::Result<Vec<_>>>()?;

        let d = p.dim();
        let m = reference.len();
        let header: Vec<String> =
            std::iter::once("run".to_string()).chain(columns("x", d)).chain(columns("y", m)).collect();
        let mut w = out.csv("archive.csv", &header)?;
        for (run, c) in campaigns.iter().enumerate() {
            for (x, y) in c.archive().points() {
                w.row(std::iter::once(run.to_string()).chain(x.iter().chain(y).map(|v| num(*v))))?;
            }
        }
        w.finish()?;

        let header = ["run", "iteration", "hypervolume", "gamma"].map(String::from).to_vec();
        let mut w = out.csv("hv_history.csv", &header)?;
        for (run, c) in campaigns.iter().enumerate() {
            for h in c.hv_history() {
                let gamma = h.gamma.map(num).unwrap_or_default();
                w.row([run.to_string(), h.iteration.to_string(), num(h.hypervolume), gamma])?;
            }
        }
        w.finish()?;

        let runs = campaigns
            .iter()
            .enumerate()
            .map(|(run, c)| {
                let last = c.hv_history().last().expect("initial record");
                RunSummary { run, archive_size: c.archive().len(), final_hypervolume: last.hypervolume, final_gamma: last.gamma }
            })
            .collect();
        out.write_json(
            "summary.json",
            &Summary { problem: self.problem.clone(), reference, baseline_hypervolume: baseline, runs },
        )
    }
}
