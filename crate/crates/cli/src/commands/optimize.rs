use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gpsample::bo::{gp_ts_so, initial_design, Acquisition, BoCampaign, IterationRecord, MultiStart, Objective, TsConfig};
use gpsample::kernels::KernelFamily;
use gpsample::rng::RngStream;

use super::{problem, require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::OutDir;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub problem: String,
    /// Latin hypercube size; defaults to ten points per dimension.
    pub n_initial: Option<usize>,
    pub iterations: usize,
    /// `ts_pc`, `ts_rff`, `ei`, `pi` or `lcb`.
    pub acquisition: String,
    pub lcb_beta: f64,
    pub family: KernelFamily,
    pub sigma_n: f64,
    pub n_features: usize,
    pub n_starts: usize,
    pub min_dist: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    pub fit_restarts: usize,
    pub observation_noise: f64,
    /// Independent repetitions, each with its own initial design.
    pub runs: usize,
    /// Subtracted from `y_min` in the reported log10 gap. Required when the
    /// problem has no known minimum.
    pub reference_value: Option<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let ts = TsConfig::default();
        Self {
            problem: "schwefel".into(),
            n_initial: None,
            iterations: ts.iterations,
            acquisition: "ts_pc".into(),
            lcb_beta: 2.0,
            family: ts.family,
            sigma_n: ts.sigma_n,
            n_features: ts.n_features,
            n_starts: ts.inner.n_starts,
            min_dist: ts.inner.min_dist,
            inner_max_iter: ts.inner.max_iter,
            inner_tol: ts.inner.tol,
            fit_restarts: ts.fit_restarts,
            observation_noise: ts.observation_noise,
            runs: 1,
            reference_value: None,
        }
    }
}

impl OptimizeConfig {
    fn acquisition(&self) -> CliResult<Acquisition> {
        let a = match self.acquisition.to_ascii_lowercase().as_str() {
            "ts_pc" => Acquisition::TsPc,
            "ts_rff" => Acquisition::TsRff,
            "ei" => Acquisition::Ei,
            "pi" => Acquisition::Pi,
            "lcb" => Acquisition::Lcb { beta: self.lcb_beta },
            other => return Err(CliError::config(format!("unknown acquisition `{other}`"))),
        };
        a.validate()?;
        Ok(a)
    }

    fn ts_config(&self) -> CliResult<TsConfig> {
        Ok(TsConfig {
            family: self.family,
            sigma_n: self.sigma_n,
            n_features: self.n_features,
            iterations: self.iterations,
            acquisition: self.acquisition()?,
            inner: MultiStart { n_starts: self.n_starts, min_dist: self.min_dist, max_iter: self.inner_max_iter, tol: self.inner_tol },
            fit_restarts: self.fit_restarts,
            observation_noise: self.observation_noise,
        })
    }
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    run: usize,
    #[serde(flatten)]
    record: &'a IterationRecord,
    log10_gap: f64,
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    initial_best: f64,
    best_y: f64,
    best_x: Vec<f64>,
    log10_gap: f64,
}

#[derive(Serialize)]
struct Summary {
    problem: String,
    acquisition: String,
    reference_value: f64,
    runs: Vec<RunSummary>,
}

/// Wall-clock seconds per run, kept out of the results so replays compare equal.
#[derive(Serialize)]
struct Timing {
    seconds: Vec<f64>,
}

impl Command for OptimizeConfig {
    fn resolve(mut self) -> CliResult<Self> {
        let p = problem(&self.problem)?;
        if p.n_objectives() != 1 {
            return Err(CliError::config(format!("`{}` is multi-objective; use mo-optimize", p.name())));
        }
        self.problem = p.name().to_string();
        self.acquisition = self.acquisition.to_ascii_lowercase();
        self.acquisition()?;
        let n0 = self.n_initial.unwrap_or(10 * p.dim());
        if n0 < 2 {
            return Err(CliError::config("`n_initial` must be at least 2"));
        }
        self.n_initial = Some(n0);
        let known = p.info().minimum;
        let c_star = self.reference_value.or(known).ok_or_else(|| {
            CliError::config(format!("`{}` has no known minimum; set `reference_value`", p.name()))
        })?;
        self.reference_value = Some(c_star);
        for (name, v) in [("n_features", self.n_features), ("n_starts", self.n_starts), ("runs", self.runs)] {
            require_nonzero(name, v)?;
        }
        require_positive("sigma_n", self.sigma_n)?;
        require_positive("min_dist", self.min_dist)?;
        require_positive("inner_tol", self.inner_tol)?;
        if !(self.observation_noise >= 0.0) {
            return Err(CliError::config("`observation_noise` must be non-negative"));
        }
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let p = problem(&self.problem)?;
        let bounds = p.bounds();
        let ts = self.ts_config()?;
        let objective: Objective = Arc::new(move |x: &[f64]| Ok(p.eval(x)?[0]));
        let n0 = self.n_initial.expect("resolved");
        let c_star = self.reference_value.expect("resolved");
        let gap = |y: f64| (y - c_star).log10();
        // run r uses streams 2r (design) and 2r + 1 (loop), independent of thread count
        let campaigns = (0..self.runs)
            .into_par_iter()
            .map(|r| {
                let started = Instant::now();
                let init = initial_design(&bounds, n0, &mut RngStream::new(seed, 2 * r as u64));
                let mut c = BoCampaign::new(objective.clone(), bounds.clone(), init)?;
                let initial_best = c.best().1;
                gp_ts_so(&mut c, &ts, &mut RngStream::new(seed, 2 * r as u64 + 1))?;
                log::info!("run {r}: best {:.6e}", c.best().1);
                Ok((initial_best, c, started.elapsed().as_secs_f64()))
            })
            .collect::<gpsample::Result<Vec<_>>>()?;

        let mut hist = out.jsonl("history.jsonl")?;
        for (run, (_, c, _)) in campaigns.iter().enumerate() {
            for record in c.history() {
                hist.record(&HistoryLine { run, record, log10_gap: gap(record.y_min) })?;
            }
        }
        hist.finish()?;
        let runs = campaigns
            .iter()
            .enumerate()
            .map(|(run, (initial_best, c, _))| RunSummary {
                run,
                initial_best: *initial_best,
                best_y: c.best().1,
                best_x: c.best().0.to_vec(),
                log10_gap: gap(c.best().1),
            })
            .collect();
        let summary = Summary {
            problem: self.problem.clone(),
            acquisition: self.acquisition.clone(),
            reference_value: c_star,
            runs,
        };
        out.write_json("summary.json", &summary)?;
        out.write_json("timing.json", &Timing { seconds: campaigns.iter().map(|c| c.2).collect() })
    }
}
