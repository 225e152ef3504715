use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use gpsample::bo::initial_design;
use gpsample::gp::{fit, Dataset, FitOptions, FittedGP};
use gpsample::kernels::{KernelFamily, KernelRecord};
use gpsample::paths::{build_rff, draw_path_batch, PathKind};
use gpsample::rng::RngStream;

use super::fit::ModelFile;
use super::{absolute, problem, require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::{columns, num, OutDir};

/// Largest number of query points generated from `grid`.
const MAX_GRID: usize = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Training CSV (`x1,…,xd,y`); exclusive with `problem`.
    pub data: Option<PathBuf>,
    /// Benchmark evaluated at `n_train` Latin hypercube points.
    pub problem: Option<String>,
    pub n_train: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
    /// `model.json` from `fit`; skips hyperparameter fitting.
    pub model: Option<PathBuf>,
    pub family: KernelFamily,
    pub sigma_n: f64,
    pub restarts: usize,
    pub n_paths: usize,
    pub n_features: usize,
    pub sampler: PathKind,
    /// Query CSV with header `x1,…,xd`; otherwise a tensor grid.
    pub query: Option<PathBuf>,
    /// Grid points per dimension.
    pub grid: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            data: None,
            problem: None,
            n_train: 20,
            bounds: None,
            model: None,
            family: KernelFamily::SquaredExponential,
            sigma_n: 1e-3,
            restarts: 5,
            n_paths: 10,
            n_features: 2000,
            sampler: PathKind::Pathwise,
            query: None,
            grid: 101,
        }
    }
}

fn read_query(path: &Path, d: usize) -> CliResult<Vec<Vec<f64>>> {
    let data_err = |m: String| CliError::Core(gpsample::Error::InvalidData(format!("{}: {m}", path.display())));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data_err(e.to_string()))?;
    let header = rdr.headers().map_err(|e| data_err(e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(columns("x", d).iter().map(String::as_str)) {
        return Err(data_err(format!("expected header {}", columns("x", d).join(","))));
    }
    let rows = rdr
        .records()
        .map(|rec| {
            let rec = rec.map_err(|e| data_err(e.to_string()))?;
            rec.iter().map(|s| s.trim().parse::<f64>().map_err(|e| data_err(format!("`{s}`: {e}")))).collect()
        })
        .collect::<CliResult<Vec<Vec<f64>>>>()?;
    if rows.is_empty() {
        return Err(CliError::Core(gpsample::Error::EmptyData));
    }
    Ok(rows)
}

fn tensor_grid(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(bounds.len() as u32);
    (0..total)
        .map(|mut k| {
            bounds
                .iter()
                .map(|&(lo, hi)| {
                    let i = k % n;
                    k /= n;
                    if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }
                })
                .collect()
        })
        .collect()
}

impl SampleConfig {
    fn training_data(&self, rng: &mut RngStream) -> CliResult<Dataset> {
        match (&self.data, &self.problem) {
            (Some(path), None) => Ok(Dataset::from_csv(path, self.bounds.clone())?),
            (None, Some(name)) => {
                let p = problem(name)?;
                let bounds = p.bounds();
                let xs = initial_design(&bounds, self.n_train, rng);
                let ys = xs.iter().map(|x| p.eval(x).map(|v| v[0])).collect::<gpsample::Result<Vec<f64>>>()?;
                Ok(Dataset::new(xs, ys, self.bounds.clone().unwrap_or(bounds))?)
            }
            _ => unreachable!("checked in resolve"),
        }
    }

    fn model(&self, data: Dataset, rng: &mut RngStream) -> CliResult<FittedGP> {
        match &self.model {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let file: ModelFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Core(gpsample::Error::InvalidData(format!("{}: {e}", path.display()))))?;
                let (spec, sigma_n) = KernelRecord::to_spec(&file.kernel)?;
                Ok(FittedGP::new(data, spec, sigma_n)?)
            }
            None => {
                let opts = FitOptions { restarts: self.restarts, ..FitOptions::default() };
                Ok(fit(&data, self.family, self.sigma_n, &opts, rng)?)
            }
        }
    }
}

impl Command for SampleConfig {
    fn resolve(mut self) -> CliResult<Self> {
        match (&self.data, &self.problem) {
            (Some(_), None) => {}
            (None, Some(name)) => {
                let p = problem(name)?;
                if p.n_objectives() != 1 {
                    return Err(CliError::config(format!("`{}` is multi-objective", p.name())));
                }
                self.problem = Some(p.name().to_string());
                if self.n_train < 2 {
                    return Err(CliError::config("`n_train` must be at least 2"));
                }
            }
            _ => return Err(CliError::config("give exactly one of `data` and `problem`")),
        }
        self.data = self.data.take().map(absolute).transpose()?;
        self.model = self.model.take().map(absolute).transpose()?;
        self.query = self.query.take().map(absolute).transpose()?;
        require_positive("sigma_n", self.sigma_n)?;
        for (name, v) in [("restarts", self.restarts), ("n_paths", self.n_paths), ("n_features", self.n_features), ("grid", self.grid)] {
            require_nonzero(name, v)?;
        }
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let mut rng = RngStream::new(seed, 0);
        let data = self.training_data(&mut rng)?;
        let d = data.dim();
        let bounds = data.bounds().to_vec();
        let gp = self.model(data, &mut rng)?;
        if gp.dim() != d {
            return Err(CliError::Core(gpsample::Error::DimensionMismatch { expected: d, got: gp.dim() }));
        }
        let queries = match &self.query {
            Some(path) => read_query(path, d)?,
            None => {
                if (self.grid as f64).powi(d as i32) > MAX_GRID as f64 {
                    return Err(CliError::config(format!("grid of {}^{d} points is too large; pass `query`", self.grid)));
                }
                tensor_grid(&bounds, self.grid)
            }
        };
        let xq = DMatrix::from_fn(queries.len(), d, |i, j| gp.data().normalize_x(&queries[i])[j]);
        let post = gp.predict(&xq)?;
        let fmap = Arc::new(build_rff(gp.kernel(), self.n_features, &mut rng)?);
        let batch = draw_path_batch(&gp, fmap, self.sampler, self.n_paths, &mut rng)?;
        let values = batch.eval(&xq)?;

        let data = gp.data();
        let header: Vec<String> = columns("x", d)
            .into_iter()
            .chain(["mean".to_string(), "sd".to_string()])
            .chain(columns("path", self.n_paths))
            .collect();
        let mut w = out.csv("samples.csv", &header)?;
        let var = post.variances();
        for (i, x) in queries.iter().enumerate() {
            let mean = data.denormalize_y(post.mean()[i]);
            let sd = var[i].max(0.0).sqrt() * data.y_std();
            let paths = values.row(i).iter().map(|v| data.denormalize_y(*v)).collect::<Vec<_>>();
            w.row(x.iter().copied().chain([mean, sd]).chain(paths).map(num))?;
        }
        w.finish()
    }
}
