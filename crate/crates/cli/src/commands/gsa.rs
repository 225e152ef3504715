use serde::{Deserialize, Serialize};

use gpsample::gp::{fit, Dataset, FitOptions};
use gpsample::kernels::{KernelFamily, KernelRecord};
use gpsample::rng::RngStream;
use gpsample::sobol::{gp_gsa, DimSummary, GsaConfig, GsaSampler, InputDistribution, Marginal};
use gpsample::testbeds::{Problem, TRUSS_INPUT_NAMES};

use super::{problem, require_nonzero, require_positive, Command};
use crate::error::{CliError, CliResult};
use crate::output::{num, OutDir};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GsaCmdConfig {
    pub problem: String,
    pub n_train: usize,
    pub family: KernelFamily,
    pub sigma_n: f64,
    pub restarts: usize,
    pub n_x: usize,
    pub n_paths: usize,
    pub n_features: usize,
    pub sampler: GsaSampler,
    pub pairs: usize,
    pub chunk: usize,
    /// Input marginals; defaults to the problem's own input law.
    pub inputs: Option<Vec<Marginal>>,
}

impl Default for GsaCmdConfig {
    fn default() -> Self {
        let g = GsaConfig::default();
        Self {
            problem: "ishigami".into(),
            n_train: 300,
            family: KernelFamily::SquaredExponential,
            sigma_n: 1e-4,
            restarts: 5,
            n_x: g.n_x,
            n_paths: g.n_paths,
            n_features: g.n_features,
            sampler: g.sampler,
            pairs: g.pairs,
            chunk: g.chunk,
            inputs: None,
        }
    }
}

#[derive(Serialize)]
struct IndexRow {
    input: String,
    #[serde(flatten)]
    summary: DimSummary,
}

#[derive(Serialize)]
struct Summary {
    problem: String,
    kernel: KernelRecord,
    excluded: usize,
    indices: Vec<IndexRow>,
}

fn input_names(p: Problem) -> Vec<String> {
    match p {
        Problem::TrussDisplacement => TRUSS_INPUT_NAMES.iter().map(|s| s.to_string()).collect(),
        p => (1..=p.dim()).map(|i| format!("x{i}")).collect(),
    }
}

impl Command for GsaCmdConfig {
    fn resolve(mut self) -> CliResult<Self> {
        let p = problem(&self.problem)?;
        if p.n_objectives() != 1 {
            return Err(CliError::config(format!("`{}` is multi-objective", p.name())));
        }
        self.problem = p.name().to_string();
        for (name, v) in [
            ("n_train", self.n_train),
            ("restarts", self.restarts),
            ("n_x", self.n_x),
            ("n_paths", self.n_paths),
            ("n_features", self.n_features),
            ("pairs", self.pairs),
            ("chunk", self.chunk),
        ] {
            require_nonzero(name, v)?;
        }
        require_positive("sigma_n", self.sigma_n)?;
        let dist = match self.inputs.take() {
            Some(m) => InputDistribution::new(m)?,
            None => InputDistribution::for_problem(p)?,
        };
        if dist.dim() != p.dim() {
            return Err(CliError::config(format!("{} input marginals for a {}-dimensional problem", dist.dim(), p.dim())));
        }
        self.inputs = Some(dist.marginals().to_vec());
        Ok(self)
    }

    fn run(&self, seed: u64, out: &OutDir) -> CliResult<()> {
        let p = problem(&self.problem)?;
        let dist = InputDistribution::new(self.inputs.clone().expect("resolved"))?;
        let mut rng = RngStream::new(seed, 0);
        let x = dist.sample(self.n_train, &mut rng);
        let xs: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let ys = xs.iter().map(|r| p.eval(r).map(|v| v[0])).collect::<gpsample::Result<Vec<f64>>>()?;
        let data = Dataset::new(xs, ys, p.bounds())?;
        let opts = FitOptions { restarts: self.restarts, ..FitOptions::default() };
        let gp = fit(&data, self.family, self.sigma_n, &opts, &mut rng)?;
        let cfg = GsaConfig {
            n_x: self.n_x,
            n_paths: self.n_paths,
            n_features: self.n_features,
            sampler: self.sampler,
            pairs: self.pairs,
            chunk: self.chunk,
        };
        let result = gp_gsa(&gp, &dist, &cfg, &mut rng)?;
        let names = input_names(p);

        let header = ["input", "replicate", "first", "total"].map(String::from).to_vec();
        let mut w = out.csv("gsa_values.csv", &header)?;
        for (i, name) in names.iter().enumerate() {
            for (k, (s, t)) in result.first[i].iter().zip(&result.total[i]).enumerate() {
                w.row([name.clone(), k.to_string(), num(*s), num(*t)])?;
            }
        }
        w.finish()?;

        let indices: Vec<IndexRow> =
            names.into_iter().zip(result.summary()).map(|(input, summary)| IndexRow { input, summary }).collect();
        for r in &indices {
            log::info!("{}: S {:.4} ST {:.4}", r.input, r.summary.S_median, r.summary.ST_median);
        }
        let summary = Summary {
            problem: self.problem.clone(),
            kernel: KernelRecord::from_spec(gp.kernel(), gp.sigma_n()),
            excluded: result.excluded,
            indices,
        };
        out.write_json("gsa_summary.json", &summary)
    }
}
