//! Variance-based sensitivity indices from pick-freeze designs, for direct model
//! evaluations and for GP posterior sample paths.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gp::FittedGP;
use crate::paths::{build_rff, draw_path_batch, PathKind};
use crate::rng::RngStream;
use crate::stats::{iqr, median};
use crate::testbeds::{Problem, TRUSS_AREA_RANGES, TRUSS_GAUSSIAN_INPUTS};

/// Output variance below which indices are undefined.
pub const MIN_VARIANCE: f64 = 1e-12;

/// Marginal law of one independent input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl Marginal {
    /// Gaussian with standard deviation `mean · cv`.
    pub fn gaussian_cv(mean: f64, cv: f64) -> Self {
        Marginal::Gaussian { mean, std: (mean * cv).abs() }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { lower, upper } if !(lower.is_finite() && upper.is_finite() && lower < upper) => {
                Err(Error::InvalidDistribution(format!("uniform bounds ({lower}, {upper})")))
            }
            Marginal::Gaussian { mean, std } if !(mean.is_finite() && std.is_finite() && std > 0.0) => {
                Err(Error::InvalidDistribution(format!("gaussian mean {mean}, std {std}")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => rng.uniform_in(lower, upper),
            Marginal::Gaussian { mean, std } => mean + std * rng.normal(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => 0.5 * (lower + upper),
            Marginal::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Marginal::Gaussian { std, .. } => std * std,
        }
    }
}

/// Independent marginals, one per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Marginal>", into = "Vec<Marginal>")]
pub struct InputDistribution(Vec<Marginal>);

impl TryFrom<Vec<Marginal>> for InputDistribution {
    type Error = Error;
    fn try_from(v: Vec<Marginal>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<InputDistribution> for Vec<Marginal> {
    fn from(d: InputDistribution) -> Self {
        d.0
    }
}

impl InputDistribution {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidDistribution("no marginals".into()));
        }
        marginals.iter().try_for_each(Marginal::validate)?;
        Ok(Self(marginals))
    }

    pub fn uniform(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(bounds.iter().map(|&(lower, upper)| Marginal::Uniform { lower, upper }).collect())
    }

    /// Input law used for sensitivity studies of `problem`: the probabilistic truss
    /// inputs for the displacement model, uniform on the bounds otherwise.
    pub fn for_problem(problem: Problem) -> Result<Self> {
        match problem {
            Problem::TrussDisplacement => Self::new(
                TRUSS_GAUSSIAN_INPUTS
                    .iter()
                    .map(|&(mean, cv)| Marginal::gaussian_cv(mean, cv))
                    .chain(TRUSS_AREA_RANGES.iter().map(|&(lower, upper)| Marginal::Uniform { lower, upper }))
                    .collect(),
            ),
            p => Self::uniform(&p.bounds()),
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.0
    }

    /// `n x d` matrix of independent draws, filled row by row.
    pub fn sample(&self, n: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(n, d);
        for i in 0..n {
            for (j, marg) in self.0.iter().enumerate() {
                m[(i, j)] = marg.sample(rng);
            }
        }
        m
    }
}

/// Independent design matrices `A` and `B`; hybrids `A_B^(i)` are built on demand.
#[derive(Debug, Clone)]
pub struct PickFreezeMatrices {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl PickFreezeMatrices {
    pub fn generate(dist: &InputDistribution, n_x: usize, rng: &mut RngStream) -> Result<Self> {
        if n_x < 2 {
            return Err(Error::InvalidArgument("N_x must be at least 2".into()));
        }
        let a = dist.sample(n_x, rng);
        let b = dist.sample(n_x, rng);
        Ok(Self { a, b })
    }

    pub fn from_parts(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_dim(a.nrows(), b.nrows())?;
        check_dim(a.ncols(), b.ncols())?;
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `A` with column `i` taken from `B`.
    pub fn hybrid(&self, i: usize) -> DMatrix<f64> {
        let mut m = self.a.clone();
        m.set_column(i, &self.b.column(i));
        m
    }

    /// Apply `f` to every row of both matrices (e.g. a change of coordinates).
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let map = |m: &DMatrix<f64>| {
            let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| f(&m.row(i).iter().copied().collect::<Vec<_>>())).collect();
            DMatrix::from_fn(m.nrows(), rows[0].len(), |i, j| rows[i][j])
        };
        Self { a: map(&self.a), b: map(&self.b) }
    }
}

/// First-order and total-effect indices of one output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Indices {
    pub first: Vec<f64>,
    pub total: Vec<f64>,
}

/// Streaming sums for the pick-freeze estimators of several outputs at once
/// (one per column of the evaluated blocks).
///
/// Outputs are centered by the pooled mean of `c(A)` and `c(B)`, which makes the
/// estimates invariant to adding a constant.
#[derive(Debug, Clone)]
struct Accumulator {
    d: usize,
    n: usize,
    shift: Option<Vec<f64>>,
    /// Σ (f - shift) and Σ (f - shift)² over A and B
    s1: Vec<f64>,
    s2: Vec<f64>,
    /// indexed `[i * outputs + k]`: Σ f_B·Δ, Σ Δ, Σ Δ² with Δ = f_{AB_i} - f_A
    cross: Vec<f64>,
    dsum: Vec<f64>,
    dsq: Vec<f64>,
}

impl Accumulator {
    fn new(d: usize, outputs: usize) -> Self {
        Self {
            d,
            n: 0,
            shift: None,
            s1: vec![0.0; outputs],
            s2: vec![0.0; outputs],
            cross: vec![0.0; d * outputs],
            dsum: vec![0.0; d * outputs],
            dsq: vec![0.0; d * outputs],
        }
    }

    fn outputs(&self) -> usize {
        self.s1.len()
    }

    /// Rows of `c(A)` and `c(B)` for the next chunk.
    fn add_base(&mut self, fa: &DMatrix<f64>, fb: &DMatrix<f64>) {
        let shift = self.shift.get_or_insert_with(|| fa.row(0).iter().copied().collect());
        for k in 0..fa.ncols() {
            let (mut s1, mut s2) = (0.0, 0.0);
            for v in fa.column(k).iter().chain(fb.column(k).iter()) {
                let t = v - shift[k];
                s1 += t;
                s2 += t * t;
            }
            self.s1[k] += s1;
            self.s2[k] += s2;
        }
        self.n += fa.nrows();
    }

    /// Rows of `c(A_B^(i))` matching the last [`add_base`](Self::add_base) chunk.
    fn add_hybrid(&mut self, i: usize, fa: &DMatrix<f64>, fb: &DMatrix<f64>, fab: &DMatrix<f64>) {
        let m = self.outputs();
        let shift = self.shift.as_ref().expect("base added first");
        for k in 0..m {
            let (mut c, mut s, mut q) = (0.0, 0.0, 0.0);
            for ((a, b), h) in fa.column(k).iter().zip(fb.column(k).iter()).zip(fab.column(k).iter()) {
                let delta = h - a;
                c += (b - shift[k]) * delta;
                s += delta;
                q += delta * delta;
            }
            self.cross[i * m + k] += c;
            self.dsum[i * m + k] += s;
            self.dsq[i * m + k] += q;
        }
    }

    /// Indices per output, or `DegenerateVariance` for outputs with no spread.
    fn finish(&self) -> Vec<Result<Indices>> {
        let m = self.outputs();
        let n = self.n as f64;
        (0..m)
            .map(|k| {
                let mean = self.s1[k] / (2.0 * n);
                let var = self.s2[k] / (2.0 * n) - mean * mean;
                if !(var >= MIN_VARIANCE) {
                    return Err(Error::DegenerateVariance(var));
                }
                let first = (0..self.d)
                    .map(|i| (self.cross[i * m + k] - mean * self.dsum[i * m + k]) / n / var)
                    .collect();
                let total = (0..self.d).map(|i| self.dsq[i * m + k] / (2.0 * n) / var).collect();
                Ok(Indices { first, total })
            })
            .collect()
    }
}

/// Direct pick-freeze estimate for a model evaluated in batches of rows.
pub fn estimate_indices<F>(f: F, pf: &PickFreezeMatrices) -> Result<Indices>
where
    F: Fn(&DMatrix<f64>) -> Result<DVector<f64>>,
{
    let as_col = |v: DVector<f64>| -> Result<DMatrix<f64>> {
        check_dim(pf.n(), v.len())?;
        Ok(DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    };
    let fa = as_col(f(pf.a())?)?;
    let fb = as_col(f(pf.b())?)?;
    let mut acc = Accumulator::new(pf.dim(), 1);
    acc.add_base(&fa, &fb);
    for i in 0..pf.dim() {
        let fab = as_col(f(&pf.hybrid(i))?)?;
        acc.add_hybrid(i, &fa, &fb, &fab);
    }
    acc.finish().pop().expect("one output")
}

/// Row-wise wrapper for a scalar model.
pub fn rowwise<M>(model: M) -> impl Fn(&DMatrix<f64>) -> Result<DVector<f64>>
where
    M: Fn(&[f64]) -> Result<f64>,
{
    move |x: &DMatrix<f64>| {
        let mut row = vec![0.0; x.ncols()];
        let vals = (0..x.nrows())
            .map(|i| {
                row.iter_mut().zip(x.row(i).iter()).for_each(|(r, v)| *r = *v);
                model(&row)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(DVector::from_vec(vals))
    }
}

/// Settings of a GP-based sensitivity analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsaConfig {
    pub n_x: usize,
    pub n_paths: usize,
    pub n_features: usize,
    pub sampler: GsaSampler,
    pub pairs: usize,
    /// Rows evaluated per block.
    pub chunk: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GsaSampler {
    Rff,
    Pc,
}

impl From<GsaSampler> for PathKind {
    fn from(s: GsaSampler) -> Self {
        match s {
            GsaSampler::Rff => PathKind::WeightSpace,
            GsaSampler::Pc => PathKind::Pathwise,
        }
    }
}

impl Default for GsaConfig {
    fn default() -> Self {
        Self { n_x: 10_000, n_paths: 200, n_features: 2000, sampler: GsaSampler::Pc, pairs: 10, chunk: 1024 }
    }
}

/// Index values of every (path, pair) combination, per dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityResult {
    /// `first[i]` holds all first-order values of input `i`.
    pub first: Vec<Vec<f64>>,
    pub total: Vec<Vec<f64>>,
    /// (path, pair) combinations dropped for degenerate variance.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct DimSummary {
    pub S_median: f64,
    pub S_iqr: f64,
    pub ST_median: f64,
    pub ST_iqr: f64,
}

impl SensitivityResult {
    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn first_medians(&self) -> Vec<f64> {
        self.first.iter().map(|v| median(v)).collect()
    }

    pub fn total_medians(&self) -> Vec<f64> {
        self.total.iter().map(|v| median(v)).collect()
    }

    pub fn summary(&self) -> Vec<DimSummary> {
        self.first
            .iter()
            .zip(&self.total)
            .map(|(s, t)| DimSummary { S_median: median(s), S_iqr: iqr(s), ST_median: median(t), ST_iqr: iqr(t) })
            .collect()
    }
}

/// Sensitivity indices of GP posterior paths. Each pick-freeze pair gets its own
/// feature map, shared by all `n_paths` paths of that pair.
pub fn gp_gsa(gp: &FittedGP, dist: &InputDistribution, cfg: &GsaConfig, rng: &mut RngStream) -> Result<SensitivityResult> {
    check_dim(gp.dim(), dist.dim())?;
    if cfg.n_paths == 0 || cfg.pairs == 0 || cfg.n_features == 0 || cfg.chunk == 0 {
        return Err(Error::InvalidArgument("paths, pairs, features and chunk must be positive".into()));
    }
    let d = dist.dim();
    let mut result = SensitivityResult { first: vec![Vec::new(); d], total: vec![Vec::new(); d], excluded: 0 };
    for _ in 0..cfg.pairs {
        let pf = PickFreezeMatrices::generate(dist, cfg.n_x, rng)?;
        let pf = pf.map_rows(|x| gp.data().normalize_x(x));
        let fmap = Arc::new(build_rff(gp.kernel(), cfg.n_features, rng)?);
        let batch = draw_path_batch(gp, fmap, cfg.sampler.into(), cfg.n_paths, rng)?;
        let mut acc = Accumulator::new(d, cfg.n_paths);
        let n = pf.n();
        let mut start = 0;
        while start < n {
            let len = cfg.chunk.min(n - start);
            let rows = |m: &DMatrix<f64>| m.rows(start, len).into_owned();
            let (a, b) = (rows(pf.a()), rows(pf.b()));
            let fa = batch.eval(&a)?;
            let fb = batch.eval(&b)?;
            acc.add_base(&fa, &fb);
            for i in 0..d {
                let mut h = a.clone();
                h.set_column(i, &b.column(i));
                acc.add_hybrid(i, &fa, &fb, &batch.eval(&h)?);
            }
            start += len;
        }
        for r in acc.finish() {
            match r {
                Ok(ind) => {
                    for i in 0..d {
                        result.first[i].push(ind.first[i]);
                        result.total[i].push(ind.total[i]);
                    }
                }
                Err(Error::DegenerateVariance(_)) => result.excluded += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(result)
}
