//! Feature-map accuracy, sampler fidelity and cost studies.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use super::features::{build_hilbert, build_mercer_se, build_qmc, build_rff, FeatureKind, FeatureMap};
use super::sampler::{draw_pathwise_path, exhaustive_sample, PathKind};
use crate::error::{check_dim, Error, Result};
use crate::fastmath::sincos_slice;
use crate::gaussian::GaussianDist;
use crate::gp::{fit, Dataset, FitOptions, FittedGP};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::linalg::{trace_sqrt_psd, Factor};
use crate::rng::RngStream;
use crate::stats::{loglog_slope, mean, quantile};
use crate::testbeds::levy1d_normalized;

/// `n` evenly spaced points on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(lo < hi) {
            return Err(Error::InvalidArgument("grid needs n >= 2 and lo < hi".into()));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn points(&self) -> DMatrix<f64> {
        let h = self.step();
        DMatrix::from_fn(self.n, 1, |i, _| self.lo + i as f64 * h)
    }
}

/// Relative Frobenius error `‖K - ΦΦᵀ‖ / ‖K‖` on the rows of `x`.
pub fn kernel_error_dense(kernel: &KernelSpec, fmap: &FeatureMap, x: &DMatrix<f64>) -> Result<f64> {
    let k = kernel.gram(x, 0.0)?;
    let phi = fmap.matrix(x)?;
    let mut diff = k.clone();
    diff.gemm(-1.0, &phi, &phi.transpose(), 1.0);
    Ok(diff.norm() / k.norm())
}

/// `S[m] = Σ_k cos(θ0_k + m·δ_k)` for `m < count`, by rotation with periodic exact resyncs.
fn cosine_sums(theta0: &[f64], delta: &[f64], count: usize) -> Vec<f64> {
    const RESYNC: usize = 64;
    let nf = theta0.len();
    let (mut sd, mut cd) = (vec![0.0; nf], vec![0.0; nf]);
    sincos_slice(delta, &mut sd, &mut cd);
    let (mut s, mut c) = (vec![0.0; nf], vec![0.0; nf]);
    let mut arg = vec![0.0; nf];
    let mut out = Vec::with_capacity(count);
    for m in 0..count {
        if m % RESYNC == 0 {
            for ((a, t), d) in arg.iter_mut().zip(theta0).zip(delta) {
                *a = t + m as f64 * d;
            }
            sincos_slice(&arg, &mut s, &mut c);
        } else {
            for k in 0..nf {
                let (sk, ck) = (s[k], c[k]);
                c[k] = ck * cd[k] - sk * sd[k];
                s[k] = sk * cd[k] + ck * sd[k];
            }
        }
        out.push(c.iter().sum());
    }
    out
}

/// Relative kernel error of a one-dimensional map on a uniform grid.
///
/// Cosine maps use `φ(xᵢ)ᵀφ(xⱼ) = A[|i-j|] + B[i+j]`, so the whole Gram matrix never
/// has to be formed; other maps fall back to [`kernel_error_dense`].
pub fn kernel_error_grid(kernel: &KernelSpec, fmap: &FeatureMap, grid: &UniformGrid) -> Result<f64> {
    check_dim(1, kernel.dim())?;
    check_dim(1, fmap.dim())?;
    let Some((omega, phase, amp)) = fmap.cosine_parts() else {
        return kernel_error_dense(kernel, fmap, &grid.points());
    };
    let n = grid.n;
    let h = grid.step();
    let w = &omega[0];
    let half = 0.5 * amp * amp;
    let delta: Vec<f64> = w.iter().map(|v| v * h).collect();
    let a = cosine_sums(&vec![0.0; w.len()], &delta, n);
    let theta_b: Vec<f64> = w.iter().zip(phase).map(|(v, b)| 2.0 * v * grid.lo + 2.0 * b).collect();
    let b: Vec<f64> = cosine_sums(&theta_b, &delta, 2 * n - 1).into_iter().map(|v| half * v).collect();
    // E_p = κ(p h) - A_p
    let kappa: Vec<f64> = (0..n).map(|p| kernel.eval_unchecked(&[0.0], &[p as f64 * h])).collect();
    let e: Vec<f64> = kappa.iter().zip(&a).map(|(k, s)| k - half * s).collect();
    let mult = |p: usize| if p == 0 { n as f64 } else { 2.0 * (n - p) as f64 };
    let k_norm2: f64 = kappa.iter().enumerate().map(|(p, k)| mult(p) * k * k).sum();
    let e2: f64 = e.iter().enumerate().map(|(p, v)| mult(p) * v * v).sum();
    let b2: f64 = b.iter().enumerate().map(|(q, v)| (q.min(2 * n - 2 - q) + 1) as f64 * v * v).sum();
    // same-parity prefix sums of B
    let mut pre = b.clone();
    for q in 2..pre.len() {
        pre[q] += pre[q - 2];
    }
    let cross: f64 = e
        .iter()
        .enumerate()
        .map(|(p, ep)| {
            let upper = pre[2 * n - 2 - p];
            let lower = if p >= 2 { pre[p - 2] } else { 0.0 };
            let w = if p == 0 { 1.0 } else { 2.0 };
            w * ep * (upper - lower)
        })
        .sum();
    Ok(((e2 - 2.0 * cross + b2).max(0.0) / k_norm2).sqrt())
}

/// Settings for a feature-count sweep of the relative kernel error.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub kernel: KernelSpec,
    pub grid: UniformGrid,
    pub methods: Vec<FeatureKind>,
    pub n_features: Vec<usize>,
    /// Independent draws per feature count for random maps.
    pub repeats: usize,
    /// Std of the Gaussian measure for the Mercer expansion.
    pub mercer_sigma: f64,
    pub hilbert_half_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub method: &'static str,
    pub n_features: usize,
    pub repeats: usize,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of the mean error against the feature count, per method.
    pub slopes: Vec<(&'static str, f64)>,
}

impl ConvergenceSummary {
    pub fn slope(&self, kind: FeatureKind) -> Option<f64> {
        self.slopes.iter().find(|s| s.0 == kind.name()).map(|s| s.1)
    }

    pub fn row(&self, kind: FeatureKind, n_features: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.method == kind.name() && r.n_features == n_features)
    }
}

/// Build a map of the given kind for the study settings.
pub fn build_map(cfg: &ConvergenceConfig, kind: FeatureKind, n: usize, rng: &mut RngStream) -> Result<FeatureMap> {
    match kind {
        FeatureKind::Rff => build_rff(&cfg.kernel, n, rng),
        FeatureKind::Qmc => build_qmc(&cfg.kernel, n),
        FeatureKind::MercerSe => build_mercer_se(&cfg.kernel, cfg.mercer_sigma, n),
        FeatureKind::HilbertDirichlet => build_hilbert(&cfg.kernel, cfg.hilbert_half_width, n),
    }
}

/// Sweep the feature counts for every method. Each (method, count, repeat) triple
/// draws from its own substream, so rows do not depend on the sweep order.
pub fn convergence_study(cfg: &ConvergenceConfig, rng: &RngStream) -> Result<ConvergenceSummary> {
    if cfg.repeats == 0 || cfg.n_features.is_empty() || cfg.n_features.contains(&0) {
        return Err(Error::InvalidArgument("need repeats >= 1 and positive feature counts".into()));
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (mi, &kind) in cfg.methods.iter().enumerate() {
        let reps = if kind.is_random() { cfg.repeats } else { 1 };
        let mut means = Vec::new();
        for (ni, &n) in cfg.n_features.iter().enumerate() {
            let errs = (0..reps)
                .map(|r| {
                    let mut sub = rng.substream(((mi * 1000 + ni) * 100_000 + r) as u64);
                    let fmap = build_map(cfg, kind, n, &mut sub)?;
                    kernel_error_grid(&cfg.kernel, &fmap, &cfg.grid)
                })
                .collect::<Result<Vec<f64>>>()?;
            let m = mean(&errs);
            means.push(m);
            rows.push(ConvergenceRow {
                method: kind.name(),
                n_features: n,
                repeats: reps,
                mean: m,
                median: quantile(&errs, 0.5),
                q05: quantile(&errs, 0.05),
                q95: quantile(&errs, 0.95),
            });
        }
        let ns: Vec<f64> = cfg.n_features.iter().map(|&n| n as f64).collect();
        slopes.push((kind.name(), loglog_slope(&ns, &means)));
    }
    Ok(ConvergenceSummary { rows, slopes })
}

/// Decades lost per added feature, fitted over the points whose error exceeds `floor`.
pub fn exponential_decay_rate(n_features: &[usize], errors: &[f64], floor: f64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        n_features.iter().zip(errors).filter(|(_, e)| **e > floor).map(|(n, e)| (*n as f64, e.log10())).unzip();
    (x.len() >= 2).then(|| crate::stats::linear_fit(&x, &y).0)
}

/// Exact posterior stored through its dominant eigenpairs, for repeated 2-Wasserstein
/// evaluations against many approximations on the same query set.
#[derive(Debug, Clone)]
pub struct LowRankGaussian {
    mean: DVector<f64>,
    /// `n x r` eigenvectors scaled by the square roots of their eigenvalues.
    root: DMatrix<f64>,
    trace: f64,
}

impl LowRankGaussian {
    /// Keep eigenvalues above `rel_tol · λ_max`.
    pub fn new(dist: &GaussianDist, rel_tol: f64) -> Self {
        let eig = SymmetricEigen::new(dist.cov().clone());
        let top = eig.eigenvalues.max().max(0.0);
        let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > rel_tol * top).collect();
        let n = dist.dim();
        let root = DMatrix::from_fn(n, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])] * eig.eigenvalues[keep[j]].sqrt());
        Self { mean: dist.mean().clone(), root, trace: dist.cov().trace() }
    }

    pub fn rank(&self) -> usize {
        self.root.ncols()
    }

    /// `Rᵀ M` for the scaled eigenbasis `R`.
    pub fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.root.transpose() * m
    }

    /// Distance to `N(mean, S2)`, given `tr S2` and `RᵀS2R`.
    pub fn distance(&self, mean: &DVector<f64>, trace2: f64, projected: &DMatrix<f64>) -> f64 {
        let cross = trace_sqrt_psd(&crate::linalg::symmetrize(projected));
        let m = (&self.mean - mean).norm_squared();
        (m + self.trace + trace2 - 2.0 * cross).max(0.0).sqrt()
    }

    /// Distance to the moments of a sampler with feature map `fmap`.
    pub fn distance_to_sampler(&self, gp: &FittedGP, fmap: &FeatureMap, kind: PathKind, xq: &DMatrix<f64>) -> Result<f64> {
        let (mean, trace2, proj) = sampler_moments_projected(self, gp, fmap, kind, xq)?;
        Ok(self.distance(&mean, trace2, &proj))
    }
}

/// Mean, covariance trace and projected covariance of the sampler on `xq`.
fn sampler_moments_projected(
    exact: &LowRankGaussian,
    gp: &FittedGP,
    fmap: &FeatureMap,
    kind: PathKind,
    xq: &DMatrix<f64>,
) -> Result<(DVector<f64>, f64, DMatrix<f64>)> {
    let x = gp.data().x();
    let phi_x = fmap.matrix(x)?;
    let phi_q = fmap.matrix(xq)?;
    let s2 = gp.sigma_n() * gp.sigma_n();
    let p = exact.project(&phi_q); // r x N_φ
    match kind {
        PathKind::WeightSpace => {
            // σ²Φ_q A⁻¹Φ_qᵀ = Φ_qΦ_qᵀ - Φ_qΦ_Xᵀ B⁻¹ Φ_XΦ_qᵀ with B = Φ_XΦ_Xᵀ + σ²I
            let mut bmat = &phi_x * phi_x.transpose();
            for i in 0..bmat.nrows() {
                bmat[(i, i)] += s2;
            }
            let f = Factor::new(&bmat, 0.0)?;
            let xq_cross = &phi_x * phi_q.transpose(); // N x n_q
            let mean = xq_cross.tr_mul(&f.solve_vec(gp.data().y()));
            let g = f.solve_lower(&xq_cross);
            let trace2 = phi_q.norm_squared() - g.norm_squared();
            let pg = f.solve_lower(&(&phi_x * p.transpose())); // N x r
            let proj = &p * p.transpose() - pg.transpose() * &pg;
            Ok((mean, trace2, proj))
        }
        PathKind::Pathwise => {
            // cov = M Mᵀ + σ² G Gᵀ, M = Φ_q - G Φ_X, G = K_qX C⁻¹
            let kxq = gp.kernel().cross(x, xq)?;
            let gt = gp.factor().solve(&kxq); // N x n_q, equals Gᵀ
            let mean = gt.tr_mul(gp.data().y());
            let mut m = phi_q;
            m.gemm(-1.0, &gt.transpose(), &phi_x, 1.0);
            let trace2 = m.norm_squared() + s2 * gt.norm_squared();
            let pm = exact.project(&m);
            let pg = exact.project(&gt.transpose());
            let proj = &pm * pm.transpose() + (&pg * pg.transpose()) * s2;
            Ok((mean, trace2, proj))
        }
    }
}

/// Training set on the one-dimensional Levy function: inputs uniform on `interval`,
/// modeled on `[-10, 10]`, outputs min-max normalized.
pub fn levy_dataset(n: usize, interval: (f64, f64), rng: &mut RngStream) -> Result<Dataset> {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform_in(interval.0, interval.1)]).collect();
    let ys = xs.iter().map(|x| levy1d_normalized(x[0])).collect();
    Dataset::new(xs, ys, vec![(-10.0, 10.0)])
}

#[derive(Debug, Clone)]
pub struct WassersteinConfig {
    pub n_train: Vec<usize>,
    pub n_features: usize,
    pub n_query: usize,
    pub realizations: usize,
    pub sigma_n: f64,
    pub train_interval: (f64, f64),
    pub fit: FitOptions,
    /// Relative eigenvalue cutoff for the exact covariance.
    pub rank_tol: f64,
}

impl Default for WassersteinConfig {
    fn default() -> Self {
        Self {
            n_train: vec![4, 16, 64, 256, 1024],
            n_features: 2000,
            n_query: 2000,
            realizations: 20,
            sigma_n: 1e-3,
            train_interval: (-6.0, 2.0),
            fit: FitOptions { restarts: 3, ..FitOptions::default() },
            rank_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WassersteinRow {
    pub n_train: usize,
    pub method: &'static str,
    pub realization: usize,
    /// Distance in the min-max normalized output units.
    pub distance: f64,
}

pub fn path_kind_name(kind: PathKind) -> &'static str {
    match kind {
        PathKind::WeightSpace => "rff",
        PathKind::Pathwise => "pc",
    }
}

/// For each training size: fit an SE GP once, then compare the exact posterior on an
/// even query grid with the weight-space (RFF) and pathwise (PC) sampler moments for
/// independent feature draws.
pub fn wasserstein_study(cfg: &WassersteinConfig, rng: &RngStream) -> Result<Vec<WassersteinRow>> {
    if cfg.realizations == 0 || cfg.n_features == 0 || cfg.n_query < 2 {
        return Err(Error::InvalidArgument("need realizations, features >= 1 and n_query >= 2".into()));
    }
    let xq = UniformGrid::new(0.0, 1.0, cfg.n_query)?.points();
    let mut rows = Vec::new();
    for (ti, &n) in cfg.n_train.iter().enumerate() {
        let mut sub = rng.substream(ti as u64);
        let data = levy_dataset(n, cfg.train_interval, &mut sub)?;
        let gp = fit(&data, KernelFamily::SquaredExponential, cfg.sigma_n, &cfg.fit, &mut sub)?;
        let scale = gp.data().y_std();
        let exact = LowRankGaussian::new(&gp.predict(&xq)?, cfg.rank_tol);
        log::info!("N = {n}: exact covariance rank {}", exact.rank());
        for r in 0..cfg.realizations {
            let mut frng = rng.substream(((ti + 1) * 10_000 + r) as u64);
            let fmap = build_rff(gp.kernel(), cfg.n_features, &mut frng)?;
            for kind in [PathKind::WeightSpace, PathKind::Pathwise] {
                let d = exact.distance_to_sampler(&gp, &fmap, kind, &xq)?;
                rows.push(WassersteinRow { n_train: n, method: path_kind_name(kind), realization: r, distance: d * scale });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub method: &'static str,
    /// Which size is varied: `"query"` or `"features"`.
    pub sweep: &'static str,
    pub n_query: usize,
    pub n_features: usize,
    pub seconds: f64,
}

/// Best-of-`reps` wall time of `f`.
fn best_time(reps: usize, mut f: impl FnMut() -> Result<f64>) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut sink = 0.0;
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        sink += f()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    std::hint::black_box(sink);
    Ok(best)
}

/// Wall time of one joint exact draw and of one pathwise draw plus evaluation, for
/// each query size (at `base_features`) and each feature count (at `base_query`).
pub fn timing_study(
    gp: &FittedGP,
    query_sizes: &[usize],
    feature_sizes: &[usize],
    base_features: usize,
    base_query: usize,
    reps: usize,
    rng: &RngStream,
) -> Result<Vec<TimingRow>> {
    let d = gp.dim();
    let mut rng = rng.substream(0);
    let mut queries = |m: usize| DMatrix::from_fn(m, d, |_, _| rng.uniform());
    let pc = |fmap: Arc<FeatureMap>, xq: &DMatrix<f64>, seed: u64| -> Result<f64> {
        let path = draw_pathwise_path(gp, fmap, &mut RngStream::new(seed, 0))?;
        Ok(path.eval(xq)?.iter().sum())
    };
    let mut rows = Vec::new();
    for &m in query_sizes {
        let xq = queries(m);
        let t = best_time(reps, || {
            let s = exhaustive_sample(gp, &xq, 1, &mut RngStream::new(m as u64, 0))?;
            Ok(s.sum())
        })?;
        rows.push(TimingRow { method: "exhaustive", sweep: "query", n_query: m, n_features: 0, seconds: t });
        let t = best_time(reps, || {
            let fmap = Arc::new(build_rff(gp.kernel(), base_features, &mut RngStream::new(m as u64, 1))?);
            pc(fmap, &xq, m as u64)
        })?;
        rows.push(TimingRow { method: "pc", sweep: "query", n_query: m, n_features: base_features, seconds: t });
    }
    let xq = queries(base_query);
    for &nf in feature_sizes {
        let t = best_time(reps, || {
            let fmap = Arc::new(build_rff(gp.kernel(), nf, &mut RngStream::new(nf as u64, 1))?);
            pc(fmap, &xq, nf as u64)
        })?;
        rows.push(TimingRow { method: "pc", sweep: "features", n_query: base_query, n_features: nf, seconds: t });
    }
    Ok(rows)
}

/// Fitted power-law exponent of time against the varied size for one method and sweep.
pub fn timing_exponent(rows: &[TimingRow], method: &str, sweep: &str) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.method == method && r.sweep == sweep)
        .map(|r| ((if sweep == "query" { r.n_query } else { r.n_features }) as f64, r.seconds))
        .unzip();
    loglog_slope(&x, &y)
}
