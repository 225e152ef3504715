//! Exact GP regression in a normalized space.
//!
//! Inputs are mapped affinely to `[0,1]^d` using the configured bounds and
//! outputs are z-scored. All fitting and prediction happens in that space.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::GaussianDist;
use crate::kernels::{rows, KernelFamily, KernelSpec};
use crate::linalg::Factor;
use crate::optim::{latin_hypercube, minimize_box, scale_to_box, QuasiNewton};
use crate::rng::RngStream;

/// Observations plus the affine maps into the normalized modeling space.
#[derive(Debug, Clone)]
pub struct Dataset {
    x_raw: Vec<Vec<f64>>,
    y_raw: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    y_mean: f64,
    y_std: f64,
}

impl Dataset {
    pub fn new(x_raw: Vec<Vec<f64>>, y_raw: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if x_raw.is_empty() {
            return Err(Error::EmptyData);
        }
        check_dim(x_raw.len(), y_raw.len())?;
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("bounds must not be empty".into()));
        }
        for (lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!("bad bounds ({lo}, {hi})")));
            }
        }
        for row in &x_raw {
            check_dim(bounds.len(), row.len())?;
        }
        if x_raw.iter().flatten().chain(&y_raw).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value in dataset".into()));
        }
        let mut ds = Self {
            x_raw,
            y_raw,
            bounds,
            x: DMatrix::zeros(0, 0),
            y: DVector::zeros(0),
            y_mean: 0.0,
            y_std: 1.0,
        };
        ds.renormalize();
        Ok(ds)
    }

    /// Read a CSV with header `x1,…,xd,y`. Bounds default to the data range.
    pub fn from_csv(path: &Path, bounds: Option<Vec<(f64, f64)>>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::InvalidData(e.to_string()))?;
        let header = rdr.headers().map_err(|e| Error::InvalidData(e.to_string()))?.clone();
        let d = header.len().checked_sub(1).filter(|d| *d >= 1).ok_or_else(|| {
            Error::InvalidData("expected header x1,...,xd,y".into())
        })?;
        for (i, h) in header.iter().enumerate() {
            let want = if i == d { "y".to_string() } else { format!("x{}", i + 1) };
            if h.trim() != want {
                return Err(Error::InvalidData(format!("column {} should be `{want}`, found `{h}`", i + 1)));
            }
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::InvalidData(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidData(format!("`{s}`: {e}"))))
                .collect::<Result<_>>()?;
            check_dim(d + 1, vals.len())?;
            ys.push(vals[d]);
            xs.push(vals[..d].to_vec());
        }
        if xs.is_empty() {
            return Err(Error::EmptyData);
        }
        let bounds = match bounds {
            Some(b) => b,
            None => (0..d)
                .map(|j| {
                    let lo = xs.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                    let hi = xs.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                    if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
                })
                .collect(),
        };
        Self::new(xs, ys, bounds)
    }

    fn renormalize(&mut self) {
        let n = self.y_raw.len();
        let d = self.bounds.len();
        let mean = self.y_raw.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            self.y_raw.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        self.y_mean = mean;
        self.y_std = if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 };
        self.x = DMatrix::from_fn(n, d, |i, j| {
            let (lo, hi) = self.bounds[j];
            (self.x_raw[i][j] - lo) / (hi - lo)
        });
        self.y = DVector::from_iterator(n, self.y_raw.iter().map(|y| (y - self.y_mean) / self.y_std));
    }

    /// Append a raw observation and refresh the normalization.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        self.x_raw.push(x);
        self.y_raw.push(y);
        self.renormalize();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y_raw.len()
    }
    pub fn is_empty(&self) -> bool {
        self.y_raw.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }
    /// Normalized inputs, `N x d`.
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    /// Z-scored outputs.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn x_raw(&self) -> &[Vec<f64>] {
        &self.x_raw
    }
    pub fn y_raw(&self) -> &[f64] {
        &self.y_raw
    }
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }
    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    pub fn normalize_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
    }
    pub fn denormalize_x(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.bounds).map(|(v, (lo, hi))| lo + v * (hi - lo)).collect()
    }
    pub fn normalize_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }
    pub fn denormalize_y(&self, z: f64) -> f64 {
        self.y_mean + self.y_std * z
    }
}

/// Trained GP state: data, kernel, noise and the factorized `C = K + σ_n² I`.
#[derive(Debug, Clone)]
pub struct FittedGP {
    data: Dataset,
    kernel: KernelSpec,
    sigma_n: f64,
    factor: Factor,
    alpha: DVector<f64>,
    lml: f64,
}

impl FittedGP {
    /// Condition a GP with fixed hyperparameters on `data`.
    pub fn new(data: Dataset, kernel: KernelSpec, sigma_n: f64) -> Result<Self> {
        check_dim(data.dim(), kernel.dim())?;
        if !(sigma_n >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma_n must be non-negative, got {sigma_n}")));
        }
        let c = kernel.gram(data.x(), sigma_n)?;
        let factor = Factor::new(&c, 0.0)?;
        let alpha = factor.solve_vec(data.y());
        let n = data.len() as f64;
        let lml = -0.5 * data.y().dot(&alpha) - 0.5 * factor.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
        Ok(Self { data, kernel, sigma_n, factor, alpha, lml })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }
    pub fn sigma_n(&self) -> f64 {
        self.sigma_n
    }
    /// `C⁻¹ y`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
    pub fn factor(&self) -> &Factor {
        &self.factor
    }
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }
    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Latent posterior over the rows of `xq` (normalized space).
    pub fn predict(&self, xq: &DMatrix<f64>) -> Result<GaussianDist> {
        check_dim(self.dim(), xq.ncols())?;
        let kq = self.kernel.cross(self.data.x(), xq)?;
        let mean = kq.transpose() * &self.alpha;
        let v = self.factor.solve_lower(&kq);
        let mut cov = self.kernel.gram(xq, 0.0)? - v.transpose() * &v;
        cov = (&cov + cov.transpose()) * 0.5;
        for i in 0..cov.nrows() {
            if cov[(i, i)] < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        GaussianDist::new(mean, cov)
    }

    /// Posterior mean and variance at a single point.
    pub fn predict_point(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        let k = self.kvec(x);
        let mean = k.dot(&self.alpha);
        let v = self.factor.solve_lower_vec(&k);
        Ok((mean, (self.kernel.variance() - v.dot(&v)).max(0.0)))
    }

    /// Mean, variance and their gradients with respect to `x`.
    pub fn predict_point_grad(&self, x: &[f64]) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
        check_dim(self.dim(), x.len())?;
        let k = self.kvec(x);
        let mean = k.dot(&self.alpha);
        let cinv_k = self.factor.solve_vec(&k);
        let var = (self.kernel.variance() - k.dot(&cinv_k)).max(0.0);
        let d = self.dim();
        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        let mut row = vec![0.0; d];
        let xt = self.data.x();
        for a in 0..xt.nrows() {
            row.iter_mut().enumerate().for_each(|(j, r)| *r = xt[(a, j)]);
            self.kernel.grad_x_into(x, &row, self.alpha[a], &mut dmean);
            self.kernel.grad_x_into(x, &row, -2.0 * cinv_k[a], &mut dvar);
        }
        Ok((mean, var, dmean, dvar))
    }

    /// Kernel vector `κ(x, X)` against the training inputs.
    pub fn kvec(&self, x: &[f64]) -> DVector<f64> {
        let xt = self.data.x();
        let mut row = vec![0.0; self.dim()];
        DVector::from_fn(xt.nrows(), |a, _| {
            row.iter_mut().enumerate().for_each(|(j, r)| *r = xt[(a, j)]);
            self.kernel.eval_unchecked(x, &row)
        })
    }
}

/// log N(y | 0, K + σ_n² I) in normalized space.
pub fn log_marginal_likelihood(data: &Dataset, kernel: &KernelSpec, sigma_n: f64) -> Result<f64> {
    FittedGP::new(data.clone(), kernel.clone(), sigma_n).map(|g| g.lml)
}

/// Negative log marginal likelihood and its gradient in log-parameter space
/// `[log σ_f, log l₁…l_d, (log σ_n)]`.
fn neg_lml_grad(
    x: &[Vec<f64>],
    y: &DVector<f64>,
    family: KernelFamily,
    p: &[f64],
    fixed_noise: Option<f64>,
    grad: &mut [f64],
) -> f64 {
    let n = x.len();
    let d = x[0].len();
    let sf2 = (2.0 * p[0]).exp();
    let ls: Vec<f64> = p[1..=d].iter().map(|v| v.exp()).collect();
    let sn = fixed_noise.unwrap_or_else(|| p[d + 1].exp());
    let mut c = DMatrix::zeros(n, n);
    let mut r2m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let r2: f64 = (0..d).map(|k| ((x[i][k] - x[j][k]) / ls[k]).powi(2)).sum();
            let v = sf2 * family.unit_value(r2);
            c[(i, j)] = v;
            c[(j, i)] = v;
            r2m[(i, j)] = r2;
        }
        c[(j, j)] += sn * sn;
    }
    let factor = match Factor::new(&c, 0.0) {
        Ok(f) => f,
        Err(_) => return f64::INFINITY,
    };
    let alpha = factor.solve_vec(y);
    let nll = 0.5 * y.dot(&alpha) + 0.5 * factor.log_det() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    // W = C⁻¹ − ααᵀ ; d(nll)/dθ = ½ tr(W dC/dθ)
    let mut w = factor.inverse();
    for j in 0..n {
        for i in 0..n {
            w[(i, j)] -= alpha[i] * alpha[j];
        }
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut g_sf = 0.0;
    let mut g_l = vec![0.0; d];
    for j in 0..n {
        g_sf += 0.5 * w[(j, j)] * 2.0 * sf2;
        for i in j + 1..n {
            let wij = w[(i, j)];
            g_sf += wij * 2.0 * c[(i, j)];
            let du = sf2 * family.unit_deriv_r2(r2m[(i, j)]);
            for k in 0..d {
                let t = (x[i][k] - x[j][k]) / ls[k];
                g_l[k] += wij * du * (-2.0 * t * t);
            }
        }
    }
    grad[0] = g_sf;
    grad[1..=d].copy_from_slice(&g_l);
    if fixed_noise.is_none() {
        grad[d + 1] = 0.5 * w.trace() * 2.0 * sn * sn;
    }
    nll
}

/// Multi-start maximum-likelihood settings.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    /// Also fit σ_n (starting from the given value).
    pub fit_noise: bool,
    pub log_lengthscale_bounds: (f64, f64),
    pub log_sigma_f_bounds: (f64, f64),
    pub log_sigma_n_bounds: (f64, f64),
    pub local: QuasiNewton,
    /// Extra start point, e.g. the previous iteration's hyperparameters.
    pub warm_start: Option<(KernelSpec, f64)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            fit_noise: false,
            log_lengthscale_bounds: (1e-3f64.ln(), 1e2f64.ln()),
            log_sigma_f_bounds: (1e-3f64.ln(), 1e3f64.ln()),
            log_sigma_n_bounds: (1e-6f64.ln(), 1.0f64.ln()),
            local: QuasiNewton { max_iter: 200, gtol: 1e-8, ftol: 1e-12, memory: 8 },
            warm_start: None,
        }
    }
}

/// Outcome of a single restart.
#[derive(Debug, Clone, Copy)]
pub struct RestartTrace {
    pub neg_lml: f64,
    pub best_so_far: f64,
}

/// Fit hyperparameters by multi-start bounded quasi-Newton on the log marginal likelihood.
pub fn fit(data: &Dataset, family: KernelFamily, sigma_n: f64, opts: &FitOptions, rng: &mut RngStream) -> Result<FittedGP> {
    fit_traced(data, family, sigma_n, opts, rng).map(|(gp, _)| gp)
}

/// As [`fit`], also returning the per-restart objective trace.
pub fn fit_traced(
    data: &Dataset,
    family: KernelFamily,
    sigma_n: f64,
    opts: &FitOptions,
    rng: &mut RngStream,
) -> Result<(FittedGP, Vec<RestartTrace>)> {
    if opts.restarts == 0 && opts.warm_start.is_none() {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let d = data.dim();
    let mut lo = vec![opts.log_sigma_f_bounds.0];
    let mut hi = vec![opts.log_sigma_f_bounds.1];
    lo.extend(std::iter::repeat(opts.log_lengthscale_bounds.0).take(d));
    hi.extend(std::iter::repeat(opts.log_lengthscale_bounds.1).take(d));
    if opts.fit_noise {
        lo.push(opts.log_sigma_n_bounds.0);
        hi.push(opts.log_sigma_n_bounds.1);
    }
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((k, sn)) = &opts.warm_start {
        check_dim(d, k.dim())?;
        let mut p = k.log_params();
        if opts.fit_noise {
            p.push(sn.ln());
        }
        starts.push(p);
    }
    for u in latin_hypercube(opts.restarts, lo.len(), rng) {
        let mut p = scale_to_box(&u, &lo, &hi);
        if opts.fit_noise {
            // keep the noise start at the configured value
            *p.last_mut().unwrap() = sigma_n.max(1e-6).ln().clamp(lo[d + 1], hi[d + 1]);
        }
        starts.push(p);
    }
    let xr = rows(data.x());
    let fixed = if opts.fit_noise { None } else { Some(sigma_n) };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut trace = Vec::with_capacity(starts.len());
    for s in starts {
        let m = minimize_box(|p, g| neg_lml_grad(&xr, data.y(), family, p, fixed, g), &s, &lo, &hi, opts.local);
        if m.f.is_finite() && best.as_ref().map_or(true, |(f, _)| m.f < *f) {
            best = Some((m.f, m.x));
        }
        trace.push(RestartTrace { neg_lml: m.f, best_so_far: best.as_ref().map_or(f64::INFINITY, |b| b.0) });
    }
    let (_, p) = best.ok_or_else(|| Error::FitFailed("no restart produced a finite likelihood".into()))?;
    let kernel = KernelSpec::from_log_params(family, &p[..=d])?;
    let sn = if opts.fit_noise { p[d + 1].exp() } else { sigma_n };
    Ok((FittedGP::new(data.clone(), kernel, sn)?, trace))
}

/// Gaussian posterior over feature weights in the weight-space view.
#[derive(Debug, Clone)]
pub struct WeightPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl WeightPosterior {
    pub fn sample(&self, rng: &mut RngStream) -> Result<DVector<f64>> {
        let f = Factor::new(&self.cov, 0.0)?;
        Ok(&self.mean + f.mul_l(&DVector::from_vec(rng.normals(self.mean.len()))))
    }
}

/// Posterior of `w` for `y = Φ w + ε`, `w ~ N(0, I)`, `ε ~ N(0, σ_n² I)`.
/// With `use_smw` the computation goes through the `N x N` system instead of the
/// `N_φ x N_φ` one.
pub fn weight_posterior(phi: &DMatrix<f64>, y: &DVector<f64>, sigma_n: f64, use_smw: bool) -> Result<WeightPosterior> {
    check_dim(phi.nrows(), y.len())?;
    if !(sigma_n > 0.0) {
        return Err(Error::InvalidArgument("weight posterior needs sigma_n > 0".into()));
    }
    let s2 = sigma_n * sigma_n;
    if use_smw {
        let mut b = phi * phi.transpose();
        for i in 0..b.nrows() {
            b[(i, i)] += s2;
        }
        let f = Factor::new(&b, 0.0)?;
        let mean = phi.transpose() * f.solve_vec(y);
        let v = f.solve_lower(phi);
        let mut cov = -(v.transpose() * v);
        for i in 0..cov.nrows() {
            cov[(i, i)] += 1.0;
        }
        Ok(WeightPosterior { mean, cov })
    } else {
        let mut a = phi.transpose() * phi;
        for i in 0..a.nrows() {
            a[(i, i)] += s2;
        }
        let f = Factor::new(&a, 0.0)?;
        let mean = f.solve_vec(&(phi.transpose() * y));
        let cov = f.inverse() * s2;
        Ok(WeightPosterior { mean, cov })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::sample_mvn;
    use approx::assert_relative_eq;

    fn unit_data(x: Vec<f64>, y: Vec<f64>) -> Dataset {
        Dataset::new(x.into_iter().map(|v| vec![v]).collect(), y, vec![(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn normalization_round_trip() {
        let ds = Dataset::new(vec![vec![2.0, -1.0], vec![4.0, 1.0]], vec![3.0, 5.0], vec![(0.0, 4.0), (-2.0, 2.0)]).unwrap();
        assert_eq!(ds.x()[(0, 0)], 0.5);
        assert_eq!(ds.x()[(1, 1)], 0.75);
        assert_relative_eq!(ds.y().sum(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ds.denormalize_y(ds.y()[1]), 5.0, epsilon = 1e-14);
        let back = ds.denormalize_x(&ds.normalize_x(&[1.0, 0.3]));
        assert_relative_eq!(back[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(back[1], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn lml_single_point() {
        // z-scoring a single observation gives y = 0
        let ds = unit_data(vec![0.3], vec![5.0]);
        let k = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 1.0, 1).unwrap();
        let l = log_marginal_likelihood(&ds, &k, 0.0).unwrap();
        assert_relative_eq!(l, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-9);
    }

    #[test]
    fn lml_unit_observation() {
        // two far-apart points z-score to ±1/√2·√2 = ±0.7071...; use a direct oracle instead
        let ds = unit_data(vec![0.0, 1.0], vec![-1.0, 1.0]);
        let k = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 1e-3, 1).unwrap();
        let y = ds.y();
        let expect: f64 = y.iter().map(|v| -0.5 * v * v - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum();
        assert_relative_eq!(log_marginal_likelihood(&ds, &k, 0.0).unwrap(), expect, epsilon = 1e-8);
    }

    #[test]
    fn lml_matches_dense_oracle() {
        let mut rng = RngStream::new(8, 0);
        let xs: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
        let ys: Vec<f64> = (0..5).map(|_| rng.normal()).collect();
        let ds = unit_data(xs, ys);
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 1.3, 0.4, 1).unwrap();
        let c = k.gram(ds.x(), 0.1).unwrap();
        let cinv = c.clone().try_inverse().unwrap();
        let y = ds.y();
        let expect = -0.5 * (y.transpose() * &cinv * y)[(0, 0)] - 0.5 * c.determinant().ln() - 2.5 * (2.0 * std::f64::consts::PI).ln();
        assert_relative_eq!(log_marginal_likelihood(&ds, &k, 0.1).unwrap(), expect, epsilon = 1e-8);
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        let mut rng = RngStream::new(9, 0);
        let x: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
        let y = DVector::from_vec((0..12).map(|_| rng.normal()).collect());
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52] {
            for fixed in [Some(0.1), None] {
                let mut p = vec![0.2, -1.0, -0.5];
                if fixed.is_none() {
                    p.push(-2.0);
                }
                let mut g = vec![0.0; p.len()];
                neg_lml_grad(&x, &y, fam, &p, fixed, &mut g);
                let mut dummy = vec![0.0; p.len()];
                for i in 0..p.len() {
                    let h = 1e-6;
                    let mut pp = p.clone();
                    pp[i] += h;
                    let mut pm = p.clone();
                    pm[i] -= h;
                    let fd = (neg_lml_grad(&x, &y, fam, &pp, fixed, &mut dummy)
                        - neg_lml_grad(&x, &y, fam, &pm, fixed, &mut dummy))
                        / (2.0 * h);
                    assert_relative_eq!(g[i], fd, max_relative = 1e-5, epsilon = 1e-7);
                }
            }
        }
    }

    #[test]
    fn recovers_lengthscale() {
        let mut rng = RngStream::new(10, 0);
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let truth = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2, 1).unwrap();
        let xm = DMatrix::from_column_slice(n, 1, &xs);
        let prior = GaussianDist::new(DVector::zeros(n), truth.gram(&xm, 0.0).unwrap()).unwrap();
        let f = sample_mvn(&prior, 1, &mut rng).unwrap();
        let ds = unit_data(xs, f.row(0).iter().copied().collect());
        let gp = fit(&ds, KernelFamily::SquaredExponential, 1e-3, &FitOptions::default(), &mut RngStream::new(1, 0)).unwrap();
        let l = gp.kernel().lengthscales()[0];
        assert!(l > 0.1 && l < 0.4, "recovered {l}");
    }

    #[test]
    fn zero_signal_gives_small_sigma_f() {
        let ds = unit_data(vec![0.1, 0.3, 0.5, 0.7, 0.9], vec![0.0; 5]);
        let gp = fit(&ds, KernelFamily::SquaredExponential, 1e-2, &FitOptions::default(), &mut RngStream::new(2, 0)).unwrap();
        assert!(gp.kernel().sigma_f() < 1e-2, "{}", gp.kernel().sigma_f());
    }

    #[test]
    fn fit_is_deterministic_and_monotone() {
        let ds = unit_data(vec![0.1, 0.4, 0.5, 0.8], vec![1.0, -0.5, 0.2, 2.0]);
        let run = || fit_traced(&ds, KernelFamily::Matern52, 1e-3, &FitOptions::default(), &mut RngStream::new(3, 0)).unwrap();
        let (a, ta) = run();
        let (b, _) = run();
        assert_eq!(a.kernel(), b.kernel());
        assert!(ta.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
    }

    #[test]
    fn interpolates_and_reverts() {
        let ds = unit_data(vec![0.2, 0.5, 0.6], vec![1.0, -1.0, 0.5]);
        let k = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.1, 1).unwrap();
        let gp = FittedGP::new(ds.clone(), k, 1e-6).unwrap();
        let p = gp.predict(&DMatrix::from_column_slice(1, 1, &[0.5])).unwrap();
        assert!((p.mean()[0] - ds.y()[1]).abs() < 1e-3);
        assert!(p.cov()[(0, 0)] <= 1e-4);
        let far = gp.predict(&DMatrix::from_column_slice(1, 1, &[5.0])).unwrap();
        assert!(far.mean()[0].abs() < 1e-8);
        assert_relative_eq!(far.cov()[(0, 0)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn predict_matches_dense_oracle() {
        let mut rng = RngStream::new(12, 0);
        let ds = unit_data((0..4).map(|_| rng.uniform()).collect(), (0..4).map(|_| rng.normal()).collect());
        let k = KernelSpec::isotropic(KernelFamily::Matern32, 0.9, 0.3, 1).unwrap();
        let gp = FittedGP::new(ds.clone(), k.clone(), 0.05).unwrap();
        let xq = DMatrix::from_column_slice(3, 1, &[0.1, 0.45, 0.9]);
        let p = gp.predict(&xq).unwrap();
        let cinv = k.gram(ds.x(), 0.05).unwrap().try_inverse().unwrap();
        let kq = k.cross(&xq, ds.x()).unwrap();
        let mean = &kq * &cinv * ds.y();
        let cov = k.gram(&xq, 0.0).unwrap() - &kq * &cinv * kq.transpose();
        assert!((p.mean() - mean).amax() < 1e-8);
        assert!((p.cov() - cov).amax() < 1e-8);
        for i in 0..3 {
            let (m, v) = gp.predict_point(&[xq[(i, 0)]]).unwrap();
            assert_relative_eq!(m, p.mean()[i], epsilon = 1e-10);
            assert_relative_eq!(v, p.cov()[(i, i)], epsilon = 1e-10);
        }
    }

    #[test]
    fn point_gradients_match_fd() {
        let mut rng = RngStream::new(13, 0);
        let x: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.uniform(), rng.uniform()]).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let ds = Dataset::new(x, y, vec![(0.0, 1.0); 2]).unwrap();
        let k = KernelSpec::new(KernelFamily::Matern52, 1.1, vec![0.3, 0.5]).unwrap();
        let gp = FittedGP::new(ds, k, 1e-3).unwrap();
        let q = [0.37, 0.61];
        let (_, _, dm, dv) = gp.predict_point_grad(&q).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut a = q;
            a[i] += h;
            let mut b = q;
            b[i] -= h;
            let (ma, va) = gp.predict_point(&a).unwrap();
            let (mb, vb) = gp.predict_point(&b).unwrap();
            assert_relative_eq!(dm[i], (ma - mb) / (2.0 * h), max_relative = 1e-5);
            assert_relative_eq!(dv[i], (va - vb) / (2.0 * h), max_relative = 1e-5, epsilon = 1e-9);
        }
    }

    #[test]
    fn weight_posterior_identity_case() {
        let y = DVector::from_vec(vec![1.0, -2.0, 4.0]);
        let wp = weight_posterior(&DMatrix::identity(3, 3), &y, 1.0, false).unwrap();
        assert!((wp.mean.clone() - &y / 2.0).amax() < 1e-14);
        assert!((wp.cov.clone() - DMatrix::identity(3, 3) / 2.0).amax() < 1e-14);
        let z = weight_posterior(&DMatrix::identity(3, 3), &DVector::zeros(3), 1.0, true).unwrap();
        assert_eq!(z.mean.amax(), 0.0);
    }

    #[test]
    fn weight_posterior_smw_agrees() {
        let mut rng = RngStream::new(14, 0);
        let phi = DMatrix::from_fn(6, 40, |_, _| rng.normal() * 0.3);
        let y = DVector::from_vec(rng.normals(6));
        let a = weight_posterior(&phi, &y, 0.1, false).unwrap();
        let b = weight_posterior(&phi, &y, 0.1, true).unwrap();
        assert!((a.mean - b.mean).amax() < 1e-8);
        assert!((a.cov - b.cov).amax() < 1e-8);
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "x1,x2,y\n0,1,2\n1,0,3\n").unwrap();
        let ds = Dataset::from_csv(&p, None).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        std::fs::write(&p, "x1,y\n").unwrap();
        assert_eq!(Dataset::from_csv(&p, None).unwrap_err(), Error::EmptyData);
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(Dataset::from_csv(&p, None), Err(Error::InvalidData(_))));
    }
}
