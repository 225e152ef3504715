//! Prior and posterior sample paths: weight-space draws, pathwise conditioning
//! and exhaustive sampling on a finite grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::features::FeatureMap;
use crate::error::{check_dim, Error, Result};
use crate::gaussian::{sample_mvn, GaussianDist};
use crate::gp::FittedGP;
use crate::kernels::KernelSpec;
use crate::linalg::Factor;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PathKind {
    #[serde(rename = "rff")]
    WeightSpace,
    #[serde(rename = "pc")]
    Pathwise,
}

/// How weight-space posterior weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightSampler {
    /// Cholesky factor of `ΦᵀΦ + σ_n² I`.
    #[default]
    Cholesky,
    /// Prior weights corrected through the `N x N` system (Matheron's rule in weight space).
    Matheron,
}

/// Kernel-weighted data correction `Σ_a v_a κ(x, x_a)`.
#[derive(Debug, Clone)]
pub struct PcUpdate {
    kernel: KernelSpec,
    x: Vec<Vec<f64>>,
    v: Vec<f64>,
}

impl PcUpdate {
    pub fn new(kernel: KernelSpec, x: Vec<Vec<f64>>, v: Vec<f64>) -> Result<Self> {
        check_dim(x.len(), v.len())?;
        for row in &x {
            check_dim(kernel.dim(), row.len())?;
        }
        Ok(Self { kernel, x, v })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.v
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.x.iter().zip(&self.v).map(|(xa, va)| va * self.kernel.eval_unchecked(x, xa)).sum()
    }

    fn add_grad(&self, x: &[f64], g: &mut [f64]) {
        for (xa, &va) in self.x.iter().zip(&self.v) {
            self.kernel.grad_x_into(x, xa, va, g);
        }
    }
}

/// A deterministic function drawn from a GP: `wᵀφ(x)` plus an optional update term.
#[derive(Debug, Clone)]
pub struct SamplePath {
    kind: PathKind,
    fmap: Arc<FeatureMap>,
    weights: Vec<f64>,
    update: Option<PcUpdate>,
}

impl SamplePath {
    pub fn new(fmap: Arc<FeatureMap>, weights: Vec<f64>, update: Option<PcUpdate>) -> Result<Self> {
        check_dim(fmap.n_features(), weights.len())?;
        if let Some(u) = &update {
            check_dim(fmap.dim(), u.kernel.dim())?;
        }
        let kind = if update.is_some() { PathKind::Pathwise } else { PathKind::WeightSpace };
        Ok(Self { kind, fmap, weights, update })
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.fmap.dim()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn features(&self) -> &Arc<FeatureMap> {
        &self.fmap
    }
    pub fn update(&self) -> Option<&PcUpdate> {
        self.update.as_ref()
    }

    /// Path value at `x`; the length of `x` is not checked.
    pub fn value(&self, x: &[f64]) -> f64 {
        let prior = self.fmap.weighted(&self.weights, x, None);
        prior + self.update.as_ref().map_or(0.0, |u| u.value(x))
    }

    /// Path value with its gradient written into `grad`.
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut v = self.fmap.weighted(&self.weights, x, Some(grad));
        if let Some(u) = &self.update {
            v += u.value(x);
            u.add_grad(x, grad);
        }
        v
    }

    pub fn eval(&self, xq: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_dim(self.dim(), xq.ncols())?;
        let mut row = vec![0.0; self.dim()];
        Ok((0..xq.nrows())
            .map(|i| {
                row.iter_mut().enumerate().for_each(|(j, r)| *r = xq[(i, j)]);
                self.value(&row)
            })
            .collect())
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut g = vec![0.0; x.len()];
        self.value_grad(x, &mut g);
        Ok(g)
    }
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

/// A path from the (approximate) prior: `w ~ N(0, I)`.
pub fn draw_prior_path(fmap: Arc<FeatureMap>, rng: &mut RngStream) -> SamplePath {
    let w = rng.normals(fmap.n_features());
    SamplePath::new(fmap, w, None).expect("weights sized from the map")
}

/// Weight-space path; factorizes whichever of the `n x n` and `m x m` systems is smaller.
pub fn draw_weight_space_path(gp: &FittedGP, fmap: Arc<FeatureMap>, rng: &mut RngStream) -> Result<SamplePath> {
    let sampler = if gp.data().len() < fmap.n_features() { WeightSampler::Matheron } else { WeightSampler::Cholesky };
    draw_weight_space_path_with(gp, fmap, sampler, rng)
}

pub fn draw_weight_space_path_with(
    gp: &FittedGP,
    fmap: Arc<FeatureMap>,
    sampler: WeightSampler,
    rng: &mut RngStream,
) -> Result<SamplePath> {
    let phi = fmap.matrix(gp.data().x())?;
    let w = weight_space_draw(&phi, gp.data().y(), gp.sigma_n(), sampler, rng)?;
    SamplePath::new(fmap, w.as_slice().to_vec(), None)
}

/// One draw from the weight posterior for `y = Φw + ε`.
pub fn weight_space_draw(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma_n: f64,
    sampler: WeightSampler,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    check_dim(phi.nrows(), y.len())?;
    if !(sigma_n > 0.0) {
        return Err(Error::InvalidArgument("weight-space sampling needs sigma_n > 0".into()));
    }
    let s2 = sigma_n * sigma_n;
    let nf = phi.ncols();
    match sampler {
        WeightSampler::Cholesky => {
            // A = ΦᵀΦ + σ²I = LLᵀ; w = A⁻¹Φᵀy + σ L⁻ᵀ z has covariance σ²A⁻¹
            let mut a = phi.transpose() * phi;
            for i in 0..nf {
                a[(i, i)] += s2;
            }
            let f = Factor::new(&a, 0.0)?;
            let mean = f.solve_vec(&phi.tr_mul(y));
            let z = DVector::from_vec(rng.normals(nf));
            Ok(mean + f.solve_upper_vec(&z) * sigma_n)
        }
        WeightSampler::Matheron => {
            let mut b = phi * phi.transpose();
            for i in 0..b.nrows() {
                b[(i, i)] += s2;
            }
            let f = Factor::new(&b, 0.0)?;
            let w0 = DVector::from_vec(rng.normals(nf));
            let eps = DVector::from_vec(rng.normals(y.len())) * sigma_n;
            let resid = y - phi * &w0 - eps;
            Ok(w0 + phi.tr_mul(&f.solve_vec(&resid)))
        }
    }
}

/// Pathwise-conditioned posterior path: prior path plus `κ(x, X) C⁻¹(y − f − ε)`.
pub fn draw_pathwise_path(gp: &FittedGP, fmap: Arc<FeatureMap>, rng: &mut RngStream) -> Result<SamplePath> {
    let x = gp.data().x();
    let phi = fmap.matrix(x)?;
    let w = DVector::from_vec(rng.normals(fmap.n_features()));
    let eps = DVector::from_vec(rng.normals(x.nrows())) * gp.sigma_n();
    let resid = gp.data().y() - &phi * &w - eps;
    let v = gp.factor().solve_vec(&resid);
    let update = PcUpdate::new(gp.kernel().clone(), rows_of(x), v.as_slice().to_vec())?;
    SamplePath::new(fmap, w.as_slice().to_vec(), Some(update))
}

/// `count` joint draws (rows) from the exact posterior on the rows of `xq`.
pub fn exhaustive_sample(gp: &FittedGP, xq: &DMatrix<f64>, count: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    let post = gp.predict(xq)?;
    sample_mvn(&post, count, rng)
}

/// Several paths sharing one feature map, evaluated together with matrix products.
#[derive(Debug, Clone)]
pub struct PathBatch {
    fmap: Arc<FeatureMap>,
    /// `N_φ x n_paths`
    weights: DMatrix<f64>,
    /// Training inputs and `N x n_paths` update coefficients for pathwise paths.
    update: Option<(KernelSpec, DMatrix<f64>, DMatrix<f64>)>,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn features(&self) -> &Arc<FeatureMap> {
        &self.fmap
    }

    /// Values of every path at every row of `xq` (`rows x n_paths`).
    pub fn eval(&self, xq: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let phi = self.fmap.matrix(xq)?;
        let mut out = phi * &self.weights;
        if let Some((kernel, xt, v)) = &self.update {
            out += kernel.cross(xq, xt)? * v;
        }
        Ok(out)
    }

    /// Extract path `k` as a standalone [`SamplePath`].
    pub fn path(&self, k: usize) -> SamplePath {
        let w = self.weights.column(k).iter().copied().collect();
        let update = self.update.as_ref().map(|(kernel, xt, v)| PcUpdate {
            kernel: kernel.clone(),
            x: rows_of(xt),
            v: v.column(k).iter().copied().collect(),
        });
        SamplePath::new(self.fmap.clone(), w, update).expect("batch shapes are consistent")
    }
}

/// `n_paths` posterior paths on one shared feature map.
pub fn draw_path_batch(
    gp: &FittedGP,
    fmap: Arc<FeatureMap>,
    kind: PathKind,
    n_paths: usize,
    rng: &mut RngStream,
) -> Result<PathBatch> {
    let x = gp.data().x();
    let phi = fmap.matrix(x)?;
    let nf = fmap.n_features();
    let n = x.nrows();
    match kind {
        PathKind::WeightSpace => {
            let s2 = gp.sigma_n() * gp.sigma_n();
            if !(s2 > 0.0) {
                return Err(Error::InvalidArgument("weight-space sampling needs sigma_n > 0".into()));
            }
            let mut a = phi.transpose() * &phi;
            for i in 0..nf {
                a[(i, i)] += s2;
            }
            let f = Factor::new(&a, 0.0)?;
            let mean = f.solve_vec(&phi.tr_mul(gp.data().y()));
            let mut w = DMatrix::zeros(nf, n_paths);
            for k in 0..n_paths {
                let z = DVector::from_vec(rng.normals(nf));
                w.set_column(k, &(&mean + f.solve_upper_vec(&z) * gp.sigma_n()));
            }
            Ok(PathBatch { fmap, weights: w, update: None })
        }
        PathKind::Pathwise => {
            let w = DMatrix::from_fn(nf, n_paths, |_, _| 0.0);
            let mut w = w;
            for k in 0..n_paths {
                w.set_column(k, &DVector::from_vec(rng.normals(nf)));
            }
            let eps = DMatrix::from_vec(n, n_paths, rng.normals(n * n_paths)) * gp.sigma_n();
            let mut resid = -(&phi * &w) - eps;
            for mut c in resid.column_iter_mut() {
                c += gp.data().y();
            }
            let v = gp.factor().solve(&resid);
            Ok(PathBatch { fmap, weights: w, update: Some((gp.kernel().clone(), x.clone(), v)) })
        }
    }
}

/// Posterior mean and covariance of path values on `xq` implied by a fixed feature map.
/// These are the exact moments of the sampler for that map, without Monte Carlo error.
pub fn path_moments(gp: &FittedGP, fmap: &FeatureMap, kind: PathKind, xq: &DMatrix<f64>) -> Result<GaussianDist> {
    let x = gp.data().x();
    let phi_x = fmap.matrix(x)?;
    let phi_q = fmap.matrix(xq)?;
    let (mean, cov) = match kind {
        PathKind::WeightSpace => {
            let s2 = gp.sigma_n() * gp.sigma_n();
            let mut a = phi_x.transpose() * &phi_x;
            for i in 0..a.nrows() {
                a[(i, i)] += s2;
            }
            let f = Factor::new(&a, 0.0)?;
            let mean = &phi_q * f.solve_vec(&phi_x.tr_mul(gp.data().y()));
            let g = f.solve_lower(&phi_q.transpose());
            (mean, g.transpose() * &g * s2)
        }
        PathKind::Pathwise => {
            // f(ξ) = Φ_ξ w + K_ξX C⁻¹(y − Φ_X w − ε)
            let kqx = gp.kernel().cross(xq, x)?;
            let gain = gp.factor().solve(&kqx.transpose()).transpose();
            let mean = &gain * gp.data().y();
            let m = &phi_q - &gain * &phi_x;
            let s2 = gp.sigma_n() * gp.sigma_n();
            let cov = &m * m.transpose() + (&gain * gain.transpose()) * s2;
            (mean, cov)
        }
    };
    GaussianDist::new(mean, crate::linalg::symmetrize(&cov))
}

/// 2-Wasserstein distance between `exact` and `N(mean, cov)`.
pub fn wasserstein2(exact: &GaussianDist, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    check_dim(exact.dim(), mean.len())?;
    check_dim(exact.dim(), cov.nrows())?;
    check_dim(exact.dim(), cov.ncols())?;
    let s1 = exact.cov();
    let root = crate::linalg::sqrtm_psd(s1);
    let cross = &root * cov * &root;
    let tr = s1.trace() + cov.trace() - 2.0 * crate::linalg::trace_sqrt_psd(&cross);
    let m = (exact.mean() - mean).norm_squared();
    Ok((m + tr).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use crate::kernels::KernelFamily;
    use crate::paths::features::{build_hilbert, build_rff};
    use approx::assert_relative_eq;

    fn toy_gp(sigma_n: f64) -> FittedGP {
        let xs = [0.1, 0.35, 0.5, 0.8, 0.95];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| (6.0 * x).sin()).collect();
        let ds = Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys, vec![(0.0, 1.0)]).unwrap();
        let k = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.2, 1).unwrap();
        FittedGP::new(ds, k, sigma_n).unwrap()
    }

    fn grid(n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn constant_path_has_zero_gradient() {
        let k = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 0.5, 2).unwrap();
        let fmap = Arc::new(build_rff(&k, 20, &mut RngStream::new(0, 0)).unwrap());
        let p = SamplePath::new(fmap, vec![0.0; 20], None).unwrap();
        assert_eq!(p.grad(&[0.3, 0.4]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.value(&[0.3, 0.4]), 0.0);
    }

    #[test]
    fn pathwise_interpolates_training_data() {
        let gp = toy_gp(1e-6);
        let fmap = Arc::new(build_rff(gp.kernel(), 500, &mut RngStream::new(1, 0)).unwrap());
        let p = draw_pathwise_path(&gp, fmap, &mut RngStream::new(2, 0)).unwrap();
        let v = p.eval(gp.data().x()).unwrap();
        for (a, b) in v.iter().zip(gp.data().y().iter()) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn paths_are_deterministic() {
        let gp = toy_gp(1e-3);
        let fmap = Arc::new(build_rff(gp.kernel(), 200, &mut RngStream::new(1, 0)).unwrap());
        let q = grid(15, 0.0, 1.0);
        for draw in [draw_pathwise_path, draw_weight_space_path] {
            let a = draw(&gp, fmap.clone(), &mut RngStream::new(5, 1)).unwrap();
            let b = draw(&gp, fmap.clone(), &mut RngStream::new(5, 1)).unwrap();
            assert_eq!(a.eval(&q).unwrap(), b.eval(&q).unwrap());
            assert_eq!(a.eval(&q).unwrap(), a.eval(&q).unwrap());
        }
    }

    #[test]
    fn weight_space_mean_tracks_predict() {
        let gp = toy_gp(1e-2);
        let q = grid(21, 0.0, 1.0);
        let exact = gp.predict(&q).unwrap();
        let mut rng = RngStream::new(9, 0);
        let fmap = Arc::new(build_rff(gp.kernel(), 2000, &mut rng).unwrap());
        let batch = draw_path_batch(&gp, fmap, PathKind::WeightSpace, 500, &mut rng).unwrap();
        let vals = batch.eval(&q).unwrap();
        let acc = DVector::from_fn(q.nrows(), |i, _| vals.row(i).mean());
        assert!((acc - exact.mean()).amax() <= 0.1);
    }

    #[test]
    fn prior_paths_have_kernel_variance() {
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 1.5, 0.3, 1).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 4000;
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let fmap = Arc::new(build_rff(&k, 50, &mut rng).unwrap());
                draw_prior_path(fmap, &mut rng).value(&[0.4])
            })
            .collect();
        let var = vals.iter().map(|v| v * v).sum::<f64>() / n as f64;
        assert!((var - 2.25).abs() < 4.0 * 2.25 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn matheron_weight_sampler_matches_moments() {
        let mut rng = RngStream::new(11, 0);
        let phi = DMatrix::from_fn(4, 6, |_, _| rng.normal());
        let y = DVector::from_vec(rng.normals(4));
        let post = crate::gp::weight_posterior(&phi, &y, 0.5, false).unwrap();
        let n = 40_000;
        for sampler in [WeightSampler::Cholesky, WeightSampler::Matheron] {
            let mut m = DVector::zeros(6);
            let mut s = DMatrix::zeros(6, 6);
            for _ in 0..n {
                let w = weight_space_draw(&phi, &y, 0.5, sampler, &mut rng).unwrap();
                m += &w;
                s += &w * w.transpose();
            }
            m /= n as f64;
            let cov = s / n as f64 - &m * m.transpose();
            for i in 0..6 {
                let sd = post.cov[(i, i)].sqrt();
                assert!((m[i] - post.mean[i]).abs() < 4.0 * sd / (n as f64).sqrt());
                assert!((cov[(i, i)] - post.cov[(i, i)]).abs() < 4.0 * post.cov[(i, i)] * (2.0 / n as f64).sqrt());
            }
        }
    }

    #[test]
    fn exhaustive_moments() {
        let gp = toy_gp(1e-2);
        let q = grid(20, 0.0, 1.0);
        let exact = gp.predict(&q).unwrap();
        let n = 10_000;
        let draws = exhaustive_sample(&gp, &q, n, &mut RngStream::new(3, 0)).unwrap();
        for j in 0..20 {
            let col = draws.column(j);
            let var = exact.cov()[(j, j)];
            assert!((col.mean() - exact.mean()[j]).abs() <= 4.0 * (var / n as f64).sqrt() + 1e-12);
        }
        let one = exhaustive_sample(&gp, &DMatrix::from_element(1, 1, 0.45), 1, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(one.shape(), (1, 1));
    }

    #[test]
    fn batch_matches_single_paths() {
        let gp = toy_gp(1e-3);
        let fmap = Arc::new(build_hilbert(gp.kernel(), 2.0, 40).unwrap());
        let q = grid(9, 0.0, 1.0);
        for kind in [PathKind::Pathwise, PathKind::WeightSpace] {
            let batch = draw_path_batch(&gp, fmap.clone(), kind, 3, &mut RngStream::new(8, 0)).unwrap();
            let vals = batch.eval(&q).unwrap();
            for k in 0..3 {
                let single = batch.path(k).eval(&q).unwrap();
                for i in 0..9 {
                    assert_relative_eq!(vals[(i, k)], single[i], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn pathwise_gradient_matches_fd() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, (i as f64 * 0.37) % 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[1] + x[0].sin()).collect();
        let ds = Dataset::new(xs, ys, vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let k = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![0.3, 0.5]).unwrap();
        let gp = FittedGP::new(ds, k.clone(), 1e-3).unwrap();
        let mut rng = RngStream::new(12, 0);
        let fmap = Arc::new(build_rff(&k, 300, &mut rng).unwrap());
        let p = draw_pathwise_path(&gp, fmap, &mut rng).unwrap();
        for _ in 0..20 {
            let x = [rng.uniform(), rng.uniform()];
            let g = p.grad(&x).unwrap();
            for i in 0..2 {
                let h = 1e-6;
                let (mut a, mut b) = (x, x);
                a[i] += h;
                b[i] -= h;
                let fd = (p.value(&a) - p.value(&b)) / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-5, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn path_moments_match_exact_for_rich_features() {
        let gp = toy_gp(1e-2);
        let q = grid(10, 0.0, 1.0);
        let exact = gp.predict(&q).unwrap();
        let fmap = build_hilbert(gp.kernel(), 3.0, 120).unwrap();
        for kind in [PathKind::Pathwise, PathKind::WeightSpace] {
            let m = path_moments(&gp, &fmap, kind, &q).unwrap();
            let d = wasserstein2(&exact, m.mean(), m.cov()).unwrap();
            assert!(d < 1e-3, "{kind:?}: {d}");
        }
    }

    #[test]
    fn wasserstein_closed_forms() {
        let a = GaussianDist::new(DVector::from_vec(vec![1.0, 2.0]), DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        assert!(wasserstein2(&a, a.mean(), a.cov()).unwrap() < 1e-8);
        let shift = DVector::from_vec(vec![3.0, -4.0]);
        assert_relative_eq!(wasserstein2(&a, &(a.mean() + &shift), a.cov()).unwrap(), 5.0, epsilon = 1e-7);
        let (da, db) = ([4.0, 1.0, 0.25], [1.0, 9.0, 0.25]);
        let ga = GaussianDist::new(DVector::zeros(3), DMatrix::from_diagonal(&DVector::from_vec(da.to_vec()))).unwrap();
        let expected: f64 = da.iter().zip(&db).map(|(a, b): (&f64, &f64)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>().sqrt();
        let got = wasserstein2(&ga, &DVector::zeros(3), &DMatrix::from_diagonal(&DVector::from_vec(db.to_vec()))).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-10);
    }
}
