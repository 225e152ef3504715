//! Finite feature maps φ with κ(x, x') ≈ φ(x)ᵀφ(x').

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::halton::halton;
use crate::fastmath::{cos_in_place, sincos_slice};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{KernelFamily, KernelSpec, SpectralKind};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Rff,
    Qmc,
    MercerSe,
    HilbertDirichlet,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::Rff, FeatureKind::Qmc, FeatureKind::MercerSe, FeatureKind::HilbertDirichlet];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Rff => "rff",
            FeatureKind::Qmc => "qmc",
            FeatureKind::MercerSe => "mercer",
            FeatureKind::HilbertDirichlet => "hilbert",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature map `{s}`")))
    }

    /// Whether building the map consumes randomness.
    pub fn is_random(self) -> bool {
        self == FeatureKind::Rff
    }
}

/// One-dimensional orthonormal basis used by tensor-product maps.
#[derive(Debug, Clone)]
enum Basis1d {
    /// Hermite-type SE eigenfunctions under N(0, σ²).
    Mercer { a: f64, c: f64, log_norm: f64 },
    /// Dirichlet Laplacian eigenfunctions on [-L, L].
    Dirichlet { half_width: f64 },
}

impl Basis1d {
    /// Values and derivatives of basis functions `0..n` (Mercer) or `1..=n` (Dirichlet)
    /// at `x`, stored at positions `0..n`.
    fn eval(&self, x: f64, n: usize, val: &mut [f64], der: &mut [f64]) {
        match *self {
            Basis1d::Mercer { a, c, log_norm } => {
                // normalized Hermite functions h_k(u) = φ_k(u)·e^{u²/2}, carried with a
                // per-term log scale so that large k or |u| cannot overflow
                let u = c.sqrt() * x;
                let base = log_norm - 0.5 * u * u + 0.5 * a * x * x;
                let m = n + 1;
                let mut mant = vec![0.0; m + 1];
                let mut expo = vec![0.0; m + 1];
                mant[0] = std::f64::consts::PI.powf(-0.25);
                if m >= 1 {
                    mant[1] = 2f64.sqrt() * u * mant[0];
                }
                let mut shift = 0.0;
                for k in 1..m {
                    let next = (2.0 / (k + 1) as f64).sqrt() * u * mant[k] - (k as f64 / (k + 1) as f64).sqrt() * mant[k - 1];
                    mant[k + 1] = next;
                    expo[k + 1] = shift;
                    if next.abs() > 1e150 {
                        mant[k] *= 1e-150;
                        mant[k + 1] *= 1e-150;
                        shift += 150.0 * std::f64::consts::LN_10;
                        expo[k + 1] = shift;
                    }
                }
                let value = |k: usize| mant[k] * (expo[k] + base).exp();
                for k in 0..n {
                    let vk = value(k);
                    val[k] = vk;
                    // φ_k'(u) = √(k/2) φ_{k-1} − √((k+1)/2) φ_{k+1}
                    let dphi = if k > 0 { (k as f64 / 2.0).sqrt() * value(k - 1) } else { 0.0 }
                        - ((k + 1) as f64 / 2.0).sqrt() * value(k + 1);
                    der[k] = c.sqrt() * dphi + a * x * vk;
                }
            }
            Basis1d::Dirichlet { half_width: l } => {
                let s = l.powf(-0.5);
                for k in 0..n {
                    let w = std::f64::consts::PI * (k + 1) as f64 / (2.0 * l);
                    let (sn, cs) = (w * (x + l)).sin_cos();
                    val[k] = s * sn;
                    der[k] = s * w * cs;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    /// `amp·cos(ωᵀx + b)`; `omega[j]` holds coordinate `j` of every frequency.
    Cosine { omega: Vec<Vec<f64>>, phase: Vec<f64>, amp: f64 },
    /// Products of one-dimensional basis functions with coefficients.
    Tensor { basis: Vec<Basis1d>, index: Vec<Vec<usize>>, coef: Vec<f64>, per_dim: Vec<usize> },
}

/// A feature map with `n_features` basis functions on `d` inputs.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    kind: FeatureKind,
    dim: usize,
    repr: Repr,
}

/// Arguments `ωₖᵀx + bₖ` of every cosine feature.
fn cosine_args(omega: &[Vec<f64>], phase: &[f64], x: &[f64], t: &mut [f64]) {
    t.copy_from_slice(phase);
    for (col, &xj) in omega.iter().zip(x) {
        for (tk, wk) in t.iter_mut().zip(col) {
            *tk += wk * xj;
        }
    }
}

impl FeatureMap {
    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_features(&self) -> usize {
        match &self.repr {
            Repr::Cosine { phase, .. } => phase.len(),
            Repr::Tensor { coef, .. } => coef.len(),
        }
    }

    /// Per-coordinate frequencies, phases and amplitude of a cosine map.
    pub(crate) fn cosine_parts(&self) -> Option<(&[Vec<f64>], &[f64], f64)> {
        match &self.repr {
            Repr::Cosine { omega, phase, amp } => Some((omega, phase, *amp)),
            Repr::Tensor { .. } => None,
        }
    }

    /// Frequencies (`n_features x d`) and phases of a cosine map.
    pub fn frequencies(&self) -> Option<(DMatrix<f64>, Vec<f64>)> {
        match &self.repr {
            Repr::Cosine { omega, phase, .. } => {
                Some((DMatrix::from_fn(phase.len(), self.dim, |k, j| omega[j][k]), phase.clone()))
            }
            Repr::Tensor { .. } => None,
        }
    }

    /// φ(x) written into `out` (length `n_features`).
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Cosine { omega, phase, amp } => {
                cosine_args(omega, phase, x, out);
                cos_in_place(out);
                out.iter_mut().for_each(|o| *o *= amp);
            }
            Repr::Tensor { basis, index, coef, per_dim } => {
                let (vals, _) = tensor_tables(basis, per_dim, x);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = coef[k] * index[k].iter().enumerate().map(|(i, &j)| vals[i][j]).product::<f64>();
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.n_features()];
        self.eval_into(x, &mut out);
        Ok(out)
    }

    /// Feature matrix Φ (`n x n_features`) for the rows of `x`.
    pub fn matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim, x.ncols())?;
        let nf = self.n_features();
        let n = x.nrows();
        match &self.repr {
            Repr::Cosine { omega, phase, amp } => {
                // column-major: column k holds feature k at every point
                let mut phi = DMatrix::zeros(n, nf);
                for (k, mut col) in phi.column_iter_mut().enumerate() {
                    col.fill(phase[k]);
                    for (j, om) in omega.iter().enumerate() {
                        col.axpy(om[k], &x.column(j), 1.0);
                    }
                }
                let data = phi.as_mut_slice();
                cos_in_place(data);
                data.iter_mut().for_each(|v| *v *= amp);
                Ok(phi)
            }
            Repr::Tensor { .. } => {
                let mut phi = DMatrix::zeros(n, nf);
                let mut row = vec![0.0; nf];
                let mut xi = vec![0.0; self.dim];
                for i in 0..n {
                    xi.iter_mut().enumerate().for_each(|(j, v)| *v = x[(i, j)]);
                    self.eval_into(&xi, &mut row);
                    for k in 0..nf {
                        phi[(i, k)] = row[k];
                    }
                }
                Ok(phi)
            }
        }
    }

    /// `wᵀφ(x)`, and its gradient added into `grad` when given.
    pub fn weighted(&self, w: &[f64], x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        match &self.repr {
            Repr::Cosine { omega, phase, amp } => {
                let mut t = vec![0.0; phase.len()];
                cosine_args(omega, phase, x, &mut t);
                match grad {
                    None => {
                        cos_in_place(&mut t);
                        amp * t.iter().zip(w).map(|(c, wk)| c * wk).sum::<f64>()
                    }
                    Some(g) => {
                        let mut s = vec![0.0; t.len()];
                        let mut c = vec![0.0; t.len()];
                        sincos_slice(&t, &mut s, &mut c);
                        // s ← wₖ sin(tₖ)
                        s.iter_mut().zip(w).for_each(|(sk, wk)| *sk *= wk);
                        for (gj, col) in g.iter_mut().zip(omega) {
                            *gj -= amp * col.iter().zip(&s).map(|(o, sk)| o * sk).sum::<f64>();
                        }
                        amp * c.iter().zip(w).map(|(ck, wk)| ck * wk).sum::<f64>()
                    }
                }
            }
            Repr::Tensor { basis, index, coef, per_dim } => {
                let (vals, ders) = tensor_tables(basis, per_dim, x);
                let mut val = 0.0;
                let d = self.dim;
                let mut gacc = vec![0.0; d];
                for k in 0..coef.len() {
                    let idx = &index[k];
                    let p: f64 = idx.iter().enumerate().map(|(i, &j)| vals[i][j]).product();
                    val += w[k] * coef[k] * p;
                    for i in 0..d {
                        let mut q = ders[i][idx[i]];
                        for (m, &j) in idx.iter().enumerate() {
                            if m != i {
                                q *= vals[m][j];
                            }
                        }
                        gacc[i] += w[k] * coef[k] * q;
                    }
                }
                if let Some(g) = grad {
                    for i in 0..d {
                        g[i] += gacc[i];
                    }
                }
                val
            }
        }
    }
}

fn tensor_tables(basis: &[Basis1d], per_dim: &[usize], x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut vals = Vec::with_capacity(basis.len());
    let mut ders = Vec::with_capacity(basis.len());
    for (i, b) in basis.iter().enumerate() {
        let mut v = vec![0.0; per_dim[i]];
        let mut dv = vec![0.0; per_dim[i]];
        b.eval(x[i], per_dim[i], &mut v, &mut dv);
        vals.push(v);
        ders.push(dv);
    }
    (vals, ders)
}

/// Random Fourier features: ω ~ p(ω), b ~ U(0, 2π).
pub fn build_rff(spec: &KernelSpec, n_features: usize, rng: &mut RngStream) -> Result<FeatureMap> {
    if n_features == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    let sd = spec.spectral_density();
    let w = sd.sample(n_features, rng);
    let d = spec.dim();
    let omega = (0..d).map(|j| w.column(j).iter().copied().collect()).collect();
    let phase = (0..n_features).map(|_| 2.0 * std::f64::consts::PI * rng.uniform()).collect();
    Ok(cosine_map(FeatureKind::Rff, spec, omega, phase))
}

fn cosine_map(kind: FeatureKind, spec: &KernelSpec, omega: Vec<Vec<f64>>, phase: Vec<f64>) -> FeatureMap {
    let amp = (2.0 * spec.variance() / phase.len() as f64).sqrt();
    FeatureMap { kind, dim: spec.dim(), repr: Repr::Cosine { omega, phase, amp } }
}

/// Quasi-Monte Carlo features from a Halton sequence. Student-t frequencies use
/// one extra coordinate for the chi-square mixing variable.
pub fn build_qmc(spec: &KernelSpec, n_features: usize) -> Result<FeatureMap> {
    if n_features == 0 {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    let d = spec.dim();
    let sd = spec.spectral_density();
    let extra = matches!(sd.kind, SpectralKind::StudentT { .. }) as usize;
    let pts = halton(n_features, d + 1 + extra);
    let normal = Normal::standard();
    let chi = match sd.kind {
        SpectralKind::StudentT { dof } => Some((ChiSquared::new(dof).expect("dof > 0"), dof)),
        SpectralKind::Gaussian => None,
    };
    let mut omega = vec![Vec::with_capacity(n_features); d];
    let mut phase = Vec::with_capacity(n_features);
    for t in &pts {
        let mix = match &chi {
            Some((c, dof)) => (c.inverse_cdf(t[d]) / dof).sqrt(),
            None => 1.0,
        };
        for j in 0..d {
            omega[j].push(normal.inverse_cdf(t[j]) * sd.scale[j].sqrt() / mix);
        }
        phase.push(2.0 * std::f64::consts::PI * t[d + extra]);
    }
    Ok(cosine_map(FeatureKind::Qmc, spec, omega, phase))
}

/// Select the `n` multi-indices (one per dimension, each `< m`) with the largest weight.
fn top_indices(d: usize, m: usize, n: usize, weight: impl Fn(&[usize]) -> f64) -> Vec<(Vec<usize>, f64)> {
    let total = m.pow(d as u32);
    let mut all: Vec<(Vec<usize>, f64)> = (0..total)
        .map(|mut flat| {
            let idx: Vec<usize> = (0..d)
                .map(|_| {
                    let v = flat % m;
                    flat /= m;
                    v
                })
                .collect();
            let w = weight(&idx);
            (idx, w)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    all.truncate(n);
    all
}

fn per_dim_count(d: usize, n: usize) -> usize {
    let mut m = (n as f64).powf(1.0 / d as f64).ceil() as usize;
    while m.pow(d as u32) < n {
        m += 1;
    }
    m
}

/// Mercer expansion of the SE kernel under the Gaussian measure N(0, σ²) per dimension.
pub fn build_mercer_se(spec: &KernelSpec, measure_sigma: f64, n_features: usize) -> Result<FeatureMap> {
    if spec.family() != KernelFamily::SquaredExponential {
        return Err(Error::InvalidArgument("Mercer expansion is only available for the SE kernel".into()));
    }
    let d = spec.dim();
    if d > 3 {
        return Err(Error::InvalidArgument("Mercer expansion is limited to d <= 3".into()));
    }
    if n_features == 0 || !(measure_sigma > 0.0) {
        return Err(Error::InvalidArgument("need n_features >= 1 and sigma > 0".into()));
    }
    let a = 1.0 / (2.0 * measure_sigma * measure_sigma);
    let mut basis = Vec::new();
    let mut log_ratio = Vec::new();
    let mut log_l0 = Vec::new();
    for &l in spec.lengthscales() {
        let b = 1.0 / (2.0 * l * l);
        let c = (a * a + 4.0 * a * b).sqrt();
        let big_a = 0.5 * a + b + 0.5 * c;
        basis.push(Basis1d::Mercer { a, c, log_norm: 0.25 * (std::f64::consts::PI * c / a).ln() });
        log_l0.push(0.5 * (a / big_a).ln());
        log_ratio.push((b / big_a).ln());
    }
    let m = per_dim_count(d, n_features);
    let log_lambda = |idx: &[usize]| -> f64 { idx.iter().enumerate().map(|(i, &k)| log_l0[i] + k as f64 * log_ratio[i]).sum() };
    let chosen = top_indices(d, m, n_features, log_lambda);
    let per_dim = (0..d).map(|i| chosen.iter().map(|c| c.0[i]).max().unwrap() + 1).collect();
    let coef = chosen.iter().map(|(_, ll)| spec.sigma_f() * (0.5 * ll).exp()).collect();
    let index = chosen.into_iter().map(|c| c.0).collect();
    Ok(FeatureMap { kind: FeatureKind::MercerSe, dim: d, repr: Repr::Tensor { basis, index, coef, per_dim } })
}

/// Eigenvalues `λ_k = π²k²/(4L²)` of the Dirichlet Laplacian on `[-L, L]`, `k ≥ 1`.
pub fn dirichlet_eigenvalue(k: usize, half_width: f64) -> f64 {
    let t = std::f64::consts::PI * k as f64 / (2.0 * half_width);
    t * t
}

/// Hilbert-space approximation with Dirichlet boundaries on `[-L, L]^d`.
pub fn build_hilbert(spec: &KernelSpec, half_width: f64, n_features: usize) -> Result<FeatureMap> {
    let d = spec.dim();
    if d > 3 {
        return Err(Error::InvalidArgument("Hilbert approximation is limited to d <= 3".into()));
    }
    if n_features == 0 || !(half_width > 0.0) {
        return Err(Error::InvalidArgument("need n_features >= 1 and L > 0".into()));
    }
    let basis = vec![Basis1d::Dirichlet { half_width }; d];
    let m = per_dim_count(d, n_features);
    let s_of = |idx: &[usize]| -> f64 {
        let w: Vec<f64> = idx.iter().map(|&k| dirichlet_eigenvalue(k + 1, half_width).sqrt()).collect();
        spec.spectral_value(&w)
    };
    let chosen = top_indices(d, m, n_features, s_of);
    let per_dim = (0..d).map(|i| chosen.iter().map(|c| c.0[i]).max().unwrap() + 1).collect();
    let coef = chosen.iter().map(|(_, s)| s.max(0.0).sqrt()).collect();
    let index = chosen.into_iter().map(|c| c.0).collect();
    Ok(FeatureMap { kind: FeatureKind::HilbertDirichlet, dim: d, repr: Repr::Tensor { basis, index, coef, per_dim } })
}

/// Approximate kernel `φ(x)ᵀφ(x')`.
pub fn approx_kernel(fmap: &FeatureMap, x: &[f64], x2: &[f64]) -> f64 {
    let a = fmap.eval(x).expect("dimension checked by caller");
    let b = fmap.eval(x2).expect("dimension checked by caller");
    a.iter().zip(&b).map(|(p, q)| p * q).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn se(l: f64) -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, l, 1).unwrap()
    }

    #[test]
    fn rff_norm_bound() {
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 1.3, 0.5, 2).unwrap();
        let f = build_rff(&k, 300, &mut RngStream::new(1, 0)).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [5.0, 3.0]] {
            let v = f.eval(&x).unwrap();
            assert!(v.iter().map(|t| t * t).sum::<f64>() <= 2.0 * k.variance() + 1e-12);
        }
    }

    #[test]
    fn rff_reconstruction_error() {
        let k = se(1.0);
        let f = build_rff(&k, 5000, &mut RngStream::new(2, 0)).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let mut err = 0.0;
        for &a in &grid {
            err += (approx_kernel(&f, &[a], &[0.0]) - k.eval(&[a], &[0.0]).unwrap()).abs();
        }
        assert!(err / grid.len() as f64 <= 0.05);
    }

    #[test]
    fn qmc_first_frequency_is_zero() {
        let f = build_qmc(&se(1.0), 8).unwrap();
        let (w, b) = f.frequencies().unwrap();
        assert_eq!(w[(0, 0)], 0.0);
        assert_relative_eq!(b[0], 2.0 * std::f64::consts::PI / 3.0, epsilon = 1e-15);
        let g = build_qmc(&se(1.0), 8).unwrap();
        assert_eq!(f.frequencies(), g.frequencies());
    }

    #[test]
    fn qmc_matern_is_reasonable() {
        let k = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap();
        let f = build_qmc(&k, 4000).unwrap();
        for t in [0.0, 0.5, 1.5] {
            assert!((approx_kernel(&f, &[t], &[0.0]) - k.eval(&[t], &[0.0]).unwrap()).abs() < 0.02);
        }
    }

    #[test]
    fn mercer_geometric_eigenvalues() {
        let l = 5f64.sqrt();
        let sigma = 3f64.sqrt() / 2.0;
        let f = build_mercer_se(&se(l), sigma, 6).unwrap();
        let a = 1.0 / (2.0 * sigma * sigma);
        let b = 1.0 / (2.0 * l * l);
        let c = (a * a + 4.0 * a * b).sqrt();
        let big_a = 0.5 * a + b + 0.5 * c;
        if let Repr::Tensor { coef, .. } = &f.repr {
            for k in 0..5 {
                assert_relative_eq!((coef[k] / coef[k + 1]).powi(2), big_a / b, max_relative = 1e-12);
            }
        } else {
            panic!("expected tensor map");
        }
    }

    #[test]
    fn mercer_reconstructs_at_origin() {
        let f = build_mercer_se(&se(5f64.sqrt()), 3f64.sqrt() / 2.0, 30).unwrap();
        assert!((approx_kernel(&f, &[0.0], &[0.0]) - 1.0).abs() < 1e-6);
        assert!((approx_kernel(&f, &[1.0], &[-0.5]) - se(5f64.sqrt()).eval(&[1.0], &[-0.5]).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn mercer_large_argument_is_finite() {
        let f = build_mercer_se(&se(0.3), 1.0, 200).unwrap();
        let v = f.eval(&[40.0]).unwrap();
        assert!(v.iter().all(|t| t.is_finite()));
    }

    #[test]
    fn hilbert_boundary_and_accuracy() {
        let k = se(1.0);
        let f = build_hilbert(&k, 5.0, 32).unwrap();
        assert!(f.eval(&[-5.0]).unwrap().iter().all(|v| v.abs() < 1e-12));
        let mut err = 0.0;
        let mut n = 0;
        for i in 0..=20 {
            for j in 0..=20 {
                let (a, b) = (-2.0 + 0.2 * i as f64, -2.0 + 0.2 * j as f64);
                err += (approx_kernel(&f, &[a], &[b]) - k.eval(&[a], &[b]).unwrap()).abs();
                n += 1;
            }
        }
        assert!(err / (n as f64) < 1e-3, "{}", err / n as f64);
    }

    #[test]
    fn tensor_maps_in_two_dims() {
        let k = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![0.8, 1.2]).unwrap();
        let h = build_hilbert(&k, 6.0, 900).unwrap();
        let m = build_mercer_se(&k, 1.0, 400).unwrap();
        let (x, y) = ([0.3, -0.4], [-0.2, 0.5]);
        let exact = k.eval(&x, &y).unwrap();
        assert!((approx_kernel(&h, &x, &y) - exact).abs() < 1e-3);
        assert!((approx_kernel(&m, &x, &y) - exact).abs() < 1e-3);
    }

    #[test]
    fn weighted_gradient_matches_fd() {
        let k = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![0.8, 1.2]).unwrap();
        let mut rng = RngStream::new(3, 0);
        let maps = vec![
            build_rff(&k, 50, &mut rng).unwrap(),
            build_hilbert(&k, 4.0, 49).unwrap(),
            build_mercer_se(&k, 1.0, 49).unwrap(),
        ];
        for f in maps {
            let w = rng.normals(f.n_features());
            let x = [0.37, -0.81];
            let mut g = vec![0.0; 2];
            let v = f.weighted(&w, &x, Some(&mut g));
            let phi = f.eval(&x).unwrap();
            assert_relative_eq!(v, phi.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>(), epsilon = 1e-12);
            for i in 0..2 {
                let h = 1e-6;
                let mut a = x;
                a[i] += h;
                let mut b = x;
                b[i] -= h;
                let fd = (f.weighted(&w, &a, None) - f.weighted(&w, &b, None)) / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }
}
