//! Stationary covariance functions and their spectral densities.

use nalgebra::DMatrix;
use rand_distr::{ChiSquared, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "SE")]
    SquaredExponential,
    Matern32,
    Matern52,
}

impl KernelFamily {
    /// Smoothness ν of the Matérn family; `None` for SE.
    pub fn nu(self) -> Option<f64> {
        match self {
            KernelFamily::SquaredExponential => None,
            KernelFamily::Matern32 => Some(1.5),
            KernelFamily::Matern52 => Some(2.5),
        }
    }

    /// κ as a function of the scaled squared distance r², with unit output scale.
    #[inline]
    pub fn unit_value(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern32 => {
                let ar = (3.0 * r2).sqrt();
                (1.0 + ar) * (-ar).exp()
            }
            KernelFamily::Matern52 => {
                let ar = (5.0 * r2).sqrt();
                (1.0 + ar + ar * ar / 3.0) * (-ar).exp()
            }
        }
    }

    /// dκ/d(r²) with unit output scale.
    #[inline]
    pub fn unit_deriv_r2(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => -0.5 * (-0.5 * r2).exp(),
            KernelFamily::Matern32 => {
                let ar = (3.0 * r2).sqrt();
                -1.5 * (-ar).exp()
            }
            KernelFamily::Matern52 => {
                let ar = (5.0 * r2).sqrt();
                -5.0 / 6.0 * (1.0 + ar) * (-ar).exp()
            }
        }
    }
}

/// Covariance family with output scale and per-dimension lengthscales.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    sigma_f: f64,
    lengthscales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, sigma_f: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one dimension".into()));
        }
        if !(sigma_f > 0.0 && sigma_f.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma_f must be positive, got {sigma_f}")));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!("lengthscale must be positive, got {l}")));
        }
        Ok(Self { family, sigma_f, lengthscales })
    }

    pub fn isotropic(family: KernelFamily, sigma_f: f64, l: f64, d: usize) -> Result<Self> {
        Self::new(family, sigma_f, vec![l; d])
    }

    /// Build from `[log σ_f, log l₁, …, log l_d]`.
    pub fn from_log_params(family: KernelFamily, p: &[f64]) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidArgument("need log sigma_f and at least one log lengthscale".into()));
        }
        Self::new(family, p[0].exp(), p[1..].iter().map(|v| v.exp()).collect())
    }

    pub fn log_params(&self) -> Vec<f64> {
        std::iter::once(self.sigma_f.ln()).chain(self.lengthscales.iter().map(|l| l.ln())).collect()
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }
    pub fn sigma_f(&self) -> f64 {
        self.sigma_f
    }
    pub fn variance(&self) -> f64 {
        self.sigma_f * self.sigma_f
    }
    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }
    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    pub fn scaled_sqdist(&self, x: &[f64], x2: &[f64]) -> f64 {
        x.iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let t = (a - b) / l;
                t * t
            })
            .sum()
    }

    /// κ(x, x2) without dimension checks.
    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        self.variance() * self.family.unit_value(self.scaled_sqdist(x, x2))
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), x2.len())?;
        Ok(self.eval_unchecked(x, x2))
    }

    /// Gradient of κ(x, x2) with respect to `x`, written into `out`.
    #[inline]
    pub fn grad_x_into(&self, x: &[f64], x2: &[f64], scale: f64, out: &mut [f64]) {
        let r2 = self.scaled_sqdist(x, x2);
        let g = 2.0 * scale * self.variance() * self.family.unit_deriv_r2(r2);
        for i in 0..x.len() {
            out[i] += g * (x[i] - x2[i]) / (self.lengthscales[i] * self.lengthscales[i]);
        }
    }

    pub fn grad_x(&self, x: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), x2.len())?;
        let mut out = vec![0.0; x.len()];
        self.grad_x_into(x, x2, 1.0, &mut out);
        Ok(out)
    }

    /// Cross-covariance between the rows of `x` and `x2`; `noise²` is added on
    /// the diagonal only when `square_self` is set (`x` and `x2` are the same set).
    pub fn gram_with(&self, x: &DMatrix<f64>, x2: &DMatrix<f64>, noise: f64, square_self: bool) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.ncols())?;
        check_dim(self.dim(), x2.ncols())?;
        let xr = rows(x);
        let x2r = if square_self { xr.clone() } else { rows(x2) };
        let mut k = DMatrix::zeros(x.nrows(), x2.nrows());
        if square_self {
            for j in 0..xr.len() {
                for i in j..xr.len() {
                    let v = self.eval_unchecked(&xr[i], &xr[j]);
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
                k[(j, j)] += noise * noise;
            }
        } else {
            for j in 0..x2r.len() {
                for i in 0..xr.len() {
                    k[(i, j)] = self.eval_unchecked(&xr[i], &x2r[j]);
                }
            }
        }
        Ok(k)
    }

    /// Self-gram `K(X, X) + noise² I`.
    pub fn gram(&self, x: &DMatrix<f64>, noise: f64) -> Result<DMatrix<f64>> {
        self.gram_with(x, x, noise, true)
    }

    /// Cross-gram `K(X, X2)` (no noise).
    pub fn cross(&self, x: &DMatrix<f64>, x2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.gram_with(x, x2, 0.0, false)
    }

    pub fn spectral_density(&self) -> SpectralDensity {
        let scale = self.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let kind = match self.family.nu() {
            None => SpectralKind::Gaussian,
            Some(nu) => SpectralKind::StudentT { dof: 2.0 * nu },
        };
        SpectralDensity { kind, scale }
    }

    /// Fourier transform S(ω) with the convention κ(τ) = ∫ S(ω) e^{iωτ} dω / (2π)^d.
    pub fn spectral_value(&self, omega: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let prod_l: f64 = self.lengthscales.iter().product();
        let q: f64 = omega.iter().zip(&self.lengthscales).map(|(w, l)| (w * l).powi(2)).sum();
        match self.family.nu() {
            None => self.variance() * (2.0 * std::f64::consts::PI).powf(d / 2.0) * prod_l * (-0.5 * q).exp(),
            Some(nu) => {
                let ln_c = d * 2f64.ln() + 0.5 * d * std::f64::consts::PI.ln() + ln_gamma(nu + d / 2.0) - ln_gamma(nu)
                    + nu * (2.0 * nu).ln();
                self.variance() * prod_l * (ln_c - (nu + d / 2.0) * (2.0 * nu + q).ln()).exp()
            }
        }
    }
}

pub(crate) fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralKind {
    Gaussian,
    StudentT { dof: f64 },
}

/// Normalized spectral density p(ω): zero-mean with diagonal scale `l⁻²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub kind: SpectralKind,
    pub scale: Vec<f64>,
}

impl SpectralDensity {
    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// `count x d` matrix of i.i.d. frequency draws.
    pub fn sample(&self, count: usize, rng: &mut RngStream) -> DMatrix<f64> {
        let d = self.dim();
        let chi = match self.kind {
            SpectralKind::StudentT { dof } => Some((ChiSquared::new(dof).expect("dof > 0"), dof)),
            SpectralKind::Gaussian => None,
        };
        let mut out = DMatrix::zeros(count, d);
        for k in 0..count {
            let mix = match &chi {
                Some((c, dof)) => (c.sample(rng) / dof).sqrt(),
                None => 1.0,
            };
            for j in 0..d {
                out[(k, j)] = rng.normal() * self.scale[j].sqrt() / mix;
            }
        }
        out
    }
}

/// JSON form of a fitted kernel together with its noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRecord {
    pub family: KernelFamily,
    pub sigma_f: f64,
    pub lengthscales: Vec<f64>,
    pub sigma_n: f64,
}

impl KernelRecord {
    pub fn from_spec(spec: &KernelSpec, sigma_n: f64) -> Self {
        Self { family: spec.family, sigma_f: spec.sigma_f, lengthscales: spec.lengthscales.clone(), sigma_n }
    }

    pub fn to_spec(&self) -> Result<(KernelSpec, f64)> {
        Ok((KernelSpec::new(self.family, self.sigma_f, self.lengthscales.clone())?, self.sigma_n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn se1() -> KernelSpec {
        KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 1.0, 1).unwrap()
    }

    #[test]
    fn zero_lag_is_variance() {
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52] {
            let k = KernelSpec::new(fam, 1.7, vec![0.3, 2.0]).unwrap();
            assert_relative_eq!(k.eval(&[0.2, 0.1], &[0.2, 0.1]).unwrap(), 1.7 * 1.7);
        }
    }

    #[test]
    fn unit_distance_values() {
        assert_relative_eq!(se1().eval(&[0.0], &[1.0]).unwrap(), (-0.5f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(se1().eval(&[0.0], &[1.0]).unwrap(), 0.60653, epsilon = 1e-5);
        let m = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap();
        let s5 = 5f64.sqrt();
        assert_relative_eq!(m.eval(&[0.0], &[1.0]).unwrap(), (1.0 + s5 + 5.0 / 3.0) * (-s5).exp(), epsilon = 1e-15);
        let m3 = KernelSpec::isotropic(KernelFamily::Matern32, 1.0, 1.0, 1).unwrap();
        let s3 = 3f64.sqrt();
        assert_relative_eq!(m3.eval(&[0.0], &[1.0]).unwrap(), (1.0 + s3) * (-s3).exp(), epsilon = 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(se1().eval(&[0.0, 1.0], &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn gram_examples() {
        let k = se1();
        let x = DMatrix::from_row_slice(1, 1, &[0.4]);
        assert_eq!(k.gram(&x, 0.0).unwrap()[(0, 0)], 1.0);
        let x2 = DMatrix::from_row_slice(2, 1, &[0.4, 0.4]);
        let g = k.gram(&x2, 0.1).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.01, epsilon = 1e-15);
        assert_relative_eq!(g[(0, 1)], 1.0);
        let c = k.cross(&x2, &x2).unwrap();
        assert_eq!(c[(0, 0)], 1.0);
    }

    #[test]
    fn gram_matches_loop() {
        let mut rng = RngStream::new(5, 0);
        let k = KernelSpec::new(KernelFamily::Matern32, 1.3, vec![0.5, 1.5]).unwrap();
        let x = DMatrix::from_fn(5, 2, |_, _| rng.uniform());
        let g = k.gram(&x, 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let a = [x[(i, 0)], x[(i, 1)]];
                let b = [x[(j, 0)], x[(j, 1)]];
                assert_eq!(g[(i, j)], k.eval(&a, &b).unwrap());
            }
        }
    }

    #[test]
    fn grad_examples() {
        assert_eq!(se1().grad_x(&[0.3], &[0.3]).unwrap(), vec![0.0]);
        let g = se1().grad_x(&[1.0], &[0.0]).unwrap();
        assert_relative_eq!(g[0], -(-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn spectral_kinds() {
        let s = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 1.0, 2).unwrap().spectral_density();
        assert_eq!(s.kind, SpectralKind::Gaussian);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        let s = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 2.0, 1).unwrap().spectral_density();
        assert_eq!(s.scale, vec![0.25]);
        let s = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap().spectral_density();
        assert_eq!(s.kind, SpectralKind::StudentT { dof: 5.0 });
    }

    fn sample_var(sd: &SpectralDensity, seed: u64) -> (f64, f64) {
        let n = 100_000;
        let w = sd.sample(n, &mut RngStream::new(seed, 0));
        let v = w.column(0).map(|t| t * t).mean();
        let m4 = w.column(0).map(|t| t.powi(4)).mean();
        (v, ((m4 - v * v) / n as f64).sqrt())
    }

    #[test]
    fn frequency_moments() {
        let (v, se) = sample_var(&se1().spectral_density(), 1);
        assert!((v - 1.0).abs() < 3.0 * se);
        let k2 = KernelSpec::isotropic(KernelFamily::SquaredExponential, 1.0, 2.0, 1).unwrap();
        let (v, se) = sample_var(&k2.spectral_density(), 2);
        assert!((v - 0.25).abs() < 3.0 * se);
        // Student-t with 5 dof has a heavy fourth moment; use a looser band.
        let m = KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 1.0, 1).unwrap();
        let (v, _) = sample_var(&m.spectral_density(), 3);
        assert!((v - 5.0 / 3.0).abs() < 0.1, "{v}");
    }

    #[test]
    fn spectral_value_integrates_to_variance() {
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52] {
            let k = KernelSpec::isotropic(fam, 1.4, 0.7, 1).unwrap();
            let h = 1e-3;
            let integral: f64 = (-200_000..=200_000).map(|i| k.spectral_value(&[i as f64 * h]) * h).sum();
            assert_relative_eq!(integral / (2.0 * std::f64::consts::PI), k.variance(), max_relative = 1e-3);
            // Fourier pair at a nonzero lag
            let tau = 0.9;
            let ft: f64 = (-200_000..=200_000)
                .map(|i| {
                    let w = i as f64 * h;
                    k.spectral_value(&[w]) * (w * tau).cos() * h
                })
                .sum();
            assert_relative_eq!(ft / (2.0 * std::f64::consts::PI), k.eval(&[tau], &[0.0]).unwrap(), max_relative = 2e-3);
        }
    }

    #[test]
    fn spectral_value_2d_matches_product_for_se() {
        let k = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![0.5, 2.0]).unwrap();
        let k1 = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![0.5]).unwrap();
        let k2 = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![2.0]).unwrap();
        assert_relative_eq!(
            k.spectral_value(&[0.3, -1.2]),
            k1.spectral_value(&[0.3]) * k2.spectral_value(&[-1.2]),
            max_relative = 1e-12
        );
    }

    #[test]
    fn record_round_trip() {
        let k = KernelSpec::new(KernelFamily::Matern52, 0.8, vec![0.2, 0.4]).unwrap();
        let js = serde_json::to_string(&KernelRecord::from_spec(&k, 1e-3)).unwrap();
        assert!(js.contains("\"sigma_n\""));
        let back: KernelRecord = serde_json::from_str(&js).unwrap();
        assert_eq!(back.to_spec().unwrap().0, k);
        let se: KernelRecord =
            serde_json::from_str(r#"{"family":"SE","sigma_f":1,"lengthscales":[1],"sigma_n":0.1}"#).unwrap();
        assert_eq!(se.family, KernelFamily::SquaredExponential);
    }

    fn family() -> impl Strategy<Value = KernelFamily> {
        prop_oneof![
            Just(KernelFamily::SquaredExponential),
            Just(KernelFamily::Matern32),
            Just(KernelFamily::Matern52)
        ]
    }

    proptest! {
        #[test]
        fn symmetric(fam in family(), a in proptest::collection::vec(-3.0..3.0f64, 3),
                     b in proptest::collection::vec(-3.0..3.0f64, 3), l in 0.1..3.0f64) {
            let k = KernelSpec::isotropic(fam, 1.1, l, 3).unwrap();
            prop_assert_eq!(k.eval(&a, &b).unwrap(), k.eval(&b, &a).unwrap());
        }

        #[test]
        fn gram_is_psd(fam in family(), pts in proptest::collection::vec(-2.0..2.0f64, 2..40), l in 0.2..2.0f64) {
            let n = pts.len() / 2;
            prop_assume!(n >= 1);
            let x = DMatrix::from_fn(n, 2, |i, j| pts[2 * i + j]);
            let k = KernelSpec::isotropic(fam, 1.0, l, 2).unwrap();
            let g = k.gram(&x, 0.0).unwrap();
            let min = SymmetricEigen::new(g).eigenvalues.min();
            prop_assert!(min >= -1e-8);
        }

        #[test]
        fn grad_matches_fd(fam in family(), a in proptest::collection::vec(-2.0..2.0f64, 2),
                           b in proptest::collection::vec(-2.0..2.0f64, 2), l in 0.3..2.0f64) {
            let k = KernelSpec::new(fam, 1.2, vec![l, 0.8 * l]).unwrap();
            prop_assume!(k.scaled_sqdist(&a, &b) > 1e-4);
            let g = k.grad_x(&a, &b).unwrap();
            let h = 1e-6;
            for i in 0..2 {
                let mut ap = a.clone(); ap[i] += h;
                let mut am = a.clone(); am[i] -= h;
                let fd = (k.eval(&ap, &b).unwrap() - k.eval(&am, &b).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-3), "{} vs {}", fd, g[i]);
            }
        }
    }
}
