//! Single-objective Bayesian optimization: Thompson sampling on GP posterior paths
//! and the classic EI / PI / LCB acquisitions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{check_dim, Error, Result};
use crate::gp::{fit, Dataset, FitOptions, FittedGP};
use crate::kernels::KernelFamily;
use crate::optim::{latin_hypercube, minimize_box, scale_to_box, QuasiNewton};
use crate::paths::{build_rff, draw_pathwise_path, draw_weight_space_path, SamplePath};
use crate::rng::RngStream;

/// Inner-optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiStart {
    pub n_starts: usize,
    /// Minimum Euclidean distance (normalized space) to previously queried points.
    pub min_dist: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MultiStart {
    fn default() -> Self {
        Self { n_starts: 500, min_dist: 1e-6, max_iter: 200, tol: 1e-12 }
    }
}

pub(crate) fn far_enough(x: &[f64], exclude: &[Vec<f64>], min_dist: f64) -> bool {
    let r2 = min_dist * min_dist;
    exclude.iter().all(|e| e.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() >= r2)
}

/// Best local minimum over `n_starts` uniform starts that keeps `min_dist` from
/// every point in `exclude`. Returns the point and its objective value.
///
/// If every local minimum violates the exclusion, the best one is pushed `min_dist`
/// away in a random direction that stays inside the box.
pub fn multistart_minimize<F>(
    mut f: F,
    bounds: &[(f64, f64)],
    exclude: &[Vec<f64>],
    opts: &MultiStart,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::NoFeasiblePoint);
    }
    let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.iter().copied().unzip();
    let qn = QuasiNewton { max_iter: opts.max_iter, gtol: opts.tol, ftol: opts.tol, ..QuasiNewton::default() };
    let mut minima: Vec<(Vec<f64>, f64)> = (0..opts.n_starts)
        .map(|_| {
            let x0: Vec<f64> = bounds.iter().map(|&(a, b)| rng.uniform_in(a, b)).collect();
            let m = minimize_box(&mut f, &x0, &lo, &hi, qn);
            (m.x, m.f)
        })
        .filter(|(_, v)| v.is_finite())
        .collect();
    if minima.is_empty() {
        return Err(Error::NoFeasiblePoint);
    }
    minima.sort_by(|a, b| a.1.total_cmp(&b.1));
    if let Some(m) = minima.iter().find(|m| far_enough(&m.0, exclude, opts.min_dist)) {
        return Ok(m.clone());
    }
    let best = &minima[0].0;
    let mut g = vec![0.0; best.len()];
    for _ in 0..1000 {
        let dir = rng.normals(best.len());
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        // slightly more than min_dist so rounding cannot pull it back inside
        let step = opts.min_dist * (1.0 + 1e-9) / norm;
        let cand: Vec<f64> = best.iter().zip(&dir).map(|(x, u)| x + step * u).collect();
        let inside = cand.iter().zip(bounds).all(|(v, (a, b))| (a..=b).contains(&v));
        if inside && far_enough(&cand, exclude, opts.min_dist) {
            let v = f(&cand, &mut g);
            return Ok((cand, v));
        }
    }
    Err(Error::NoFeasiblePoint)
}

/// Query-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Acquisition {
    TsRff,
    TsPc,
    Ei,
    Pi,
    Lcb { beta: f64 },
}

impl Acquisition {
    pub fn name(&self) -> &'static str {
        match self {
            Acquisition::TsRff => "ts_rff",
            Acquisition::TsPc => "ts_pc",
            Acquisition::Ei => "ei",
            Acquisition::Pi => "pi",
            Acquisition::Lcb { .. } => "lcb",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Acquisition::Lcb { beta } if !(beta > 0.0) => Err(Error::InvalidArgument(format!("lcb beta {beta}"))),
            _ => Ok(()),
        }
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Expected improvement below `y_min` for `N(mu, sigma²)`.
pub fn expected_improvement(mu: f64, sigma: f64, y_min: f64) -> f64 {
    if sigma <= 0.0 {
        return (y_min - mu).max(0.0);
    }
    let z = (y_min - mu) / sigma;
    let n = std_normal();
    (y_min - mu) * n.cdf(z) + sigma * n.pdf(z)
}

/// Probability of improvement below `y_min`.
pub fn probability_of_improvement(mu: f64, sigma: f64, y_min: f64) -> f64 {
    if sigma <= 0.0 {
        return if mu < y_min { 1.0 } else { 0.0 };
    }
    std_normal().cdf((y_min - mu) / sigma)
}

pub fn lower_confidence_bound(mu: f64, sigma: f64, beta: f64) -> f64 {
    mu - beta * sigma
}

/// Objective minimized by the inner optimizer for an analytic acquisition
/// (negated EI/PI, LCB as is), with its gradient in `grad`.
pub fn acquisition_objective(kind: Acquisition, gp: &FittedGP, x: &[f64], y_min: f64, grad: &mut [f64]) -> Result<f64> {
    check_dim(gp.dim(), grad.len())?;
    let (mu, var, dmu, dvar) = gp.predict_point_grad(x)?;
    let sigma = var.sqrt();
    // ∂σ = ∂var / 2σ; at σ = 0 the σ-terms are dropped
    let dsig = |j: usize| if sigma > 0.0 { dvar[j] / (2.0 * sigma) } else { 0.0 };
    let n = std_normal();
    let (value, d_mu, d_sigma) = match kind {
        Acquisition::Ei => {
            if sigma > 0.0 {
                let z = (y_min - mu) / sigma;
                (-expected_improvement(mu, sigma, y_min), n.cdf(z), -n.pdf(z))
            } else {
                (-expected_improvement(mu, sigma, y_min), if mu < y_min { 1.0 } else { 0.0 }, 0.0)
            }
        }
        Acquisition::Pi => {
            if sigma > 0.0 {
                let z = (y_min - mu) / sigma;
                (-n.cdf(z), n.pdf(z) / sigma, n.pdf(z) * z / sigma)
            } else {
                (-probability_of_improvement(mu, sigma, y_min), 0.0, 0.0)
            }
        }
        Acquisition::Lcb { beta } => (lower_confidence_bound(mu, sigma, beta), 1.0, -beta),
        Acquisition::TsRff | Acquisition::TsPc => {
            return Err(Error::InvalidArgument("Thompson sampling has no closed-form acquisition".into()))
        }
    };
    for (j, g) in grad.iter_mut().enumerate() {
        *g = d_mu * dmu[j] + d_sigma * dsig(j);
    }
    Ok(value)
}

/// Latin hypercube of `n` points in the box.
pub fn initial_design(bounds: &[(f64, f64)], n: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.iter().copied().unzip();
    latin_hypercube(n, bounds.len(), rng).iter().map(|u| scale_to_box(u, &lo, &hi)).collect()
}

/// One completed optimization iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub y_min: f64,
}

pub type Objective = Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// State of a single-objective campaign.
#[derive(Clone)]
pub struct BoCampaign {
    objective: Objective,
    data: Dataset,
    best: (Vec<f64>, f64),
    history: Vec<IterationRecord>,
    model: Option<FittedGP>,
}

impl std::fmt::Debug for BoCampaign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoCampaign").field("n", &self.data.len()).field("best", &self.best).finish()
    }
}

impl BoCampaign {
    /// Evaluate the objective on `initial` points (raw coordinates).
    pub fn new(objective: Objective, bounds: Vec<(f64, f64)>, initial: Vec<Vec<f64>>) -> Result<Self> {
        if initial.len() < 2 {
            return Err(Error::InvalidArgument("need at least two initial points".into()));
        }
        let ys = initial.iter().map(|x| objective(x)).collect::<Result<Vec<f64>>>()?;
        let data = Dataset::new(initial, ys, bounds)?;
        let (i, &y) = data.y_raw().iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        let best = (data.x_raw()[i].clone(), y);
        Ok(Self { objective, data, best, history: Vec::new(), model: None })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        self.data.bounds()
    }

    pub fn best(&self) -> (&[f64], f64) {
        (&self.best.0, self.best.1)
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    /// GP from the most recent fit.
    pub fn model(&self) -> Option<&FittedGP> {
        self.model.as_ref()
    }

    fn observe(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if y < self.best.1 {
            self.best = (x.clone(), y);
        }
        self.data.push(x.clone(), y)?;
        self.history.push(IterationRecord { iteration: self.history.len() + 1, x, y, y_min: self.best.1 });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsConfig {
    pub family: KernelFamily,
    pub sigma_n: f64,
    pub n_features: usize,
    pub iterations: usize,
    pub acquisition: Acquisition,
    pub inner: MultiStart,
    /// Fresh restarts of the hyperparameter fit on top of the warm start.
    pub fit_restarts: usize,
    /// Standard deviation of noise added to objective evaluations (raw units).
    pub observation_noise: f64,
}

impl Default for TsConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            sigma_n: 1e-3,
            n_features: 2000,
            iterations: 200,
            acquisition: Acquisition::TsPc,
            inner: MultiStart::default(),
            fit_restarts: 3,
            observation_noise: 0.0,
        }
    }
}

/// Choose the next query (normalized coordinates) for the current model.
fn propose(gp: &FittedGP, cfg: &TsConfig, exclude: &[Vec<f64>], rng: &mut RngStream) -> Result<Vec<f64>> {
    let unit = vec![(0.0, 1.0); gp.dim()];
    let y_min = gp.data().y().min();
    let ts_path = |rng: &mut RngStream| -> Result<SamplePath> {
        let fmap = Arc::new(build_rff(gp.kernel(), cfg.n_features, rng)?);
        match cfg.acquisition {
            Acquisition::TsRff => draw_weight_space_path(gp, fmap, rng),
            _ => draw_pathwise_path(gp, fmap, rng),
        }
    };
    match cfg.acquisition {
        Acquisition::TsRff | Acquisition::TsPc => {
            let mut last = None;
            for _ in 0..2 {
                let path = ts_path(rng)?;
                match multistart_minimize(|x, g| path.value_grad(x, g), &unit, exclude, &cfg.inner, rng) {
                    Ok((x, _)) => return Ok(x),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("two attempts made"))
        }
        kind => {
            let obj = |x: &[f64], g: &mut [f64]| acquisition_objective(kind, gp, x, y_min, g).unwrap_or(f64::NAN);
            multistart_minimize(obj, &unit, exclude, &cfg.inner, rng).map(|r| r.0)
        }
    }
}

/// Run `cfg.iterations` rounds of refit, propose, evaluate.
pub fn gp_ts_so(campaign: &mut BoCampaign, cfg: &TsConfig, rng: &mut RngStream) -> Result<()> {
    cfg.acquisition.validate()?;
    let mut opts = FitOptions { restarts: cfg.fit_restarts, ..FitOptions::default() };
    let refit = |campaign: &BoCampaign, opts: &FitOptions, rng: &mut RngStream| {
        fit(&campaign.data, cfg.family, cfg.sigma_n, opts, rng)
    };
    let mut gp = refit(campaign, &opts, rng)?;
    for it in 0..cfg.iterations {
        if it > 0 {
            opts.warm_start = Some((gp.kernel().clone(), gp.sigma_n()));
            gp = refit(campaign, &opts, rng)?;
        }
        let exclude: Vec<Vec<f64>> = campaign.data.x_raw().iter().map(|x| campaign.data.normalize_x(x)).collect();
        let u = propose(&gp, cfg, &exclude, rng)
            .map_err(|e| Error::IterationFailed { iteration: it + 1, reason: e.to_string() })?;
        let x = campaign.data.denormalize_x(&u);
        let mut y = (campaign.objective)(&x)?;
        if cfg.observation_noise > 0.0 {
            y += cfg.observation_noise * rng.normal();
        }
        campaign.observe(x, y)?;
    }
    if cfg.iterations > 0 {
        opts.warm_start = Some((gp.kernel().clone(), gp.sigma_n()));
        gp = refit(campaign, &opts, rng)?;
    }
    campaign.model = Some(gp);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;

    #[test]
    fn ei_pi_lcb_values() {
        assert_relative_eq!(expected_improvement(0.0, 1.0, 0.0), 0.398_942_280_401_432_7, epsilon = 1e-12);
        assert_eq!(expected_improvement(-0.5, 0.0, 1.0), 1.5);
        assert!((expected_improvement(-0.5, 1e-12, 1.0) - 1.5).abs() < 1e-9);
        assert_eq!(lower_confidence_bound(1.0, 0.5, 2.0), 0.0);
        assert_eq!(probability_of_improvement(0.0, 1.0, 0.0), 0.5);
        assert_eq!(probability_of_improvement(0.5, 0.0, 1.0), 1.0);
        assert_eq!(probability_of_improvement(1.5, 0.0, 1.0), 0.0);
    }

    #[test]
    fn quadratic_multistart() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 0.3);
            g[1] = 2.0 * (x[1] - 0.3);
            (x[0] - 0.3).powi(2) + (x[1] - 0.3).powi(2)
        };
        let opts = MultiStart { n_starts: 20, ..MultiStart::default() };
        let (x, _) = multistart_minimize(f, &[(0.0, 1.0); 2], &[], &opts, &mut RngStream::new(1, 0)).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-6 && (x[1] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn multimodal_matches_grid() {
        let h = |x: f64| (13.0 * x).sin() * (27.0 * x).sin() + 0.3 * x;
        let dh = |x: f64| 13.0 * (13.0 * x).cos() * (27.0 * x).sin() + 27.0 * (13.0 * x).sin() * (27.0 * x).cos() + 0.3;
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = dh(x[0]);
            h(x[0])
        };
        let opts = MultiStart { n_starts: 50, ..MultiStart::default() };
        let (x, _) = multistart_minimize(f, &[(0.0, 1.0)], &[], &opts, &mut RngStream::new(2, 0)).unwrap();
        let grid = (0..100_000).map(|i| i as f64 / 99_999.0).min_by(|a, b| h(*a).total_cmp(&h(*b))).unwrap();
        assert!((x[0] - grid).abs() < 1e-3);
    }

    #[test]
    fn exclusion_is_respected() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 0.5);
            (x[0] - 0.5).powi(2)
        };
        let opts = MultiStart { n_starts: 5, min_dist: 1e-3, ..MultiStart::default() };
        let ex = vec![vec![0.5]];
        let (x, _) = multistart_minimize(f, &[(0.0, 1.0)], &ex, &opts, &mut RngStream::new(3, 0)).unwrap();
        assert!((x[0] - 0.5).abs() >= 1e-3);
        assert!(matches!(
            multistart_minimize(f, &[(1.0, 1.0)], &[], &opts, &mut RngStream::new(3, 0)),
            Err(Error::NoFeasiblePoint)
        ));
    }

    #[test]
    fn lhs_stratified() {
        let pts = initial_design(&[(0.0, 1.0), (-2.0, 2.0)], 10, &mut RngStream::new(4, 0));
        for (j, (lo, hi)) in [(0.0, 1.0), (-2.0, 2.0)].iter().enumerate() {
            let mut strata: Vec<usize> = pts.iter().map(|p| ((p[j] - lo) / (hi - lo) * 10.0) as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..10).collect::<Vec<_>>());
        }
        let pts = initial_design(&[(0.0, 1.0)], 4, &mut RngStream::new(5, 0));
        let mut s: Vec<usize> = pts.iter().map(|p| (p[0] * 4.0) as usize).collect();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3]);
        assert_eq!(pts, initial_design(&[(0.0, 1.0)], 4, &mut RngStream::new(5, 0)));
    }

    fn toy_gp() -> FittedGP {
        let xs: Vec<Vec<f64>> = [0.1, 0.4, 0.55, 0.9].iter().map(|&x| vec![x, 1.0 - x]).collect();
        let ys = xs.iter().map(|x| (4.0 * x[0]).sin() + x[1]).collect();
        let data = Dataset::new(xs, ys, vec![(0.0, 1.0); 2]).unwrap();
        FittedGP::new(data, KernelSpec::isotropic(KernelFamily::Matern52, 1.0, 0.4, 2).unwrap(), 1e-3).unwrap()
    }

    #[test]
    fn acquisition_gradients_match_fd() {
        let gp = toy_gp();
        let y_min = gp.data().y().min();
        for kind in [Acquisition::Ei, Acquisition::Pi, Acquisition::Lcb { beta: 2.0 }] {
            for x in [[0.2, 0.3], [0.7, 0.65], [0.45, 0.9]] {
                let mut g = [0.0; 2];
                acquisition_objective(kind, &gp, &x, y_min, &mut g).unwrap();
                for j in 0..2 {
                    let h = 1e-6;
                    let (mut xp, mut xm) = (x, x);
                    xp[j] += h;
                    xm[j] -= h;
                    let mut t = [0.0; 2];
                    let fd = (acquisition_objective(kind, &gp, &xp, y_min, &mut t).unwrap()
                        - acquisition_objective(kind, &gp, &xm, y_min, &mut t).unwrap())
                        / (2.0 * h);
                    assert!((fd - g[j]).abs() <= 1e-5 * fd.abs().max(1e-3), "{kind:?} {x:?} {fd} {}", g[j]);
                }
            }
        }
    }

    fn quadratic_campaign(seed: u64) -> BoCampaign {
        let obj: Objective = Arc::new(|x: &[f64]| Ok((x[0] - 0.3).powi(2)));
        let mut rng = RngStream::new(seed, 0);
        let init = initial_design(&[(0.0, 1.0)], 4, &mut rng);
        BoCampaign::new(obj, vec![(0.0, 1.0)], init).unwrap()
    }

    #[test]
    fn ts_pc_solves_quadratic() {
        let mut c = quadratic_campaign(6);
        let cfg = TsConfig {
            n_features: 500,
            iterations: 20,
            inner: MultiStart { n_starts: 20, ..MultiStart::default() },
            ..TsConfig::default()
        };
        gp_ts_so(&mut c, &cfg, &mut RngStream::new(6, 1)).unwrap();
        assert_eq!(c.history().len(), 20);
        assert!(c.best().1 <= 1e-2);
        assert!(c.history().windows(2).all(|w| w[1].y_min <= w[0].y_min));
        let xs: Vec<Vec<f64>> = c.data().x_raw().to_vec();
        for i in 0..xs.len() {
            for j in 0..i {
                assert!((xs[i][0] - xs[j][0]).abs() >= 1e-6);
            }
        }
    }

    #[test]
    fn analytic_acquisitions_run() {
        for acq in [Acquisition::Ei, Acquisition::Pi, Acquisition::Lcb { beta: 2.0 }, Acquisition::TsRff] {
            let mut c = quadratic_campaign(7);
            let cfg = TsConfig {
                n_features: 300,
                iterations: 5,
                acquisition: acq,
                inner: MultiStart { n_starts: 10, ..MultiStart::default() },
                ..TsConfig::default()
            };
            gp_ts_so(&mut c, &cfg, &mut RngStream::new(7, 1)).unwrap();
            assert_eq!(c.history().len(), 5);
        }
        assert!(Acquisition::Lcb { beta: 0.0 }.validate().is_err());
    }

    #[test]
    fn zero_iterations_only_fits() {
        let mut c = quadratic_campaign(8);
        let before = c.data().len();
        let cfg = TsConfig { iterations: 0, ..TsConfig::default() };
        gp_ts_so(&mut c, &cfg, &mut RngStream::new(8, 1)).unwrap();
        assert_eq!(c.data().len(), before);
        assert!(c.history().is_empty() && c.model().is_some());
    }
}
