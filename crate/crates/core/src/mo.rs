//! Multi-objective optimization: Pareto utilities, hypervolume, NSGA-II and
//! Thompson sampling with maximal hypervolume improvement.
//!
//! Everything follows the minimization convention.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bo::far_enough;
use crate::error::{check_dim, Error, Result};
use crate::gp::{fit, Dataset, FitOptions, FittedGP};
use crate::kernels::KernelFamily;
use crate::optim::{latin_hypercube, scale_to_box};
use crate::paths::{build_rff, draw_pathwise_path, draw_weight_space_path, PathKind, SamplePath};
use crate::rng::RngStream;

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

/// Indices of the non-dominated points. Duplicates are all kept.
pub fn pareto_sort(ys: &[Vec<f64>]) -> Vec<usize> {
    (0..ys.len()).filter(|&i| !ys.iter().any(|o| dominates(o, &ys[i]))).collect()
}

/// Fast non-dominated sorting into rank layers.
pub fn non_dominated_fronts(ys: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = ys.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&ys[i], &ys[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(&ys[j], &ys[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front` (same order).
pub fn crowding_distance(ys: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = ys[front[0]].len();
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..m {
        order.sort_by(|&a, &b| ys[front[a]][k].total_cmp(&ys[front[b]][k]));
        let lo = ys[front[order[0]]][k];
        let hi = ys[front[order[n - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                dist[order[w]] += (ys[front[order[w + 1]]][k] - ys[front[order[w - 1]]][k]) / (hi - lo);
            }
        }
    }
    dist
}

/// Hypervolume value; `std_error` is zero for exact computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Points skipped because they exceed the reference point somewhere.
    pub ignored: usize,
}

fn inside_reference(front: &[Vec<f64>], r: &[f64]) -> Result<(Vec<Vec<f64>>, usize)> {
    for p in front {
        check_dim(r.len(), p.len())?;
    }
    let kept: Vec<Vec<f64>> = front.iter().filter(|p| p.iter().zip(r).all(|(a, b)| a <= b)).cloned().collect();
    let ignored = front.len() - kept.len();
    if ignored > 0 {
        log::warn!("{ignored} point(s) outside the reference box ignored");
    }
    Ok((kept, ignored))
}

/// Exact two-objective hypervolume by a sweep over the first objective.
pub fn hypervolume_2d(front: &[Vec<f64>], r: &[f64]) -> Result<HvEstimate> {
    check_dim(2, r.len())?;
    let (pts, ignored) = inside_reference(front, r)?;
    let mut pts: Vec<&Vec<f64>> = pareto_sort(&pts).into_iter().map(|i| &pts[i]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut value = 0.0;
    let mut ceiling = r[1];
    for p in pts {
        if p[1] < ceiling {
            value += (r[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(HvEstimate { value, std_error: 0.0, ignored })
}

/// Monte Carlo hypervolume with `n` uniform samples in the bounding box.
pub fn hypervolume_mc(front: &[Vec<f64>], r: &[f64], n: usize, rng: &mut RngStream) -> Result<HvEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("zero Monte Carlo samples".into()));
    }
    let (pts, ignored) = inside_reference(front, r)?;
    if pts.is_empty() {
        return Ok(HvEstimate { value: 0.0, std_error: 0.0, ignored });
    }
    let lower: Vec<f64> = (0..r.len()).map(|k| pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min)).collect();
    let (frac, se) = mc_fraction(&pts, &lower, r, n, rng, true);
    let vol: f64 = lower.iter().zip(r).map(|(l, h)| h - l).product();
    Ok(HvEstimate { value: vol * frac, std_error: vol * se, ignored })
}

/// Fraction of uniform points in `[lower, upper]` that are (`want_dominated`) or are
/// not dominated by `pts`, with its standard error.
fn mc_fraction(pts: &[Vec<f64>], lower: &[f64], upper: &[f64], n: usize, rng: &mut RngStream, want_dominated: bool) -> (f64, f64) {
    let mut z = vec![0.0; lower.len()];
    let mut hits = 0usize;
    for _ in 0..n {
        for (k, v) in z.iter_mut().enumerate() {
            *v = rng.uniform_in(lower[k], upper[k]);
        }
        let covered = pts.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b));
        if covered == want_dominated {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Exact sweep for two objectives, Monte Carlo with `mc_samples` otherwise.
pub fn hypervolume(front: &[Vec<f64>], r: &[f64], mc_samples: usize, rng: &mut RngStream) -> Result<HvEstimate> {
    if r.len() == 2 {
        hypervolume_2d(front, r)
    } else {
        hypervolume_mc(front, r, mc_samples, rng)
    }
}

/// Hypervolume improvement of adding `c` to `front`.
pub fn hvi(c: &[f64], front: &[Vec<f64>], r: &[f64], mc_samples: usize, rng: &mut RngStream) -> Result<f64> {
    check_dim(r.len(), c.len())?;
    if c.iter().zip(r).any(|(a, b)| a >= b) || front.iter().any(|p| p.iter().zip(c).all(|(a, b)| a <= b)) {
        return Ok(0.0);
    }
    if r.len() == 2 {
        let mut with = front.to_vec();
        with.push(c.to_vec());
        let gain = hypervolume_2d(&with, r)?.value - hypervolume_2d(front, r)?.value;
        return Ok(gain.max(0.0));
    }
    if mc_samples == 0 {
        return Err(Error::InvalidArgument("zero Monte Carlo samples".into()));
    }
    // only the box [c, r] can gain volume
    let (pts, _) = inside_reference(front, r)?;
    let vol: f64 = c.iter().zip(r).map(|(l, h)| h - l).product();
    let (frac, _) = mc_fraction(&pts, c, r, mc_samples, rng, false);
    Ok(vol * frac)
}

/// Componentwise maximum of the observed objective vectors.
pub fn reference_point(ys: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = ys.first().ok_or(Error::EmptyData)?;
    let mut r = first.clone();
    for y in &ys[1..] {
        check_dim(r.len(), y.len())?;
        r.iter_mut().zip(y).for_each(|(a, b)| *a = a.max(*b));
    }
    Ok(r)
}

/// Mutually non-dominated set of evaluated points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    points: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Non-dominated subset of `(x, y)` pairs.
    pub fn from_points(points: impl IntoIterator<Item = (Vec<f64>, Vec<f64>)>) -> Self {
        let all: Vec<(Vec<f64>, Vec<f64>)> = points.into_iter().collect();
        let ys: Vec<Vec<f64>> = all.iter().map(|p| p.1.clone()).collect();
        let keep = pareto_sort(&ys);
        let mut take = vec![false; all.len()];
        keep.into_iter().for_each(|i| take[i] = true);
        Self { points: all.into_iter().zip(take).filter(|(_, t)| *t).map(|(p, _)| p).collect() }
    }

    /// Add a point unless it is dominated; evicts points it dominates.
    /// Returns whether it was added.
    pub fn insert(&mut self, x: Vec<f64>, y: Vec<f64>) -> bool {
        if self.points.iter().any(|(_, p)| dominates(p, &y)) {
            return false;
        }
        self.points.retain(|(_, p)| !dominates(&y, p));
        self.points.push((x, y));
        true
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.points
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.0.clone()).collect()
    }

    pub fn ys(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.1.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nsga2Config {
    pub population: usize,
    pub generations: usize,
    /// Probability that a parent pair undergoes crossover.
    pub crossover_fraction: f64,
    /// SBX distribution index.
    pub eta_crossover: f64,
    /// Polynomial mutation distribution index.
    pub eta_mutation: f64,
    /// Per-variable mutation probability; `None` means `1/d`.
    pub mutation_prob: Option<f64>,
    pub tournament: usize,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Self {
            population: 500,
            generations: 100,
            crossover_fraction: 0.65,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            mutation_prob: None,
            tournament: 2,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.population < 4 || self.population % 2 != 0 {
            return bad("population must be even and at least 4");
        }
        if !(self.crossover_fraction > 0.0 && self.crossover_fraction <= 1.0) {
            return bad("crossover fraction must lie in (0, 1]");
        }
        if !(self.eta_crossover >= 0.0 && self.eta_mutation >= 0.0) {
            return bad("distribution indices must be non-negative");
        }
        if let Some(p) = self.mutation_prob {
            if !(0.0..=1.0).contains(&p) {
                return bad("mutation probability must lie in [0, 1]");
            }
        }
        if self.tournament < 1 {
            return bad("tournament size must be positive");
        }
        Ok(())
    }
}

fn sbx(p1: &mut [f64], p2: &mut [f64], lo: &[f64], hi: &[f64], eta: f64, rng: &mut RngStream) {
    for k in 0..p1.len() {
        if rng.uniform() > 0.5 || (p1[k] - p2[k]).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = (p1[k].min(p2[k]), p1[k].max(p2[k]));
        let u = rng.uniform();
        let spread = |beta: f64| {
            let alpha = 2.0 - beta.powf(-(eta + 1.0));
            if u <= 1.0 / alpha {
                (u * alpha).powf(1.0 / (eta + 1.0))
            } else {
                (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
            }
        };
        let bq1 = spread(1.0 + 2.0 * (y1 - lo[k]) / (y2 - y1));
        let bq2 = spread(1.0 + 2.0 * (hi[k] - y2) / (y2 - y1));
        let c1 = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(lo[k], hi[k]);
        let c2 = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(lo[k], hi[k]);
        if rng.uniform() < 0.5 {
            p1[k] = c2;
            p2[k] = c1;
        } else {
            p1[k] = c1;
            p2[k] = c2;
        }
    }
}

fn polynomial_mutation(x: &mut [f64], lo: &[f64], hi: &[f64], eta: f64, prob: f64, rng: &mut RngStream) {
    let pow = 1.0 / (eta + 1.0);
    for k in 0..x.len() {
        if rng.uniform() >= prob {
            continue;
        }
        let w = hi[k] - lo[k];
        let (d1, d2) = ((x[k] - lo[k]) / w, (hi[k] - x[k]) / w);
        let u = rng.uniform();
        let dq = if u < 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            v.powf(pow) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - v.powf(pow)
        };
        x[k] = (x[k] + dq * w).clamp(lo[k], hi[k]);
    }
}

fn sanitize(mut y: Vec<f64>) -> Vec<f64> {
    y.iter_mut().filter(|v| v.is_nan()).for_each(|v| *v = f64::INFINITY);
    y
}

/// Rank and crowding for every individual.
fn rank_and_crowd(ys: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; ys.len()];
    let mut crowd = vec![0.0; ys.len()];
    for (r, front) in non_dominated_fronts(ys).iter().enumerate() {
        for (&i, c) in front.iter().zip(crowding_distance(ys, front)) {
            rank[i] = r;
            crowd[i] = c;
        }
    }
    (rank, crowd)
}

/// NSGA-II on a vector-valued objective over a box, started from a Latin hypercube.
/// Returns the non-dominated members of the final population.
pub fn nsga2<F>(mut objective: F, bounds: &[(f64, f64)], cfg: &Nsga2Config, rng: &mut RngStream) -> Result<ParetoArchive>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    if bounds.is_empty() || bounds.iter().any(|(a, b)| !(a < b)) {
        return Err(Error::NoFeasiblePoint);
    }
    let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.iter().copied().unzip();
    let d = bounds.len();
    let pm = cfg.mutation_prob.unwrap_or(1.0 / d as f64);
    let n = cfg.population;
    let mut xs: Vec<Vec<f64>> = latin_hypercube(n, d, rng).iter().map(|u| scale_to_box(u, &lo, &hi)).collect();
    let mut ys: Vec<Vec<f64>> = xs.iter().map(|x| sanitize(objective(x))).collect();
    let m = ys[0].len();
    if m == 0 || ys.iter().any(|y| y.len() != m) {
        return Err(Error::InvalidArgument("objective returned inconsistent lengths".into()));
    }
    let (mut rank, mut crowd) = rank_and_crowd(&ys);

    for _ in 0..cfg.generations {
        let pick = |rng: &mut RngStream| {
            let mut best = rng.below(n);
            for _ in 1..cfg.tournament {
                let c = rng.below(n);
                if (rank[c], -crowd[c]) < (rank[best], -crowd[best]) {
                    best = c;
                }
            }
            best
        };
        let mut children: Vec<Vec<f64>> = Vec::with_capacity(n);
        while children.len() < n {
            let (a, b) = (pick(rng), pick(rng));
            let (mut c1, mut c2) = (xs[a].clone(), xs[b].clone());
            if rng.uniform() < cfg.crossover_fraction {
                sbx(&mut c1, &mut c2, &lo, &hi, cfg.eta_crossover, rng);
            }
            polynomial_mutation(&mut c1, &lo, &hi, cfg.eta_mutation, pm, rng);
            polynomial_mutation(&mut c2, &lo, &hi, cfg.eta_mutation, pm, rng);
            children.push(c1);
            children.push(c2);
        }
        let child_ys: Vec<Vec<f64>> = children.iter().map(|x| sanitize(objective(x))).collect();
        if child_ys.iter().any(|y| y.len() != m) {
            return Err(Error::InvalidArgument("objective returned inconsistent lengths".into()));
        }
        xs.extend(children);
        ys.extend(child_ys);

        let mut survivors = Vec::with_capacity(n);
        for front in non_dominated_fronts(&ys) {
            if survivors.len() + front.len() <= n {
                survivors.extend(front);
            } else {
                let cd = crowding_distance(&ys, &front);
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]));
                survivors.extend(order.into_iter().take(n - survivors.len()).map(|i| front[i]));
            }
            if survivors.len() == n {
                break;
            }
        }
        let mut keep = vec![false; xs.len()];
        survivors.iter().for_each(|&i| keep[i] = true);
        let mut it = keep.iter();
        xs.retain(|_| *it.next().expect("aligned"));
        let mut it = keep.iter();
        ys.retain(|_| *it.next().expect("aligned"));
        (rank, crowd) = rank_and_crowd(&ys);
    }
    let archive = ParetoArchive::from_points(xs.into_iter().zip(ys));
    if archive.points().iter().any(|(_, y)| y.iter().any(|v| !v.is_finite())) {
        return Err(Error::NoFeasiblePoint);
    }
    Ok(archive)
}

/// Candidate whose objective vector has the largest hypervolume improvement over
/// `incumbent`; ties go to the candidate farthest from `observed`.
pub fn max_hvi_select(
    candidates: &ParetoArchive,
    incumbent: &[Vec<f64>],
    r: &[f64],
    observed: &[Vec<f64>],
    mc_samples: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let gains = candidates
        .points()
        .iter()
        .map(|(_, y)| hvi(y, incumbent, r, mc_samples, rng))
        .collect::<Result<Vec<f64>>>()?;
    let top = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * top.abs().max(1e-300);
    let nearest = |x: &[f64]| {
        observed
            .iter()
            .map(|o| o.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    let best = candidates
        .points()
        .iter()
        .zip(&gains)
        .filter(|(_, &g)| g >= top - tol)
        .map(|((x, _), _)| x)
        .max_by(|a, b| nearest(a).total_cmp(&nearest(b)))
        .expect("at least one candidate attains the maximum");
    Ok(best.clone())
}

pub type MultiObjective = Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// Hypervolume bookkeeping after an iteration, against a fixed reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HvRecord {
    pub iteration: usize,
    pub hypervolume: f64,
    /// Ratio to the baseline hypervolume, when one is set.
    pub gamma: Option<f64>,
}

/// State of a multi-objective campaign.
#[derive(Clone)]
pub struct MoCampaign {
    objective: MultiObjective,
    datasets: Vec<Dataset>,
    archive: ParetoArchive,
    reference: Vec<f64>,
    baseline: Option<f64>,
    hv_samples: usize,
    hv_history: Vec<HvRecord>,
}

impl std::fmt::Debug for MoCampaign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MoCampaign")
            .field("n", &self.datasets[0].len())
            .field("archive", &self.archive.len())
            .field("reference", &self.reference)
            .finish()
    }
}

// fixed stream so repeated Monte Carlo hypervolumes use the same samples
const HV_REPORT_SEED: u64 = 0x4856;

impl MoCampaign {
    /// Evaluate `initial` (raw coordinates). `reference` is the fixed point used
    /// for reporting; it does not influence query selection.
    pub fn new(objective: MultiObjective, bounds: Vec<(f64, f64)>, initial: Vec<Vec<f64>>, reference: Vec<f64>) -> Result<Self> {
        if initial.len() < 2 {
            return Err(Error::InvalidArgument("need at least two initial points".into()));
        }
        let ys = initial.iter().map(|x| objective(x)).collect::<Result<Vec<Vec<f64>>>>()?;
        for y in &ys {
            check_dim(reference.len(), y.len())?;
        }
        let datasets = (0..reference.len())
            .map(|j| Dataset::new(initial.clone(), ys.iter().map(|y| y[j]).collect(), bounds.clone()))
            .collect::<Result<Vec<_>>>()?;
        let archive = ParetoArchive::from_points(initial.into_iter().zip(ys));
        let mut c = Self { objective, datasets, archive, reference, baseline: None, hv_samples: 1_000_000, hv_history: Vec::new() };
        c.record(0)?;
        Ok(c)
    }

    /// Baseline hypervolume for γ; recomputes the history ratios.
    pub fn set_baseline(&mut self, hv: f64) -> Result<()> {
        if !(hv > 0.0) {
            return Err(Error::InvalidArgument(format!("baseline hypervolume {hv}")));
        }
        self.baseline = Some(hv);
        self.hv_history.iter_mut().for_each(|r| r.gamma = Some(r.hypervolume / hv));
        Ok(())
    }

    /// Monte Carlo sample count for reporting with three or more objectives.
    pub fn set_hv_samples(&mut self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("zero Monte Carlo samples".into()));
        }
        self.hv_samples = n;
        Ok(())
    }

    pub fn current_hypervolume(&self) -> Result<f64> {
        let mut rng = RngStream::new(HV_REPORT_SEED, 0);
        Ok(hypervolume(&self.archive.ys(), &self.reference, self.hv_samples, &mut rng)?.value)
    }

    fn record(&mut self, iteration: usize) -> Result<()> {
        let hv = self.current_hypervolume()?;
        self.hv_history.push(HvRecord { iteration, hypervolume: hv, gamma: self.baseline.map(|b| hv / b) });
        Ok(())
    }

    pub fn n_objectives(&self) -> usize {
        self.datasets.len()
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn hv_history(&self) -> &[HvRecord] {
        &self.hv_history
    }

    /// Observed objective vectors, one per shared input row.
    pub fn observed_ys(&self) -> Vec<Vec<f64>> {
        (0..self.datasets[0].len()).map(|i| self.datasets.iter().map(|d| d.y_raw()[i]).collect()).collect()
    }

    fn observe(&mut self, x: Vec<f64>, y: Vec<f64>) -> Result<()> {
        for (d, &v) in self.datasets.iter_mut().zip(&y) {
            d.push(x.clone(), v)?;
        }
        self.archive.insert(x, y);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoConfig {
    pub family: KernelFamily,
    /// One noise level per objective (a single value is broadcast).
    pub sigma_n: Vec<f64>,
    pub n_features: usize,
    pub iterations: usize,
    pub nsga2: Nsga2Config,
    pub sampler: PathKind,
    pub fit_restarts: usize,
    pub observation_noise: f64,
    pub min_dist: f64,
    /// Monte Carlo samples per HVI evaluation with three or more objectives.
    pub hvi_samples: usize,
}

impl Default for MoConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            sigma_n: vec![1e-3],
            n_features: 2000,
            iterations: 60,
            nsga2: Nsga2Config::default(),
            sampler: PathKind::Pathwise,
            fit_restarts: 3,
            observation_noise: 0.0,
            min_dist: 1e-6,
            hvi_samples: 10_000,
        }
    }
}

impl MoConfig {
    fn noise_for(&self, j: usize) -> Result<f64> {
        match self.sigma_n.as_slice() {
            [s] => Ok(*s),
            v => v.get(j).copied().ok_or(Error::DimensionMismatch { expected: j + 1, got: v.len() }),
        }
    }
}

fn draw_paths(gps: &[FittedGP], cfg: &MoConfig, rng: &mut RngStream) -> Result<Vec<SamplePath>> {
    gps.iter()
        .map(|gp| {
            let fmap = Arc::new(build_rff(gp.kernel(), cfg.n_features, rng)?);
            match cfg.sampler {
                PathKind::WeightSpace => draw_weight_space_path(gp, fmap, rng),
                PathKind::Pathwise => draw_pathwise_path(gp, fmap, rng),
            }
        })
        .collect()
}

/// Sampled front in raw objective units over normalized inputs.
fn sampled_front(gps: &[FittedGP], paths: &[SamplePath], cfg: &MoConfig, rng: &mut RngStream) -> Result<ParetoArchive> {
    let unit = vec![(0.0, 1.0); gps[0].dim()];
    nsga2(
        |u| paths.iter().zip(gps).map(|(p, gp)| gp.data().denormalize_y(p.value(u))).collect(),
        &unit,
        &cfg.nsga2,
        rng,
    )
}

/// Run `cfg.iterations` rounds of Thompson sampling with max-HVI selection.
pub fn gp_ts_mo(campaign: &mut MoCampaign, cfg: &MoConfig, rng: &mut RngStream) -> Result<()> {
    cfg.nsga2.validate()?;
    let m = campaign.n_objectives();
    if cfg.sigma_n.len() != 1 && cfg.sigma_n.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: cfg.sigma_n.len() });
    }
    let mut warm: Vec<Option<(crate::kernels::KernelSpec, f64)>> = vec![None; m];
    for it in 0..cfg.iterations {
        let gps = (0..m)
            .map(|j| {
                let opts = FitOptions { restarts: cfg.fit_restarts, warm_start: warm[j].clone(), ..FitOptions::default() };
                fit(&campaign.datasets[j], cfg.family, cfg.noise_for(j)?, &opts, rng)
            })
            .collect::<Result<Vec<FittedGP>>>()?;
        warm = gps.iter().map(|g| Some((g.kernel().clone(), g.sigma_n()))).collect();

        let fail = |e: Error| Error::IterationFailed { iteration: it + 1, reason: e.to_string() };
        let front = match draw_paths(&gps, cfg, rng).and_then(|p| sampled_front(&gps, &p, cfg, rng)) {
            Ok(f) => f,
            Err(_) => draw_paths(&gps, cfg, rng).and_then(|p| sampled_front(&gps, &p, cfg, rng)).map_err(fail)?,
        };

        let data = &campaign.datasets[0];
        let observed: Vec<Vec<f64>> = data.x_raw().iter().map(|x| data.normalize_x(x)).collect();
        let candidates = ParetoArchive::from_points(
            front.points().iter().filter(|(x, _)| far_enough(x, &observed, cfg.min_dist)).cloned(),
        );
        let ys = campaign.observed_ys();
        let r = reference_point(&ys)?;
        let incumbent: Vec<Vec<f64>> = pareto_sort(&ys).into_iter().map(|i| ys[i].clone()).collect();
        let u = if candidates.is_empty() {
            let best = &front.points()[0].0;
            nudge(best, &observed, cfg.min_dist, rng).ok_or_else(|| fail(Error::NoFeasiblePoint))?
        } else {
            max_hvi_select(&candidates, &incumbent, &r, &observed, cfg.hvi_samples, rng).map_err(fail)?
        };
        let x = data.denormalize_x(&u);
        let mut y = (campaign.objective)(&x)?;
        check_dim(m, y.len())?;
        if cfg.observation_noise > 0.0 {
            y.iter_mut().for_each(|v| *v += cfg.observation_noise * rng.normal());
        }
        campaign.observe(x, y)?;
        campaign.record(it + 1)?;
    }
    Ok(())
}

fn nudge(x: &[f64], observed: &[Vec<f64>], min_dist: f64, rng: &mut RngStream) -> Option<Vec<f64>> {
    (0..1000).find_map(|_| {
        let dir = rng.normals(x.len());
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step = min_dist * (1.0 + 1e-9) / norm;
        let cand: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + step * u).collect();
        (cand.iter().all(|v| (0.0..=1.0).contains(v)) && far_enough(&cand, observed, min_dist)).then_some(cand)
    })
}
