//! Closed-form benchmark problems and the ten-bar truss model.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{check_dim, Error, Result};

/// Single-objective benchmark functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoBenchmark {
    Schwefel,
    Rosenbrock,
    Powell,
    Ackley,
    Levy1d,
    Ishigami,
}

impl SoBenchmark {
    pub const ALL: [SoBenchmark; 6] = [
        SoBenchmark::Schwefel,
        SoBenchmark::Rosenbrock,
        SoBenchmark::Powell,
        SoBenchmark::Ackley,
        SoBenchmark::Levy1d,
        SoBenchmark::Ishigami,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SoBenchmark::Schwefel => "schwefel",
            SoBenchmark::Rosenbrock => "rosenbrock",
            SoBenchmark::Powell => "powell",
            SoBenchmark::Ackley => "ackley",
            SoBenchmark::Levy1d => "levy1d",
            SoBenchmark::Ishigami => "ishigami",
        }
    }

    /// Dimension used in the experiments.
    pub fn default_dim(self) -> usize {
        match self {
            SoBenchmark::Schwefel => 2,
            SoBenchmark::Rosenbrock | SoBenchmark::Powell => 4,
            SoBenchmark::Ackley => 16,
            SoBenchmark::Levy1d => 1,
            SoBenchmark::Ishigami => 3,
        }
    }

    /// Per-coordinate box.
    pub fn interval(self) -> (f64, f64) {
        match self {
            SoBenchmark::Schwefel => (-500.0, 500.0),
            SoBenchmark::Rosenbrock => (-5.0, 10.0),
            SoBenchmark::Powell => (-4.0, 5.0),
            SoBenchmark::Ackley | SoBenchmark::Levy1d => (-10.0, 10.0),
            SoBenchmark::Ishigami => (-PI, PI),
        }
    }

    /// Known global minimizer and value in dimension `d`.
    pub fn known_minimum(self, d: usize) -> Option<(Vec<f64>, f64)> {
        match self {
            SoBenchmark::Schwefel => Some((vec![420.9687; d], 0.0)),
            SoBenchmark::Rosenbrock => Some((vec![1.0; d], 0.0)),
            SoBenchmark::Powell | SoBenchmark::Ackley => Some((vec![0.0; d], 0.0)),
            SoBenchmark::Levy1d => Some((vec![1.0], 0.0)),
            SoBenchmark::Ishigami => None,
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<f64> {
        let d = x.len();
        match self {
            SoBenchmark::Schwefel => Ok(schwefel(x)),
            SoBenchmark::Rosenbrock => Ok(rosenbrock(x)),
            SoBenchmark::Powell => {
                if d == 0 || d % 4 != 0 {
                    return Err(Error::DimensionMismatch { expected: 4 * d.div_ceil(4).max(1), got: d });
                }
                Ok(powell(x))
            }
            SoBenchmark::Ackley => Ok(ackley(x)),
            SoBenchmark::Levy1d => {
                check_dim(1, d)?;
                Ok(levy1d(x[0]))
            }
            SoBenchmark::Ishigami => {
                check_dim(3, d)?;
                Ok(ishigami(x))
            }
        }
    }
}

pub fn schwefel(x: &[f64]) -> f64 {
    418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2)).sum()
}

pub fn powell(x: &[f64]) -> f64 {
    x.chunks_exact(4)
        .map(|c| {
            (c[0] + 10.0 * c[1]).powi(2) + 5.0 * (c[2] - c[3]).powi(2) + (c[1] - 2.0 * c[2]).powi(4)
                + 10.0 * (c[0] - c[3]).powi(4)
        })
        .sum()
}

pub fn ackley(x: &[f64]) -> f64 {
    let (a, b, h) = (20.0, 0.2, 2.0 * PI);
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (h * v).cos()).sum::<f64>() / d;
    -a * (-b * sq.sqrt()).exp() - cs.exp() + a + 1f64.exp()
}

/// One-dimensional Levy function.
pub fn levy1d(x: f64) -> f64 {
    let w = 1.0 + (x - 1.0) / 4.0;
    (PI * w).sin().powi(2) + (w - 1.0).powi(2) * (1.0 + (2.0 * PI * w).sin().powi(2))
}

/// Minimum (at x = 1) and maximum (at x = -10) of the Levy function on [-10, 10].
pub const LEVY1D_RANGE: (f64, f64) = (0.0, 15.625);

/// Levy function rescaled to [0, 1] over [-10, 10].
pub fn levy1d_normalized(x: f64) -> f64 {
    (levy1d(x) - LEVY1D_RANGE.0) / (LEVY1D_RANGE.1 - LEVY1D_RANGE.0)
}

pub const ISHIGAMI_A: f64 = 7.0;
pub const ISHIGAMI_B: f64 = 0.1;

pub fn ishigami(x: &[f64]) -> f64 {
    x[0].sin() + ISHIGAMI_A * x[1].sin().powi(2) + ISHIGAMI_B * x[2].powi(4) * x[0].sin()
}

/// Reference first-order and total-effect indices of the Ishigami function.
pub const ISHIGAMI_FIRST: [f64; 3] = [0.3138, 0.4424, 0.0];
pub const ISHIGAMI_TOTAL: [f64; 3] = [0.5574, 0.4424, 0.2436];

/// Multi-objective benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoBenchmark {
    Kno1,
    Vlmop2,
    Vlmop3,
    Dtlz2a,
}

impl MoBenchmark {
    pub const ALL: [MoBenchmark; 4] = [MoBenchmark::Kno1, MoBenchmark::Vlmop2, MoBenchmark::Vlmop3, MoBenchmark::Dtlz2a];

    pub fn name(self) -> &'static str {
        match self {
            MoBenchmark::Kno1 => "kno1",
            MoBenchmark::Vlmop2 => "vlmop2",
            MoBenchmark::Vlmop3 => "vlmop3",
            MoBenchmark::Dtlz2a => "dtlz2a",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            MoBenchmark::Dtlz2a => 8,
            _ => 2,
        }
    }

    pub fn n_objectives(self) -> usize {
        match self {
            MoBenchmark::Kno1 | MoBenchmark::Vlmop2 => 2,
            MoBenchmark::Vlmop3 | MoBenchmark::Dtlz2a => 3,
        }
    }

    pub fn interval(self) -> (f64, f64) {
        match self {
            MoBenchmark::Kno1 => (0.0, 3.0),
            MoBenchmark::Vlmop2 => (-2.0, 2.0),
            MoBenchmark::Vlmop3 => (-3.0, 3.0),
            MoBenchmark::Dtlz2a => (0.0, 1.0),
        }
    }

    /// Fixed reference point for reporting the hypervolume ratio.
    pub fn reference_point(self) -> Vec<f64> {
        match self {
            MoBenchmark::Kno1 => vec![25.0, 25.0],
            MoBenchmark::Vlmop2 => vec![2.0, 2.0],
            MoBenchmark::Vlmop3 => vec![10.0, 18.0, 0.2],
            MoBenchmark::Dtlz2a => vec![2.0, 2.0, 2.0],
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            MoBenchmark::Kno1 => {
                let s = x[0] + x[1];
                let r = 9.0 - (3.0 * (5.0 / (2.0 * s * s)).sin() + 3.0 * (4.0 * s).sin() + 5.0 * (2.0 * s + 2.0).sin());
                let phi = PI / (12.0 * (x[0] - x[1] + 3.0));
                vec![20.0 - r * phi.cos(), 20.0 - r * phi.sin()]
            }
            MoBenchmark::Vlmop2 => {
                let a: f64 = x.iter().map(|v| (v - FRAC_1_SQRT_2).powi(2)).sum();
                let b: f64 = x.iter().map(|v| (v + FRAC_1_SQRT_2).powi(2)).sum();
                vec![1.0 - (-a).exp(), 1.0 - (-b).exp()]
            }
            MoBenchmark::Vlmop3 => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                vec![
                    0.5 * r2 + r2.sin(),
                    (3.0 * x[0] - 2.0 * x[1] + 4.0).powi(2) / 8.0 + (x[0] - x[1] + 1.0).powi(2) / 27.0 + 15.0,
                    1.0 / (r2 + 1.0) - 1.1 * (-r2).exp(),
                ]
            }
            MoBenchmark::Dtlz2a => {
                let g: f64 = x[2..].iter().map(|v| (v - 0.5).powi(2)).sum();
                let (a, b) = (x[0] * PI / 2.0, x[1] * PI / 2.0);
                vec![(1.0 + g) * a.cos() * b.cos(), (1.0 + g) * a.cos() * b.sin(), (1.0 + g) * a.sin()]
            }
        })
    }
}

/// Inputs of the ten-bar truss in engineering units: loads in kN, E in GPa, L in m,
/// areas in 1e-4 m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrussInputs {
    pub loads: [f64; 3],
    pub youngs_modulus: f64,
    pub bay_length: f64,
    pub areas: [f64; 10],
}

impl TrussInputs {
    /// Mean values of the random inputs.
    pub const MEAN: TrussInputs = TrussInputs {
        loads: [60.0, 40.0, 10.0],
        youngs_modulus: 200.0,
        bay_length: 1.0,
        areas: [10.5, 5.5, 14.0, 1.0, 1.0, 1.0, 5.5, 11.0, 1.0, 10.5],
    };

    /// From the 15-vector `[P1, P2, P3, E, L, A1..A10]`.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        check_dim(15, x.len())?;
        let mut areas = [0.0; 10];
        areas.copy_from_slice(&x[5..]);
        Ok(Self { loads: [x[0], x[1], x[2]], youngs_modulus: x[3], bay_length: x[4], areas })
    }
}

/// Member connectivity in area-ID order A1..A10. Nodes: 0 top-left, 1 top-middle,
/// 2 top-right, 3 bottom-left, 4 bottom-middle, 5 bottom-right; nodes 0 and 3 are pinned.
pub const TRUSS_MEMBERS: [(usize, usize); 10] =
    [(0, 1), (1, 2), (3, 4), (4, 5), (1, 4), (2, 5), (0, 4), (3, 1), (1, 5), (4, 2)];
const TRUSS_FIXED: [usize; 2] = [0, 3];
/// Node whose downward displacement is reported ("node 3").
pub const TRUSS_OUTPUT_NODE: usize = 1;
const TRUSS_HEIGHT: f64 = 1.0;

fn truss_coords(l: f64) -> [(f64, f64); 6] {
    let h = TRUSS_HEIGHT;
    [(0.0, h), (l, h), (2.0 * l, h), (0.0, 0.0), (l, 0.0), (2.0 * l, 0.0)]
}

/// Global 12x12 stiffness matrix (N/m).
pub fn truss_stiffness(inp: &TrussInputs) -> DMatrix<f64> {
    let xy = truss_coords(inp.bay_length);
    let e = inp.youngs_modulus * 1e9;
    let mut k = DMatrix::zeros(12, 12);
    for (m, &(i, j)) in TRUSS_MEMBERS.iter().enumerate() {
        let (dx, dy) = (xy[j].0 - xy[i].0, xy[j].1 - xy[i].1);
        let le = dx.hypot(dy);
        let (c, s) = (dx / le, dy / le);
        let v = [-c, -s, c, s];
        let idx = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1];
        let ea_l = e * inp.areas[m] * 1e-4 / le;
        for a in 0..4 {
            for b in 0..4 {
                k[(idx[a], idx[b])] += ea_l * (v[a] * v[b]);
            }
        }
    }
    k
}

/// Nodal load vector (N): P1 pulls the bottom-middle node toward the supports,
/// P2 pushes the output node away from them and P3 pulls it down.
fn truss_loads(inp: &TrussInputs) -> DVector<f64> {
    let mut f = DVector::zeros(12);
    f[2 * 4] -= inp.loads[0] * 1e3;
    f[2 * TRUSS_OUTPUT_NODE] += inp.loads[1] * 1e3;
    f[2 * TRUSS_OUTPUT_NODE + 1] -= inp.loads[2] * 1e3;
    f
}

/// Downward displacement (m) of the output node.
pub fn truss_displacement(inp: &TrussInputs) -> Result<f64> {
    let k = truss_stiffness(inp);
    let f = truss_loads(inp);
    let free: Vec<usize> = (0..12).filter(|d| !TRUSS_FIXED.contains(&(d / 2))).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let ff = DVector::from_fn(free.len(), |a, _| f[free[a]]);
    let chol = kf.cholesky().ok_or(Error::SingularStiffness)?;
    let u = chol.solve(&ff);
    let pos = free.iter().position(|&d| d == 2 * TRUSS_OUTPUT_NODE + 1).expect("output dof is free");
    let v = -u[pos];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularStiffness)
    }
}

pub const TRUSS_AREA_BOUNDS: (f64, f64) = (1.0, 20.0);

/// Weighted sum of normalized total area and displacement with P, E, L at their means.
/// `areas` in 1e-4 m².
pub fn truss_weighted_objective(areas: &[f64]) -> Result<f64> {
    let [a, u] = truss_bi_objective(areas)?;
    Ok(0.6 * a / 200.0 + 0.4 * u / 3e-2)
}

/// Total area (1e-4 m²) and displacement (m) with P, E, L at their means.
pub fn truss_bi_objective(areas: &[f64]) -> Result<[f64; 2]> {
    check_dim(10, areas.len())?;
    let mut inp = TrussInputs::MEAN;
    inp.areas.copy_from_slice(areas);
    Ok([areas.iter().sum(), truss_displacement(&inp)?])
}

/// Any problem addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    So(SoBenchmark),
    Mo(MoBenchmark),
    TrussSo,
    TrussMo,
    /// Displacement as a function of all 15 random inputs.
    TrussDisplacement,
}

/// Machine-readable problem description.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemInfo {
    pub name: String,
    pub dim: usize,
    pub n_objectives: usize,
    pub bounds: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimum: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order_indices: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_indices: Option<Vec<f64>>,
}

impl Problem {
    pub fn all() -> Vec<Problem> {
        let mut v: Vec<Problem> = SoBenchmark::ALL.iter().map(|&b| Problem::So(b)).collect();
        v.extend(MoBenchmark::ALL.iter().map(|&b| Problem::Mo(b)));
        v.extend([Problem::TrussSo, Problem::TrussMo, Problem::TrussDisplacement]);
        v
    }

    pub fn by_name(name: &str) -> Result<Problem> {
        let key = name.to_ascii_lowercase();
        Problem::all().into_iter().find(|p| p.name() == key).ok_or_else(|| Error::UnknownBenchmark(name.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Problem::So(b) => b.name(),
            Problem::Mo(b) => b.name(),
            Problem::TrussSo => "truss",
            Problem::TrussMo => "truss-mo",
            Problem::TrussDisplacement => "truss-displacement",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Problem::So(b) => b.default_dim(),
            Problem::Mo(b) => b.dim(),
            Problem::TrussSo | Problem::TrussMo => 10,
            Problem::TrussDisplacement => 15,
        }
    }

    pub fn n_objectives(self) -> usize {
        match self {
            Problem::Mo(b) => b.n_objectives(),
            Problem::TrussMo => 2,
            _ => 1,
        }
    }

    pub fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            Problem::So(b) => vec![b.interval(); b.default_dim()],
            Problem::Mo(b) => vec![b.interval(); b.dim()],
            Problem::TrussSo | Problem::TrussMo => vec![TRUSS_AREA_BOUNDS; 10],
            Problem::TrussDisplacement => {
                // mean ± 3 standard deviations for the Gaussian inputs, the uniform ranges otherwise
                let mut b: Vec<(f64, f64)> = [(60.0, 0.6), (40.0, 0.4), (10.0, 0.1), (200.0, 0.2), (1.0, 0.05)]
                    .iter()
                    .map(|&(m, cv)| (m - 3.0 * m * cv, m + 3.0 * m * cv))
                    .collect();
                b.extend(TRUSS_AREA_RANGES);
                b
            }
        }
    }

    pub fn eval(self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        match self {
            Problem::So(b) => b.eval(x).map(|v| vec![v]),
            Problem::Mo(b) => b.eval(x),
            Problem::TrussSo => truss_weighted_objective(x).map(|v| vec![v]),
            Problem::TrussMo => truss_bi_objective(x).map(|v| v.to_vec()),
            Problem::TrussDisplacement => truss_displacement(&TrussInputs::from_slice(x)?).map(|v| vec![v]),
        }
    }

    pub fn info(self) -> ProblemInfo {
        let (minimizer, minimum) = match self {
            Problem::So(b) => b.known_minimum(b.default_dim()).map_or((None, None), |(x, c)| (Some(x), Some(c))),
            _ => (None, None),
        };
        let reference_point = match self {
            Problem::Mo(b) => Some(b.reference_point()),
            Problem::TrussMo => Some(vec![200.0, 2.5]),
            _ => None,
        };
        let (first, total) = match self {
            Problem::So(SoBenchmark::Ishigami) => (Some(ISHIGAMI_FIRST.to_vec()), Some(ISHIGAMI_TOTAL.to_vec())),
            _ => (None, None),
        };
        ProblemInfo {
            name: self.name().to_string(),
            dim: self.dim(),
            n_objectives: self.n_objectives(),
            bounds: self.bounds(),
            minimizer,
            minimum,
            reference_point,
            first_order_indices: first,
            total_indices: total,
        }
    }
}

/// Uniform ranges of A1..A10 for the sensitivity study (1e-4 m²).
pub const TRUSS_AREA_RANGES: [(f64, f64); 10] = [
    (6.5, 14.5),
    (3.5, 7.5),
    (10.0, 18.0),
    (0.4, 1.6),
    (0.4, 1.6),
    (0.4, 1.6),
    (3.5, 7.5),
    (7.0, 15.0),
    (0.4, 1.6),
    (6.5, 14.5),
];

/// Gaussian (mean, coefficient of variation) of P1, P2, P3, E, L.
pub const TRUSS_GAUSSIAN_INPUTS: [(f64, f64); 5] = [(60.0, 0.6), (40.0, 0.4), (10.0, 0.1), (200.0, 0.2), (1.0, 0.05)];

pub const TRUSS_INPUT_NAMES: [&str; 15] =
    ["P1", "P2", "P3", "E", "L", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_relative_eq;

    #[test]
    fn known_minima() {
        for b in SoBenchmark::ALL {
            let d = b.default_dim();
            if let Some((x, c)) = b.known_minimum(d) {
                let tol = if b == SoBenchmark::Schwefel { 1e-3 } else { 1e-12 };
                assert!((b.eval(&x).unwrap() - c).abs() <= tol, "{}", b.name());
            }
        }
        assert_eq!(ishigami(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn minima_are_lower_bounds() {
        let mut rng = RngStream::new(1, 0);
        for b in SoBenchmark::ALL {
            let d = b.default_dim();
            let Some((_, c)) = b.known_minimum(d) else { continue };
            let (lo, hi) = b.interval();
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(lo, hi)).collect();
                assert!(b.eval(&x).unwrap() >= c - 1e-9);
            }
        }
    }

    #[test]
    fn powell_needs_multiple_of_four() {
        assert!(SoBenchmark::Powell.eval(&[0.0; 3]).is_err());
        assert_eq!(SoBenchmark::Powell.eval(&[0.0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn levy_range() {
        let (lo, hi) = (0..=200_000).map(|i| levy1d(-10.0 + 20.0 * i as f64 / 200_000.0)).fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
        assert!(lo >= LEVY1D_RANGE.0 && lo < 1e-8);
        assert_eq!(hi, LEVY1D_RANGE.1);
        assert_eq!(levy1d(-10.0), 15.625);
    }

    #[test]
    fn mo_identities() {
        let s = FRAC_1_SQRT_2;
        let y = MoBenchmark::Vlmop2.eval(&[s, s]).unwrap();
        assert_eq!(y[0], 0.0);
        assert_relative_eq!(y[1], 1.0 - (-4.0f64).exp(), epsilon = 1e-15);
        let mut x = [0.5; 8];
        x[0] = 0.3;
        x[1] = 0.8;
        let y = MoBenchmark::Dtlz2a.eval(&x).unwrap();
        assert_relative_eq!(y.iter().map(|v| v * v).sum::<f64>().sqrt(), 1.0, epsilon = 1e-15);
        let y = MoBenchmark::Kno1.eval(&[1.5, 1.5]).unwrap();
        assert_relative_eq!(y[0], 15.178149034095771, epsilon = 1e-12);
        assert_relative_eq!(y[1], 19.578142703271855, epsilon = 1e-12);
    }

    #[test]
    fn truss_mean_matches_oracle() {
        let u = truss_displacement(&TrussInputs::MEAN).unwrap();
        assert_relative_eq!(u, 3.3647598547968335e-4, max_relative = 1e-10);
    }

    #[test]
    fn truss_scaling_laws() {
        let base = TrussInputs::MEAN;
        let u = truss_displacement(&base).unwrap();
        let mut stiff = base;
        stiff.youngs_modulus *= 2.0;
        assert_relative_eq!(truss_displacement(&stiff).unwrap(), u / 2.0, max_relative = 1e-12);
        let mut thick = base;
        thick.areas.iter_mut().for_each(|a| *a *= 2.0);
        assert_relative_eq!(truss_displacement(&thick).unwrap(), u / 2.0, max_relative = 1e-12);
        let mut loaded = base;
        loaded.loads.iter_mut().for_each(|p| *p *= 3.7);
        assert_relative_eq!(truss_displacement(&loaded).unwrap(), 3.7 * u, max_relative = 1e-10);
        let mut none = base;
        none.loads = [0.0; 3];
        assert_eq!(truss_displacement(&none).unwrap(), 0.0);
    }

    #[test]
    fn truss_stiffness_symmetric_and_pd() {
        let mut rng = RngStream::new(5, 0);
        for _ in 0..100 {
            let mut x: Vec<f64> = TRUSS_GAUSSIAN_INPUTS.iter().map(|&(m, cv)| m + m * cv * rng.normal()).collect();
            x[3] = x[3].abs();
            x[4] = x[4].abs();
            x.extend(TRUSS_AREA_RANGES.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)));
            let inp = TrussInputs::from_slice(&x).unwrap();
            let k = truss_stiffness(&inp);
            assert_eq!(k, k.transpose());
            assert!(truss_displacement(&inp).is_ok());
        }
    }

    #[test]
    fn truss_objective_values() {
        let a = [3.0, 17.5, 1.2, 9.9, 20.0, 5.5, 14.0, 2.2, 11.1, 7.7];
        assert_relative_eq!(truss_weighted_objective(&a).unwrap(), 0.304162011194388, max_relative = 1e-10);
        let full = [20.0; 10];
        let [area, u] = truss_bi_objective(&full).unwrap();
        assert_eq!(0.6 * area / 200.0, 0.6);
        assert_relative_eq!(u, 1.7525074073460666e-4, max_relative = 1e-10);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(Problem::by_name("VLMOP2").unwrap(), Problem::Mo(MoBenchmark::Vlmop2));
        assert!(matches!(Problem::by_name("nope"), Err(Error::UnknownBenchmark(_))));
        for p in Problem::all() {
            let info = p.info();
            assert_eq!(info.bounds.len(), info.dim);
            let mid: Vec<f64> = info.bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect();
            assert_eq!(p.eval(&mid).unwrap().len(), info.n_objectives);
            serde_json::to_string(&info).unwrap();
        }
    }
}
