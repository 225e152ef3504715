//! Box-constrained quasi-Newton minimization and Latin hypercube designs.

use crate::rng::RngStream;

/// Settings for [`minimize_box`].
#[derive(Debug, Clone, Copy)]
pub struct QuasiNewton {
    pub max_iter: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub gtol: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub ftol: f64,
    pub memory: usize,
}

impl Default for QuasiNewton {
    fn default() -> Self {
        Self { max_iter: 200, gtol: 1e-8, ftol: 1e-12, memory: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected L-BFGS with an Armijo backtracking search along the projected path.
///
/// `f(x, grad)` returns the objective and writes its gradient. Non-finite values
/// are treated as infeasible and shrink the step.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: QuasiNewton) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1;
    if !fx.is_finite() {
        return Minimum { x, f: fx, iterations: 0, evaluations: evals, converged: false };
    }
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        // free variables: not pinned at a bound by the gradient
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg = (0..n).filter(|&i| free[i]).map(|i| g[i].abs()).fold(0.0, f64::max);
        if pg <= opts.gtol {
            converged = true;
            break;
        }
        iter += 1;
        // two-loop recursion on the free subspace
        let mut q: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for k in (0..m).rev() {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            alpha[k] = rho * dot(&s_hist[k], &q);
            for i in 0..n {
                q[i] -= alpha[k] * y_hist[k][i];
            }
        }
        let gamma = if m > 0 {
            dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1])
        } else {
            1.0 / pg.max(1.0)
        };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for k in 0..m {
            let rho = 1.0 / dot(&y_hist[k], &s_hist[k]);
            let beta = rho * dot(&y_hist[k], &q);
            for i in 0..n {
                q[i] += s_hist[k][i] * (alpha[k] - beta);
            }
        }
        for i in 0..n {
            d[i] = if free[i] { -q[i] } else { 0.0 };
        }
        if dot(&d, &g) >= 0.0 {
            for i in 0..n {
                d[i] = if free[i] { -g[i] } else { 0.0 };
            }
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = x[i] + step * d[i];
            }
            project(&mut xn, lo, hi);
            let dec: f64 = (0..n).map(|i| g[i] * (xn[i] - x[i])).sum();
            let fnew = f(&xn, &mut gn);
            evals += 1;
            if fnew.is_finite() && fnew <= fx + 1e-4 * dec {
                let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                    if s_hist.len() == opts.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                let rel = (fx - fnew).abs() / fx.abs().max(fnew.abs()).max(1.0);
                x.copy_from_slice(&xn);
                g.copy_from_slice(&gn);
                fx = fnew;
                accepted = true;
                if rel <= opts.ftol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = converged || !accepted;
            break;
        }
    }
    Minimum { x, f: fx, iterations: iter, evaluations: evals, converged }
}

/// Latin hypercube design in `[0,1]^d`: each coordinate has exactly one point per
/// stratum of width `1/n`.
pub fn latin_hypercube(n: usize, d: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let perm = rng.permutation(n);
        for (i, p) in perm.into_iter().enumerate() {
            pts[i][j] = (p as f64 + rng.uniform()) / n as f64;
        }
    }
    pts
}

/// Map a unit-cube point into the box `[lo, hi]`.
pub fn scale_to_box(u: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    u.iter().zip(lo.iter().zip(hi)).map(|(t, (a, b))| a + t * (b - a)).collect()
}
