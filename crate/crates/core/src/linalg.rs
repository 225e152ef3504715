//! Dense factorization helpers shared by the Gaussian and GP code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Number of escalating jitter retries after the first attempt.
pub const JITTER_RETRIES: usize = 3;

/// Cholesky factor together with the diagonal jitter that made it succeed.
#[derive(Debug, Clone)]
pub struct Factor {
    /// Lower triangle; the strict upper triangle is zero.
    l: DMatrix<f64>,
    jitter: f64,
}

const BLOCK: usize = 64;

/// In-place blocked right-looking Cholesky of the lower triangle. Returns `false` when
/// a pivot is not positive.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> bool {
    let n = a.nrows();
    for k0 in (0..n).step_by(BLOCK) {
        let kb = BLOCK.min(n - k0);
        let end = k0 + kb;
        for j in k0..end {
            let mut d = a[(j, j)];
            for p in k0..j {
                d -= a[(j, p)] * a[(j, p)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let ljj = d.sqrt();
            a[(j, j)] = ljj;
            for i in j + 1..end {
                let mut v = a[(i, j)];
                for p in k0..j {
                    v -= a[(i, p)] * a[(j, p)];
                }
                a[(i, j)] = v / ljj;
            }
        }
        let m = n - end;
        if m == 0 {
            continue;
        }
        // panel: A21 ← A21 L11⁻ᵀ, one column at a time
        for j in k0..end {
            for p in k0..j {
                let ljp = a[(j, p)];
                if ljp != 0.0 {
                    let (left, mut right) = a.columns_range_pair_mut(p, j);
                    right.rows_mut(end, m).axpy(-ljp, &left.rows(end, m), 1.0);
                }
            }
            let inv = 1.0 / a[(j, j)];
            a.view_mut((end, j), (m, 1)).scale_mut(inv);
        }
        // trailing update of the lower triangle: A22 -= A21 A21ᵀ
        let a21 = a.view((end, k0), (m, kb)).clone_owned();
        for c0 in (0..m).step_by(BLOCK) {
            let cb = BLOCK.min(m - c0);
            let rhs = a21.rows(c0, cb).transpose();
            a.view_mut((end + c0, end + c0), (m - c0, cb)).gemm(-1.0, &a21.rows(c0, m - c0), &rhs, 1.0);
        }
    }
    a.fill_upper_triangle(0.0, 1);
    true
}

/// Blocked forward substitution `L X = B` in place.
fn forward_in_place(l: &DMatrix<f64>, x: &mut DMatrix<f64>) {
    let n = l.nrows();
    let m = x.ncols();
    for k0 in (0..n).step_by(BLOCK) {
        let kb = BLOCK.min(n - k0);
        let l11 = l.view((k0, k0), (kb, kb));
        {
            let mut xk = x.view_mut((k0, 0), (kb, m));
            l11.solve_lower_triangular_mut(&mut xk);
        }
        let rest = n - k0 - kb;
        if rest > 0 {
            let xk = x.view((k0, 0), (kb, m)).clone_owned();
            x.view_mut((k0 + kb, 0), (rest, m)).gemm(-1.0, &l.view((k0 + kb, k0), (rest, kb)), &xk, 1.0);
        }
    }
}

/// Blocked back substitution `Lᵀ X = B` in place.
fn backward_in_place(l: &DMatrix<f64>, x: &mut DMatrix<f64>) {
    let n = l.nrows();
    let m = x.ncols();
    let starts: Vec<usize> = (0..n).step_by(BLOCK).collect();
    for &k0 in starts.iter().rev() {
        let kb = BLOCK.min(n - k0);
        let l11 = l.view((k0, k0), (kb, kb));
        {
            let mut xk = x.view_mut((k0, 0), (kb, m));
            l11.tr_solve_lower_triangular_mut(&mut xk);
        }
        if k0 > 0 {
            let xk = x.view((k0, 0), (kb, m)).clone_owned();
            let l21t = l.view((k0, 0), (kb, k0)).transpose();
            x.view_mut((0, 0), (k0, m)).gemm(-1.0, &l21t, &xk, 1.0);
        }
    }
}

impl Factor {
    /// Factorize `a + jitter*I`, escalating through the jitter ladder on failure:
    /// `jitter`, then `+1e-10*mean(diag)`, growing tenfold per retry.
    pub fn new(a: &DMatrix<f64>, jitter: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let n = a.nrows();
        let mean_diag = if n == 0 { 0.0 } else { a.diagonal().mean() };
        let base = if mean_diag > 0.0 && mean_diag.is_finite() { 1e-10 * mean_diag } else { 1e-10 };
        let mut extra = 0.0;
        let mut tried = jitter;
        for attempt in 0..=JITTER_RETRIES {
            if attempt > 0 {
                extra = if attempt == 1 { base } else { extra * 10.0 };
            }
            tried = jitter + extra;
            let mut m = a.clone();
            if tried != 0.0 {
                for i in 0..n {
                    m[(i, i)] += tried;
                }
            }
            if m.iter().any(|v| !v.is_finite()) {
                break;
            }
            if cholesky_in_place(&mut m) {
                return Ok(Self { l: m, jitter: tried });
            }
        }
        Err(Error::NotPositiveDefinite { jitter: tried })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> DMatrix<f64> {
        self.l.clone()
    }

    pub fn l_ref(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        forward_in_place(&self.l, &mut x);
        backward_in_place(&self.l, &mut x);
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// Solve `L x = b` (forward substitution).
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        forward_in_place(&self.l, &mut x);
        x
    }

    /// Solve `Lᵀ X = B`.
    pub fn solve_upper(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        backward_in_place(&self.l, &mut x);
        x
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.solve_lower_triangular_mut(&mut x);
        x
    }

    /// Solve `Lᵀ x = b` (back substitution).
    pub fn solve_upper_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.l.tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// `L x` for the lower factor.
    pub fn mul_l(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.l * x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `A⁻¹ = L⁻ᵀ L⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let mut linv = self.l.clone();
        invert_lower_in_place(&mut linv);
        linv.transpose() * &linv
    }
}

/// Invert a nonsingular lower-triangular matrix in place by recursive 2x2 blocking:
/// `[[A, 0], [B, C]]⁻¹ = [[A⁻¹, 0], [-C⁻¹ B A⁻¹, C⁻¹]]`.
fn invert_lower_in_place(l: &mut DMatrix<f64>) {
    fn rec(mut m: nalgebra::DMatrixViewMut<'_, f64>) {
        let n = m.nrows();
        if n <= 32 {
            for j in 0..n {
                m[(j, j)] = 1.0 / m[(j, j)];
                for i in j + 1..n {
                    let s: f64 = (j..i).map(|k| m[(i, k)] * m[(k, j)]).sum();
                    m[(i, j)] = -s / m[(i, i)];
                }
            }
            return;
        }
        let h = n / 2;
        rec(m.view_mut((0, 0), (h, h)));
        rec(m.view_mut((h, h), (n - h, n - h)));
        let b = m.view((h, 0), (n - h, h)).clone_owned();
        let ba = &b * m.view((0, 0), (h, h));
        let cinv = m.view((h, h), (n - h, n - h)).clone_owned();
        m.view_mut((h, 0), (n - h, h)).gemm(-1.0, &cinv, &ba, 0.0);
    }
    rec(l.as_view_mut());
}

/// Lower-triangular Cholesky factor of `cov + jitter*I` (with the jitter ladder).
pub fn cholesky(cov: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    Factor::new(cov, jitter).map(|f| f.l())
}

/// Symmetric PSD square root with negative eigenvalues clipped to zero.
pub fn sqrtm_psd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym);
    let mut v = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    &v * eig.eigenvectors.transpose()
}

/// Sum of square roots of the clipped eigenvalues, i.e. the trace of `sqrtm_psd(a)`.
pub fn trace_sqrt_psd(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(a));
    eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum()
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_matches_solve() {
        for n in [1, 7, 33, 150] {
            let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5);
            let a = &b * b.transpose() + DMatrix::identity(n, n);
            let f = Factor::new(&a, 0.0).unwrap();
            let inv = f.inverse();
            let err = (&a * &inv - DMatrix::identity(n, n)).abs().max();
            assert!(err < 1e-10, "n = {n}: {err}");
            assert_relative_eq!(inv.clone(), inv.transpose(), epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_factor() {
        let l = cholesky(&DMatrix::identity(3, 3), 0.0).unwrap();
        assert_eq!(l, DMatrix::identity(3, 3));
    }

    #[test]
    fn two_by_two_factor() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&a, 0.0).unwrap();
        assert_relative_eq!(l[(0, 0)], 2.0);
        assert_relative_eq!(l[(1, 0)], 1.0);
        assert_relative_eq!(l[(1, 1)], 2f64.sqrt());
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn diagonal_factor() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0]));
        let l = cholesky(&a, 0.0).unwrap();
        assert_eq!(l, DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0])));
    }

    #[test]
    fn jitter_rescues_rank_deficient() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let f = Factor::new(&a, 0.0).unwrap();
        assert!(f.jitter() > 0.0);
        let rec = f.l() * f.l().transpose();
        let mut target = a.clone();
        for i in 0..3 {
            target[(i, i)] += f.jitter();
        }
        assert!((rec - target).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn indefinite_fails() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(Factor::new(&a, 0.0), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn sqrtm_squares_back() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let s = sqrtm_psd(&a);
        assert!((&s * &s - &a).norm() < 1e-12);
        assert_relative_eq!(trace_sqrt_psd(&a), s.trace(), epsilon = 1e-12);
    }

    #[test]
    fn mul_l_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = Factor::new(&a, 0.0).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert!((f.mul_l(&x) - f.l() * &x).norm() < 1e-14);
    }

    #[test]
    fn blocked_factor_matches_reference() {
        // sizes straddling the block width
        for n in [63, 64, 65, 200] {
            let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
            let mut a = &b * b.transpose();
            for i in 0..n {
                a[(i, i)] += 1.0;
            }
            let f = Factor::new(&a, 0.0).unwrap();
            assert_eq!(f.jitter(), 0.0);
            let reference = nalgebra::Cholesky::new(a.clone()).unwrap().l();
            assert!((f.l() - &reference).amax() < 1e-12);
            for i in 0..n {
                for j in i + 1..n {
                    assert_eq!(f.l_ref()[(i, j)], 0.0);
                }
            }
            let rhs = DVector::from_fn(n, |i, _| (i as f64).sin());
            assert!((&a * f.solve_vec(&rhs) - &rhs).norm() < 1e-10);
            let rhs_m = DMatrix::from_fn(n, 3, |i, j| ((i + 5 * j) as f64).sin());
            assert!((&a * f.solve(&rhs_m) - &rhs_m).amax() < 1e-10);
            assert!((f.l() * f.solve_lower(&rhs_m) - &rhs_m).amax() < 1e-10);
            assert!((f.l().transpose() * f.solve_upper(&rhs_m) - &rhs_m).amax() < 1e-10);
            let z = DVector::from_fn(n, |i, _| (i as f64).cos());
            assert!((f.l().transpose() * f.solve_upper_vec(&z) - &z).norm() < 1e-10);
        }
    }
}
