//! Finite-dimensional Gaussians: sampling, conditioning and Matheron updates.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Factor;
use crate::rng::RngStream;

/// Mean vector and covariance with a lazily computed Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    factor: OnceLock<Factor>,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), cov.nrows())?;
        check_dim(mean.len(), cov.ncols())?;
        let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..cov.nrows() {
            if cov[(i, i)] < 0.0 {
                return Err(Error::InvalidArgument(format!("negative variance at {i}")));
            }
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument("covariance is not symmetric".into()));
                }
            }
        }
        Ok(Self { mean, cov, factor: OnceLock::new() })
    }

    pub fn standard(n: usize) -> Self {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }

    /// Cholesky factor of the covariance (computed on first use, jitter ladder applies).
    pub fn factor(&self) -> Result<&Factor> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = Factor::new(&self.cov, 0.0)?;
        Ok(self.factor.get_or_init(|| f))
    }

    pub fn chol(&self) -> Result<DMatrix<f64>> {
        self.factor().map(|f| f.l())
    }
}

/// Joint Gaussian split into an observed block 1 and a target block 2.
#[derive(Debug, Clone)]
pub struct BlockGaussian {
    base: GaussianDist,
    block1: Vec<usize>,
    block2: Vec<usize>,
}

impl BlockGaussian {
    /// `block1` lists the indices of the first block; the rest form block 2 in order.
    pub fn new(base: GaussianDist, block1: Vec<usize>) -> Result<Self> {
        let n = base.dim();
        let mut seen = vec![false; n];
        for &i in &block1 {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!("bad block index {i}")));
            }
            seen[i] = true;
        }
        let block2 = (0..n).filter(|i| !seen[*i]).collect();
        Ok(Self { base, block1, block2 })
    }

    /// Leading `n1` coordinates form block 1.
    pub fn leading(base: GaussianDist, n1: usize) -> Result<Self> {
        Self::new(base, (0..n1).collect())
    }

    pub fn base(&self) -> &GaussianDist {
        &self.base
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.block1.len(), self.block2.len())
    }

    fn sub(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.base.cov[(rows[i], cols[j])])
    }

    fn subvec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
    }

    pub fn m1(&self) -> DVector<f64> {
        Self::subvec(&self.base.mean, &self.block1)
    }
    pub fn m2(&self) -> DVector<f64> {
        Self::subvec(&self.base.mean, &self.block2)
    }
    pub fn s11(&self) -> DMatrix<f64> {
        self.sub(&self.block1, &self.block1)
    }
    pub fn s12(&self) -> DMatrix<f64> {
        self.sub(&self.block1, &self.block2)
    }
    pub fn s21(&self) -> DMatrix<f64> {
        self.sub(&self.block2, &self.block1)
    }
    pub fn s22(&self) -> DMatrix<f64> {
        self.sub(&self.block2, &self.block2)
    }

    /// Split a full-length vector into its two blocks.
    pub fn split(&self, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (Self::subvec(v, &self.block1), Self::subvec(v, &self.block2))
    }

    /// `Σ₂₁ Σ₁₁⁻¹`, the regression coefficient of block 2 on block 1.
    fn gain(&self) -> Result<DMatrix<f64>> {
        let f = Factor::new(&self.s11(), 0.0)?;
        Ok(f.solve(&self.s12()).transpose())
    }

    /// Apply the Matheron update to a given joint draw `(f1, f2)`.
    pub fn matheron_update(
        &self,
        observed: &DVector<f64>,
        f1: &DVector<f64>,
        f2: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        check_dim(self.block1.len(), observed.len())?;
        let gain = self.gain()?;
        Ok(f2 + gain * (observed - f1))
    }
}

/// `count` i.i.d. draws as rows of a `count x n` matrix.
pub fn sample_mvn(dist: &GaussianDist, count: usize, rng: &mut RngStream) -> Result<DMatrix<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let f = dist.factor()?;
    let n = dist.dim();
    let mut out = DMatrix::zeros(count, n);
    for r in 0..count {
        let e = DVector::from_vec(rng.normals(n));
        let x = f.mul_l(&e) + dist.mean();
        out.row_mut(r).copy_from(&x.transpose());
    }
    Ok(out)
}

/// Distribution of block 2 given block 1 equal to `observed`.
pub fn condition(joint: &BlockGaussian, observed: &DVector<f64>) -> Result<GaussianDist> {
    check_dim(joint.block1.len(), observed.len())?;
    let f = Factor::new(&joint.s11(), 0.0)?;
    let s12 = joint.s12();
    let resid = observed - joint.m1();
    let mean = joint.m2() + s12.transpose() * f.solve_vec(&resid);
    let v = f.solve_lower(&s12);
    let mut cov = joint.s22() - v.transpose() * &v;
    cov = (&cov + cov.transpose()) * 0.5;
    GaussianDist::new(mean, cov)
}

/// One conditional draw of block 2 via a joint draw and the Matheron update.
pub fn matheron_conditional_sample(
    joint: &BlockGaussian,
    observed: &DVector<f64>,
    rng: &mut RngStream,
) -> Result<DVector<f64>> {
    let draw = sample_mvn(&joint.base, 1, rng)?.row(0).transpose();
    let (f1, f2) = joint.split(&draw);
    joint.matheron_update(observed, &f1, &f2)
}
