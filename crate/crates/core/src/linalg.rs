use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest accepted eigenvalue ratio of the scaled normal matrix.
const RANK_TOL: f64 = 1e-10;

/// Accumulator for weighted least-squares normal equations.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    rows: usize,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        Self {
            xtx: DMatrix::zeros(dim, dim),
            xty: DVector::zeros(dim),
            rows: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn add(&mut self, x: &[f64], y: f64, weight: f64) {
        let p = self.dim();
        debug_assert_eq!(x.len(), p);
        if weight == 0.0 {
            return;
        }
        for i in 0..p {
            let wxi = weight * x[i];
            self.xty[i] += wxi * y;
            for j in i..p {
                self.xtx[(i, j)] += wxi * x[j];
            }
        }
        self.rows += 1;
    }

    /// Symmetric `Xᵀ W X`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut a = self.xtx.clone();
        for i in 0..p {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        a
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_spd(self.matrix(), self.xty.clone())
    }
}

/// Solves `a x = b` for symmetric `a`, failing on (near) rank deficiency.
pub fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let p = a.nrows();
    let scale: Vec<f64> = (0..p).map(|i| a[(i, i)].sqrt()).collect();
    if scale.iter().any(|s| !s.is_finite() || *s == 0.0) {
        return Err(Error::RankDeficient);
    }
    let scaled = DMatrix::from_fn(p, p, |i, j| a[(i, j)] / (scale[i] * scale[j]));
    let eig = scaled.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > RANK_TOL * max) {
        return Err(Error::RankDeficient);
    }
    let rhs = DVector::from_fn(p, |i, _| b[i] / scale[i]);
    let chol = scaled.cholesky().ok_or(Error::RankDeficient)?;
    let z = chol.solve(&rhs);
    Ok((0..p).map(|i| z[i] / scale[i]).collect())
}

/// Plain (unweighted) least squares on row-major design rows.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let p = rows.first().map(Vec::len).unwrap_or(0);
    let mut ne = NormalEquations::new(p);
    for (x, &t) in rows.iter().zip(y) {
        ne.add(x, t, 1.0);
    }
    ne.solve()
}

/// Jitter ladder for Cholesky factorisation: none, then 1e-12 up to 1e-8.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// Lower Cholesky factor of `m`, adding the smallest diagonal jitter from
/// [`JITTER_LADDER`] that makes the factorisation succeed.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    for &jitter in JITTER_LADDER.iter() {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(chol) = a.cholesky() {
            return Ok((chol.l(), jitter));
        }
    }
    Err(Error::NotPositiveDefinite)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
