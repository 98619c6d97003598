//! Dense linear algebra helpers: a streaming least-squares solver and a
//! symmetric positive definite inverse.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const BLOCK_ROWS: usize = 512;
const RANK_TOL: f64 = 1e-10;

/// Least squares by blocked Householder QR of the augmented matrix `[X | y]`.
///
/// Rows are pushed one at a time; memory stays at `O(p^2 + block * p)`.
#[derive(Debug, Clone)]
pub struct StreamingLeastSquares {
    p: usize,
    r: Option<DMatrix<f64>>,
    buffer: Vec<f64>,
    n_rows: usize,
}

#[derive(Debug, Clone)]
pub struct LeastSquaresSolution {
    pub beta: Vec<f64>,
    pub rss: f64,
    pub n_rows: usize,
    /// Ratio of the largest to the smallest singular value of `X`.
    pub condition: f64,
}

impl StreamingLeastSquares {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            r: None,
            buffer: Vec::with_capacity(BLOCK_ROWS * (p + 1)),
            n_rows: 0,
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.p);
        self.buffer.extend_from_slice(x);
        self.buffer.push(y);
        self.n_rows += 1;
        if self.buffer.len() >= BLOCK_ROWS * (self.p + 1) {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.buffer.is_empty() {
            return;
        }
        let width = self.p + 1;
        let new_rows = self.buffer.len() / width;
        let prev_rows = self.r.as_ref().map_or(0, |r| r.nrows());
        let mut stacked = DMatrix::zeros(prev_rows + new_rows, width);
        if let Some(r) = &self.r {
            stacked.rows_mut(0, prev_rows).copy_from(r);
        }
        for i in 0..new_rows {
            for j in 0..width {
                stacked[(prev_rows + i, j)] = self.buffer[i * width + j];
            }
        }
        self.buffer.clear();
        self.r = Some(stacked.qr().r());
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn finish(mut self) -> Result<LeastSquaresSolution> {
        self.flush();
        let p = self.p;
        let r = self
            .r
            .ok_or_else(|| Error::invalid("least squares with no rows"))?;
        if r.nrows() < p + 1 || self.n_rows < p {
            return Err(Error::SingularDesign {
                condition: f64::INFINITY,
            });
        }
        let rxx = r.view((0, 0), (p, p)).into_owned();
        let sv = rxx.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(min > RANK_TOL * max) {
            return Err(Error::SingularDesign { condition });
        }
        let rhs = DVector::from_iterator(p, (0..p).map(|i| r[(i, p)]));
        let beta = rxx
            .solve_upper_triangular(&rhs)
            .ok_or(Error::SingularDesign { condition })?;
        let tail = r[(p, p)];
        Ok(LeastSquaresSolution {
            beta: beta.iter().copied().collect(),
            rss: tail * tail,
            n_rows: self.n_rows,
            condition,
        })
    }
}

/// Inverse of a symmetric positive definite matrix, `None` if not SPD.
pub fn spd_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = a.clone().cholesky()?;
    let inv = chol.inverse();
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_normal_equations() {
        let n = 1500;
        let mut ls = StreamingLeastSquares::new(3);
        let mut xtx = DMatrix::<f64>::zeros(3, 3);
        let mut xty = DVector::<f64>::zeros(3);
        for i in 0..n {
            let t = i as f64 / n as f64;
            let x = [1.0, t, (7.0 * t).sin()];
            let y = 2.0 - t + 0.5 * x[2] + 0.01 * (13.0 * t).cos();
            ls.push(&x, y);
            let xv = DVector::from_row_slice(&x);
            xtx += &xv * xv.transpose();
            xty += xv * y;
        }
        let sol = ls.finish().unwrap();
        let oracle = xtx.lu().solve(&xty).unwrap();
        for k in 0..3 {
            assert!((sol.beta[k] - oracle[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn collinear_columns_flagged() {
        let mut ls = StreamingLeastSquares::new(2);
        for i in 0..10 {
            ls.push(&[1.0, 1.0], i as f64);
        }
        assert!(matches!(ls.finish(), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&a).unwrap();
        let id = &a * inv;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!(spd_inverse(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).is_none());
    }
}
