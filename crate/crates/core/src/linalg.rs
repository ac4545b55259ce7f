//! Small dense least-squares kernel used by the forward and backward fits.
//!
//! Columns are scaled to unit Euclidean norm before a Householder QR
//! factorization; the returned coefficients are un-scaled afterwards. For a
//! full-rank design this is the same minimizer as the normal-equations
//! solution `(FᵀF)⁻¹FᵀV`, without squaring the condition number.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged rows");
            m.row_mut(i).copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }
}

/// Solution of an ordinary least-squares problem.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coeffs: Vec<f64>,
    /// `y - A·coeffs`.
    pub residuals: Vec<f64>,
    /// Per-column scale factors (column norms) applied before factorization.
    pub column_scale: Vec<f64>,
}

/// Minimizes `‖A x − y‖₂`.
pub fn least_squares(a: &Matrix, y: &[f64]) -> Result<LeastSquares> {
    let (m, n) = (a.rows(), a.cols());
    assert_eq!(y.len(), m, "rhs length");
    if m < n || n == 0 {
        return Err(Error::RankDeficient { rows: m, cols: n, rank: m.min(n) });
    }

    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let norm = (0..m).map(|i| a.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();

    // column-major working copy of the scaled design
    let mut q: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a.get(i, j) / scale[j]).collect()).collect();
    let mut rhs = y.to_vec();
    let mut diag = vec![0.0; n];

    for k in 0..n {
        let norm = q[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if q[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = q[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in q.iter_mut().skip(k) {
            let dot: f64 = col[k..].iter().zip(&v).map(|(c, vi)| c * vi).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = rhs[k..].iter().zip(&v).map(|(c, vi)| c * vi).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in rhs[k..].iter_mut().zip(&v) {
            *c -= f * vi;
        }
    }

    let dmax = diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs()));
    let tol = dmax * (m.max(n) as f64) * f64::EPSILON;
    let rank = diag.iter().filter(|d| d.abs() > tol).count();
    if rank < n {
        return Err(Error::RankDeficient { rows: m, cols: n, rank });
    }

    // back substitution on R (upper triangle of the transformed columns)
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= q[j][i] * x[j];
        }
        x[i] = s / q[i][i];
    }
    for (xi, s) in x.iter_mut().zip(&scale) {
        *xi /= s;
    }

    let fitted = a.mul_vec(&x);
    let residuals = y.iter().zip(&fitted).map(|(yi, fi)| yi - fi).collect();
    Ok(LeastSquares { coeffs: x, residuals, column_scale: scale })
}
