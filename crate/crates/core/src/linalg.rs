//! Minimal dense linear algebra: a row-major matrix, Cholesky factorization
//! for the small symmetric systems this crate solves (correlation submatrices,
//! normal equations), and an OLS helper for BIC scoring.

use serde::{Deserialize, Serialize};

use crate::scalar::{real, Real};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Matrix<F: Real> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Real> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == p), "ragged rows");
        let mut data = Vec::with_capacity(n * p);
        for r in &rows {
            data.extend_from_slice(r);
        }
        Matrix {
            rows: n,
            cols: p,
            data,
        }
    }

    /// Columns are borrowed slices of equal length; the matrix holds one row
    /// per index position.
    pub fn from_columns(cols: &[&[F]]) -> Self {
        let p = cols.len();
        let n = cols.first().map_or(0, |c| c.len());
        assert!(cols.iter().all(|c| c.len() == n), "ragged columns");
        let mut m = Matrix::zeros(n, p);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m.data[i * p + j] = v;
            }
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

/// Cholesky factor L (lower, row-major k*k) of a symmetric positive-definite
/// matrix. Returns `None` when a pivot falls below `tol` (singular input).
pub fn cholesky<F: Real>(a: &[F], k: usize, tol: F) -> Option<Vec<F>> {
    debug_assert_eq!(a.len(), k * k);
    let mut l = vec![F::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j];
            for m in 0..j {
                s = s - l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if s <= tol {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    Some(l)
}

/// Solve L L^T x = b given the Cholesky factor.
pub fn cholesky_solve<F: Real>(l: &[F], k: usize, b: &[F]) -> Vec<F> {
    let mut y = vec![F::zero(); k];
    for i in 0..k {
        let mut s = b[i];
        for j in 0..i {
            s = s - l[i * k + j] * y[j];
        }
        y[i] = s / l[i * k + i];
    }
    let mut x = vec![F::zero(); k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for j in i + 1..k {
            s = s - l[j * k + i] * x[j];
        }
        x[i] = s / l[i * k + i];
    }
    x
}

/// Inverse of a symmetric positive-definite matrix, or `None` if singular.
pub fn invert_spd<F: Real>(a: &[F], k: usize) -> Option<Vec<F>> {
    let l = cholesky(a, k, real(1e-12))?;
    let mut inv = vec![F::zero(); k * k];
    for j in 0..k {
        let mut e = vec![F::zero(); k];
        e[j] = F::one();
        let x = cholesky_solve(&l, k, &e);
        for i in 0..k {
            inv[i * k + j] = x[i];
        }
    }
    Some(inv)
}

/// Ordinary least squares of y on the given predictor columns plus an
/// intercept. Returns (coefficients with intercept first, RSS), or `None`
/// when the normal equations are singular.
pub fn ols_rss<F: Real>(columns: &[&[F]], y: &[F]) -> Option<(Vec<F>, F)> {
    let n = y.len();
    let p = columns.len() + 1;
    debug_assert!(columns.iter().all(|c| c.len() == n));

    // Normal equations over [1, X].
    let mut g = vec![F::zero(); p * p];
    let mut c = vec![F::zero(); p];
    g[0] = F::from_usize_lossy(n);
    c[0] = y.iter().copied().sum();
    for (a, col) in columns.iter().enumerate() {
        let ja = a + 1;
        let s: F = col.iter().copied().sum();
        g[ja] = s;
        g[ja * p] = s;
        c[ja] = dot(col, y);
        for (b, col_b) in columns.iter().enumerate().take(a + 1) {
            let jb = b + 1;
            let v = dot(col, col_b);
            g[ja * p + jb] = v;
            g[jb * p + ja] = v;
        }
    }

    let l = cholesky(&g, p, real(1e-12))?;
    let beta = cholesky_solve(&l, p, &c);

    let mut rss = F::zero();
    for i in 0..n {
        let mut pred = beta[0];
        for (a, col) in columns.iter().enumerate() {
            pred = pred + beta[a + 1] * col[i];
        }
        let r = y[i] - pred;
        rss = rss + r * r;
    }
    Some((beta, rss))
}

/// Dot product with four accumulators so LLVM can vectorize the reduction
/// without reassociation flags.
#[inline]
pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (F::zero(), F::zero(), F::zero(), F::zero());
    for c in 0..chunks {
        let i = c * 4;
        s0 = s0 + a[i] * b[i];
        s1 = s1 + a[i + 1] * b[i + 1];
        s2 = s2 + a[i + 2] * b[i + 2];
        s3 = s3 + a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in chunks * 4..n {
        s = s + a[i] * b[i];
    }
    s
}

/// `out[i] += scale * v[i]`.
#[inline]
pub fn axpy<F: Real>(scale: F, v: &[F], out: &mut [F]) {
    debug_assert_eq!(v.len(), out.len());
    for (o, &x) in out.iter_mut().zip(v.iter()) {
        *o = *o + scale * x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_a_known_system() {
        // A = [[4,2],[2,3]], b = [2, 1] -> x = [0.5, 0]
        let a = vec![4.0_f64, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2, 1e-12).unwrap();
        let x = cholesky_solve(&l, 2, &[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = vec![1.0_f64, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2, 1e-12).is_none());
        assert!(invert_spd(&a, 2).is_none());
    }

    #[test]
    fn spd_inverse_matches_hand_computation() {
        let a = vec![2.0_f64, 1.0, 1.0, 2.0];
        let inv = invert_spd(&a, 2).unwrap();
        // inverse = 1/3 * [[2,-1],[-1,2]]
        assert!((inv[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((inv[1] + 1.0 / 3.0).abs() < 1e-12);
        assert!((inv[3] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_linear_data() {
        let x1: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let x2: Vec<f64> = (0..50).map(|i| ((i * 7) % 13) as f64).collect();
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(&a, &b)| 1.5 + 3.0 * a - 2.0 * b)
            .collect();
        let (beta, rss) = ols_rss(&[&x1, &x2], &y).unwrap();
        assert!((beta[0] - 1.5).abs() < 1e-9);
        assert!((beta[1] - 3.0).abs() < 1e-9);
        assert!((beta[2] + 2.0).abs() < 1e-9);
        assert!(rss < 1e-16);
    }

    #[test]
    fn matrix_layout_round_trips() {
        let m = Matrix::from_rows(vec![vec![1.0_f64, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0]);
        let c0 = [1.0_f64, 3.0];
        let c1 = [2.0_f64, 4.0];
        let m2 = Matrix::from_columns(&[&c0, &c1]);
        assert_eq!(m, m2);
    }
}
