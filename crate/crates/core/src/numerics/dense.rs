use serde::{Deserialize, Serialize};

use super::{dot, pairwise_sum_by};
use crate::error::{Error, Result};

/// Symmetric matrix in full row-major storage.
///
/// Every constructor writes `M[i][j]` and `M[j][i]` from the same value, so
/// the stored matrix is exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseSymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    /// Takes the upper triangle of a row-major buffer and mirrors it.
    pub fn from_upper(n: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        for i in 0..n {
            for j in (i + 1)..n {
                data[j * n + i] = data[i * n + j];
            }
        }
        DenseSymMatrix { n, data }
    }

    /// Symmetrizes an arbitrary square row-major buffer as `(M + M^T) / 2`.
    pub fn from_row_major(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if !super::all_finite(data) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self::from_fn(n, |i, j| {
            if i == j {
                data[i * n + i]
            } else {
                0.5 * (data[i * n + j] + data[j * n + i])
            }
        }))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        Self::from_row_major(n, &flat)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "mul_vec dimension");
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.mul_vec(v))
    }

    pub fn trace(&self) -> f64 {
        pairwise_sum_by(0..self.n, &|i| self.get(i, i))
    }

    pub fn frobenius_norm(&self) -> f64 {
        pairwise_sum_by(0..self.data.len(), &|k| self.data[k] * self.data[k]).sqrt()
    }

    /// Largest absolute row sum; an upper bound on the spectral norm.
    pub fn max_row_abs_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| pairwise_sum_by(0..self.n, &|j| self.get(i, j).abs()))
            .fold(0.0, f64::max)
    }

    /// Always zero: kept so callers can assert the storage contract.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += s;
        }
    }

    pub fn with_diagonal_shift(mut self, s: f64) -> Self {
        self.add_diagonal(s);
        self
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }

    /// `self + s * other`
    pub fn add_scaled(&self, s: f64, other: &DenseSymMatrix) -> Self {
        assert_eq!(self.n, other.n);
        DenseSymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &DenseSymMatrix) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn is_finite(&self) -> bool {
        super::all_finite(&self.data)
    }
}

/// General row-major matrix (data factors, sketches).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|j| pairwise_sum_by(0..self.rows, &|i| self.get(i, j) * v[i]))
            .collect()
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let v = pairwise_sum_by(0..self.cols, &|k| self.get(i, k) * other.get(k, j));
                out.set(i, j, v);
            }
        }
        out
    }

    /// `self^T * self`
    pub fn gram(&self) -> DenseSymMatrix {
        let d = self.cols;
        DenseSymMatrix::from_fn(d, |a, b| {
            pairwise_sum_by(0..self.rows, &|i| self.get(i, a) * self.get(i, b))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrization_is_exact() {
        let raw = [1.0, 2.0, 3.0, 2.5, 5.0, 6.0, 3.1, 6.2, 9.0];
        let m = DenseSymMatrix::from_row_major(3, &raw).unwrap();
        assert_eq!(m.max_asymmetry(), 0.0);
        assert_eq!(m.get(0, 1), 2.25);
    }

    #[test]
    fn rejects_non_finite() {
        let raw = [1.0, f64::NAN, f64::NAN, 1.0];
        assert!(matches!(
            DenseSymMatrix::from_row_major(2, &raw),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn gram_matches_explicit_product() {
        let a = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = a.gram();
        assert_eq!(g.get(0, 0), 35.0);
        assert_eq!(g.get(0, 1), 44.0);
        assert_eq!(g.get(1, 1), 56.0);
        assert_eq!(a.transpose_mul_vec(&[1.0, 1.0, 1.0]), vec![9.0, 12.0]);
    }
}
