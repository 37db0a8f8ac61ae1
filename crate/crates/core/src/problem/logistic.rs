use std::ops::Range;

use super::{FiniteSum, SmoothFunction};
use crate::error::{Error, Result};
use crate::numerics::{
    self, add_into, pairwise_reduce, DenseMatrix, DenseSymMatrix, SparseRowMatrix,
};

/// `sup_t |d^3/dt^3 log(1 + e^{-t})| = 1 / (6 sqrt 3)`.
pub const LOGISTIC_THIRD_DERIVATIVE_BOUND: f64 = 0.096_225_044_864_937_63;

const ROW_LEAF: usize = 256;

/// Numerically stable `1 / (1 + e^{-t})`.
#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^{-t})` as `log1p(e^{-|t|}) + max(-t, 0)`.
#[inline]
pub fn logistic_loss(t: f64) -> f64 {
    (-t.abs()).exp().ln_1p() + (-t).max(0.0)
}

/// `(1/n) sum_i log(1 + exp(-b_i w_i^T x)) + (alpha/2) ||x||^2`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    data: SparseRowMatrix,
    labels: Vec<f64>,
    alpha: f64,
    max_row_norm: f64,
}

impl LogisticRegression {
    pub fn new(data: SparseRowMatrix, labels: Vec<f64>, alpha: f64) -> Result<Self> {
        if labels.len() != data.rows() {
            return Err(Error::DimensionMismatch {
                expected: data.rows(),
                got: labels.len(),
            });
        }
        if data.rows() == 0 {
            return Err(Error::InvalidConfig("logistic regression needs at least one row".into()));
        }
        if let Some((line, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &b)| b != 1.0 && b != -1.0)
        {
            return Err(Error::NonBinaryLabel { line: line + 1, label });
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("ridge weight {alpha}")));
        }
        let max_row_norm = data.max_row_norm();
        Ok(LogisticRegression {
            data,
            labels,
            alpha,
            max_row_norm,
        })
    }

    pub fn data(&self) -> &SparseRowMatrix {
        &self.data
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.data.rows()
    }

    /// `(L1, L2)` from the row norms.
    pub fn lipschitz_bounds(&self) -> (f64, f64) {
        let r = self.max_row_norm;
        (0.25 * r * r + self.alpha, LOGISTIC_THIRD_DERIVATIVE_BOUND * r * r * r)
    }

    #[inline]
    fn margin(&self, i: usize, x: &[f64]) -> f64 {
        self.labels[i] * self.data.row_dot(i, x)
    }

    fn check_dim(&self, x: &[f64]) {
        assert_eq!(x.len(), self.data.cols(), "logistic regression dimension");
    }

    /// Value, gradient and Hessian in one pass over the data.
    pub fn value_grad_hess(&self, x: &[f64]) -> Result<(f64, Vec<f64>, DenseSymMatrix)> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let (f, g) = self.value_gradient(x);
        Ok((f, g, self.hessian(x)))
    }

    fn curvature_sum(&self, x: &[f64], rows: &[usize]) -> Vec<f64> {
        let d = self.dim();
        let leaf = |r: Range<usize>| {
            let mut acc = vec![0.0; d * d];
            for k in r {
                let i = rows[k];
                let t = self.margin(i, x);
                let c = sigmoid(t) * sigmoid(-t);
                let (idx, val) = self.data.row(i);
                for (a, (&ja, &va)) in idx.iter().zip(val).enumerate() {
                    let cva = c * va;
                    for (&jb, &vb) in idx[a..].iter().zip(&val[a..]) {
                        let (p, q) = if ja <= jb { (ja, jb) } else { (jb, ja) };
                        acc[p * d + q] += cva * vb;
                    }
                }
            }
            acc
        };
        pairwise_reduce(0..rows.len(), ROW_LEAF, &leaf, &add_into)
    }
}

impl SmoothFunction for LogisticRegression {
    fn dim(&self) -> usize {
        self.data.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.check_dim(x);
        let n = self.n();
        // same leaf order as value_gradient, so the two agree bitwise
        let leaf = |r: Range<usize>| r.fold(0.0, |acc, i| acc + logistic_loss(self.margin(i, x)));
        let loss = pairwise_reduce(0..n, ROW_LEAF, &leaf, &|a, b| a + b);
        loss * (1.0 / n as f64) + 0.5 * self.alpha * numerics::norm_sq(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_gradient(x).1
    }

    fn value_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.check_dim(x);
        let n = self.n();
        let d = self.dim();
        // slot d carries the loss so value and gradient share one pass
        let leaf = |r: Range<usize>| {
            let mut acc = vec![0.0; d + 1];
            for i in r {
                let t = self.margin(i, x);
                acc[d] += logistic_loss(t);
                let coef = -self.labels[i] * sigmoid(-t);
                let (idx, val) = self.data.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    acc[j] += coef * v;
                }
            }
            acc
        };
        let acc = pairwise_reduce(0..n, ROW_LEAF, &leaf, &add_into);
        let inv_n = 1.0 / n as f64;
        let grad = (0..d).map(|j| acc[j] * inv_n + self.alpha * x[j]).collect();
        let value = acc[d] * inv_n + 0.5 * self.alpha * numerics::norm_sq(x);
        (value, grad)
    }

    fn hessian(&self, x: &[f64]) -> DenseSymMatrix {
        self.check_dim(x);
        let all: Vec<usize> = (0..self.n()).collect();
        let mut upper = self.curvature_sum(x, &all);
        let inv_n = 1.0 / self.n() as f64;
        upper.iter_mut().for_each(|v| *v *= inv_n);
        DenseSymMatrix::from_upper(self.dim(), upper).with_diagonal_shift(self.alpha)
    }

    fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.check_dim(x);
        let n = self.n();
        let d = self.dim();
        let leaf = |r: Range<usize>| {
            let mut acc = vec![0.0; d];
            for i in r {
                let t = self.margin(i, x);
                let c = sigmoid(t) * sigmoid(-t) * self.data.row_dot(i, v);
                let (idx, val) = self.data.row(i);
                for (&j, &w) in idx.iter().zip(val) {
                    acc[j] += c * w;
                }
            }
            acc
        };
        let acc = pairwise_reduce(0..n, ROW_LEAF, &leaf, &add_into);
        let inv_n = 1.0 / n as f64;
        (0..d).map(|j| acc[j] * inv_n + self.alpha * v[j]).collect()
    }

    fn gradient_lipschitz(&self) -> f64 {
        self.lipschitz_bounds().0
    }

    fn hessian_lipschitz(&self) -> f64 {
        self.lipschitz_bounds().1
    }

    fn num_components(&self) -> usize {
        self.n()
    }

    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        Some(self)
    }
}

impl FiniteSum for LogisticRegression {
    fn num_components(&self) -> usize {
        self.n()
    }

    fn sampled_hessian(&self, x: &[f64], sample: &[usize]) -> DenseSymMatrix {
        self.check_dim(x);
        let d = self.dim();
        if sample.is_empty() {
            return DenseSymMatrix::scaled_identity(d, self.alpha);
        }
        let mut upper = self.curvature_sum(x, sample);
        let inv = 1.0 / sample.len() as f64;
        upper.iter_mut().for_each(|v| *v *= inv);
        DenseSymMatrix::from_upper(d, upper).with_diagonal_shift(self.alpha)
    }

    fn hessian_sqrt(&self, x: &[f64]) -> (DenseMatrix, f64) {
        self.check_dim(x);
        let n = self.n();
        let mut r = DenseMatrix::zeros(n, self.dim());
        let inv_n = 1.0 / n as f64;
        for i in 0..n {
            let t = self.margin(i, x);
            let s = (sigmoid(t) * sigmoid(-t) * inv_n).sqrt();
            let (idx, val) = self.data.row(i);
            let row = r.row_mut(i);
            for (&j, &v) in idx.iter().zip(val) {
                row[j] += s * v;
            }
        }
        (r, self.alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LogisticRegression {
        let rows = vec![vec![1.0, 0.0], vec![0.5, -1.0], vec![-0.3, 2.0]];
        LogisticRegression::new(
            SparseRowMatrix::from_dense_rows(&rows).unwrap(),
            vec![1.0, -1.0, 1.0],
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn stable_loss_large_margins() {
        assert_eq!(logistic_loss(1000.0), 0.0);
        assert!((logistic_loss(-1000.0) - 1000.0).abs() < 1e-12);
        assert!((logistic_loss(0.0) - 2f64.ln()).abs() < 1e-16);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn closed_form_single_sample() {
        let p = LogisticRegression::new(
            SparseRowMatrix::from_dense_rows(&[vec![1.0, 0.0]]).unwrap(),
            vec![1.0],
            0.0,
        )
        .unwrap();
        let v = p.value(&[3.0, 0.0]);
        assert!((v - (1.0 + (-3.0f64).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn value_matches_fused_pass_bitwise() {
        let rows: Vec<Vec<f64>> = (0..2000).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()]).collect();
        let labels = (0..2000).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = LogisticRegression::new(SparseRowMatrix::from_dense_rows(&rows).unwrap(), labels, 1e-3).unwrap();
        for x in [[0.3, -1.7], [12.0, 5.0]] {
            assert_eq!(p.value(&x).to_bits(), p.value_gradient(&x).0.to_bits());
        }
    }

    #[test]
    fn values_at_origin() {
        let p = toy();
        let (f, g, h) = p.value_grad_hess(&[0.0, 0.0]).unwrap();
        assert!((f - 2f64.ln()).abs() < 1e-15);
        // -(1/n) sum b_i w_i / 2
        let expect_g = [-(1.0 - 0.5 - 0.3) / 6.0, -(0.0 + 1.0 + 2.0) / 6.0];
        assert!((g[0] - expect_g[0]).abs() < 1e-15);
        assert!((g[1] - expect_g[1]).abs() < 1e-15);
        // (1/(4n)) sum w w^T + alpha I
        let h00 = (1.0 + 0.25 + 0.09) / 12.0 + 0.1;
        let h01 = (0.0 - 0.5 - 0.6) / 12.0;
        assert!((h.get(0, 0) - h00).abs() < 1e-15);
        assert!((h.get(0, 1) - h01).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_labels_and_dims() {
        let data = SparseRowMatrix::from_dense_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(
            LogisticRegression::new(data.clone(), vec![0.0], 0.0),
            Err(Error::NonBinaryLabel { .. })
        ));
        let p = LogisticRegression::new(data, vec![1.0], 0.0).unwrap();
        assert!(matches!(
            p.value_grad_hess(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hessian_vec_and_sqrt_agree_with_dense() {
        let p = toy();
        let x = [0.4, -0.7];
        let h = p.hessian(&x);
        let v = [1.5, 0.25];
        let hv = p.hessian_vec(&x, &v);
        let dense = h.mul_vec(&v);
        for (a, b) in hv.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-14);
        }
        let (r, ridge) = p.hessian_sqrt(&x);
        let rebuilt = r.gram().with_diagonal_shift(ridge);
        assert!(rebuilt.sub(&h).frobenius_norm() < 1e-14);
        let full = p.sampled_hessian(&x, &[0, 1, 2]);
        assert!(full.sub(&h).frobenius_norm() < 1e-15);
    }

    #[test]
    fn lipschitz_bounds_unit_rows() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let p = LogisticRegression::new(
            SparseRowMatrix::from_dense_rows(&rows).unwrap(),
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        let (l1, l2) = p.lipschitz_bounds();
        assert_eq!(l1, 0.25);
        assert!((l2 - 1.0 / (6.0 * 3f64.sqrt())).abs() < 1e-17);
        let zero = LogisticRegression::new(
            SparseRowMatrix::from_dense_rows(&[vec![0.0, 0.0]]).unwrap(),
            vec![1.0],
            0.3,
        )
        .unwrap();
        assert_eq!(zero.lipschitz_bounds(), (0.3, 0.0));
    }
}
