use super::SmoothFunction;
use crate::error::{Error, Result};
use crate::numerics::{self, cholesky_solve, spectral_norm_upper, DenseSymMatrix};

/// `g(x) = x^T Q x / 2 - c^T x` with `Q` positive semidefinite.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: DenseSymMatrix,
    c: Vec<f64>,
    q_norm: f64,
}

impl QuadraticProblem {
    pub fn new(q: DenseSymMatrix, c: Vec<f64>) -> Result<Self> {
        if c.len() != q.order() {
            return Err(Error::DimensionMismatch {
                expected: q.order(),
                got: c.len(),
            });
        }
        // power iteration from below, padded; Gershgorin caps it from above
        let q_norm = (spectral_norm_upper(&q, 500) * (1.0 + 1e-9)).min(q.max_row_abs_sum());
        Ok(QuadraticProblem { q, c, q_norm })
    }

    pub fn q(&self) -> &DenseSymMatrix {
        &self.q
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// `Q^{-1} c`, available when `Q` is positive definite.
    pub fn minimizer(&self) -> Result<Vec<f64>> {
        Ok(cholesky_solve(&self.q, &self.c)?.solution)
    }
}

impl SmoothFunction for QuadraticProblem {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.q.quad_form(x) - numerics::dot(&self.c, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        numerics::sub(&self.q.mul_vec(x), &self.c)
    }

    fn hessian(&self, _x: &[f64]) -> DenseSymMatrix {
        self.q.clone()
    }

    fn hessian_vec(&self, _x: &[f64], v: &[f64]) -> Vec<f64> {
        self.q.mul_vec(v)
    }

    fn gradient_lipschitz(&self) -> f64 {
        self.q_norm
    }

    fn hessian_lipschitz(&self) -> f64 {
        0.0
    }
}
