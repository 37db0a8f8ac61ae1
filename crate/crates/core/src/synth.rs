//! Seeded synthetic instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::numerics::{DenseMatrix, DenseSymMatrix, SparseRowMatrix};
use crate::problem::{sigmoid, LogisticRegression, QuadraticProblem};

fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Dense logistic data: rows `w_i ~ N(0, I/d)`, labels drawn from the model
/// with a planted `x_true ~ N(0, scale^2 I)`, so the classes overlap.
pub fn logistic_instance(
    n: usize,
    d: usize,
    alpha: f64,
    planted_scale: f64,
    seed: u64,
) -> Result<LogisticRegression> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x_true: Vec<f64> = (0..d).map(|_| planted_scale * gaussian(&mut rng)).collect();
    let row_scale = 1.0 / (d as f64).sqrt();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let w: Vec<f64> = (0..d).map(|_| row_scale * gaussian(&mut rng)).collect();
        let t: f64 = w.iter().zip(&x_true).map(|(a, b)| a * b).sum();
        let label = if rng.random::<f64>() < sigmoid(t) { 1.0 } else { -1.0 };
        rows.push(w);
        labels.push(label);
    }
    LogisticRegression::new(SparseRowMatrix::from_dense_rows(&rows)?, labels, alpha)
}

/// `Q = G^T G / d + mu I` with Gaussian `G` and `c ~ N(0, I)`.
pub fn quadratic_instance(d: usize, mu: f64, seed: u64) -> Result<QuadraticProblem> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..d * d).map(|_| gaussian(&mut rng)).collect();
    let q = DenseMatrix::from_row_major(d, d, g)?
        .gram()
        .scaled(1.0 / d as f64)
        .with_diagonal_shift(mu);
    let c: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    QuadraticProblem::new(q, c)
}

/// Standard normal vector of length `d`.
pub fn gaussian_vector(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..d).map(|_| gaussian(&mut rng)).collect()
}

/// Random symmetric matrix with entries `N(0, 1)`.
pub fn symmetric_gaussian(d: usize, seed: u64) -> DenseSymMatrix {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let upper: Vec<f64> = (0..d * d).map(|_| gaussian(&mut rng)).collect();
    DenseSymMatrix::from_fn(d, |i, j| upper[i * d + j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SmoothFunction;

    #[test]
    fn reproducible_and_mixed_labels() {
        let a = logistic_instance(200, 10, 1e-5, 1.0, 3).unwrap();
        let b = logistic_instance(200, 10, 1e-5, 1.0, 3).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.data(), b.data());
        let pos = a.labels().iter().filter(|&&l| l > 0.0).count();
        assert!(pos > 20 && pos < 180);
        assert_eq!(a.dim(), 10);
    }

    #[test]
    fn quadratic_is_positive_definite() {
        let q = quadratic_instance(6, 0.1, 9).unwrap();
        assert!(q.minimizer().is_ok());
    }
}
