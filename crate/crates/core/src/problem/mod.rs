//! Composite objectives `f = g + h`.
//!
//! `g` is smooth and convex with a Lipschitz Hessian and is supplied through
//! [`SmoothFunction`]; `h` is one of the closed-form [`Regularizer`]s.

mod logistic;
mod quadratic;

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use logistic::{logistic_loss, sigmoid, LogisticRegression, LOGISTIC_THIRD_DERIVATIVE_BOUND};
pub use quadratic::QuadraticProblem;

use crate::numerics::{self, DenseMatrix, DenseSymMatrix};

pub trait SmoothFunction: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    fn hessian(&self, x: &[f64]) -> DenseSymMatrix;

    fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.hessian(x).mul_vec(v)
    }

    /// Upper bound on the gradient Lipschitz constant (`L1`).
    fn gradient_lipschitz(&self) -> f64;

    /// Upper bound on the Hessian Lipschitz constant (`L2`).
    fn hessian_lipschitz(&self) -> f64;

    /// Number of summands for data-pass accounting; 1 for non-separable `g`.
    fn num_components(&self) -> usize {
        1
    }

    fn finite_sum(&self) -> Option<&dyn FiniteSum> {
        None
    }
}

/// `g = (1/n) sum_j g_j` with per-component curvature access.
pub trait FiniteSum: Send + Sync {
    fn num_components(&self) -> usize;

    /// `(1/|S|) sum_{j in S} hess g_j(x)`; repeated indices count repeatedly.
    fn sampled_hessian(&self, x: &[f64], sample: &[usize]) -> DenseSymMatrix;

    /// A factor `R` and ridge `r` with `hess g(x) = R^T R + r I`.
    fn hessian_sqrt(&self, x: &[f64]) -> (DenseMatrix, f64);
}

/// The nonsmooth part `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    /// `weight * ||x||_1`
    L1 { weight: f64 },
}

impl Regularizer {
    pub fn is_zero(&self) -> bool {
        match self {
            Regularizer::Zero => true,
            Regularizer::L1 { weight } => *weight == 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => {
                weight * numerics::pairwise_sum_by(0..x.len(), &|i| x[i].abs())
            }
        }
    }

    /// `argmin_y h(y) + ||y - z||^2 / (2 tau)`
    pub fn prox(&self, z: &[f64], tau: f64) -> Vec<f64> {
        match *self {
            Regularizer::Zero => z.to_vec(),
            Regularizer::L1 { weight } => {
                let t = tau * weight;
                z.iter()
                    .map(|&zi| {
                        if zi > t {
                            zi - t
                        } else if zi < -t {
                            zi + t
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }

    /// The element `(z - y) / tau` of `dh(y)` certified by `y = prox(z, tau)`,
    /// evaluated in closed form so it lies in `dh(y)` exactly.
    pub fn subgrad_from_prox(&self, z: &[f64], tau: f64, y: &[f64]) -> Vec<f64> {
        match *self {
            Regularizer::Zero => vec![0.0; y.len()],
            Regularizer::L1 { weight } => y
                .iter()
                .zip(z)
                .map(|(&yi, &zi)| {
                    if yi > 0.0 {
                        weight
                    } else if yi < 0.0 {
                        -weight
                    } else {
                        (zi / tau).clamp(-weight, weight)
                    }
                })
                .collect(),
        }
    }

    /// Euclidean Lipschitz constant of `h` on `R^dim` (`L'`).
    pub fn lipschitz(&self, dim: usize) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight.abs() * (dim as f64).sqrt(),
        }
    }

    /// Checks `h(z) >= h(y) + <s, z - y> - tol` on each probe and `||s|| <= L'`.
    pub fn is_subgradient(&self, y: &[f64], s: &[f64], probes: &[Vec<f64>], tol: f64) -> bool {
        let hy = self.value(y);
        let bound_ok = numerics::norm(s) <= self.lipschitz(y.len()) * (1.0 + 1e-12) + tol;
        bound_ok
            && probes.iter().all(|z| {
                let step = numerics::sub(z, y);
                self.value(z) >= hy + numerics::dot(s, &step) - tol * (1.0 + numerics::norm(&step))
            })
    }
}

/// `f = g + h`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    pub smooth: Arc<dyn SmoothFunction>,
    pub reg: Regularizer,
}

impl CompositeProblem {
    pub fn new(smooth: Arc<dyn SmoothFunction>, reg: Regularizer) -> Self {
        CompositeProblem { smooth, reg }
    }

    pub fn smooth_only(smooth: Arc<dyn SmoothFunction>) -> Self {
        Self::new(smooth, Regularizer::Zero)
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth.value(x) + self.reg.value(x)
    }

    pub fn l1(&self) -> f64 {
        self.smooth.gradient_lipschitz()
    }

    pub fn l2(&self) -> f64 {
        self.smooth.hessian_lipschitz()
    }

    pub fn lh(&self) -> f64 {
        self.reg.lipschitz(self.dim())
    }
}

/// Result of [`fd_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// Normwise relative error of the gradient against central differences of the value.
    pub gradient_error: f64,
    /// Relative error of the Hessian columns against central differences of the gradient.
    pub hessian_error: f64,
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = numerics::norm(a).max(numerics::norm(b));
    let diff = numerics::dist(a, b);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Compares analytic derivatives against central differences with step
/// `1e-5 (1 + ||x||)`.
pub fn fd_check(g: &dyn SmoothFunction, x: &[f64]) -> FdReport {
    let d = g.dim();
    let h = 1e-5 * (1.0 + numerics::norm(x));
    let grad = g.gradient(x);
    let mut fd_grad = vec![0.0; d];
    let hess = g.hessian(x);
    let mut fd_hess = vec![0.0; d * d];
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        fd_grad[i] = (g.value(&xp) - g.value(&xm)) / (2.0 * h);
        let gp = g.gradient(&xp);
        let gm = g.gradient(&xm);
        for j in 0..d {
            fd_hess[j * d + i] = (gp[j] - gm[j]) / (2.0 * h);
        }
        xp[i] = x[i];
        xm[i] = x[i];
    }
    let hessian_error = rel_err(hess.as_slice(), &fd_hess);
    FdReport {
        gradient_error: rel_err(&grad, &fd_grad),
        hessian_error,
    }
}
