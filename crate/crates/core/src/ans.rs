//! Approximate Newton solutions of the proximal quadratic subproblem
//!
//! ```text
//! min_y  <grad g(x), y - x> + (y - x)^T H (y - x) / 2 + h(y) + ||y - x||^2 / (2 lambda)
//! ```
//!
//! and their conversion into certificates against the true gradient.

use crate::error::{Error, Result};
use crate::numerics::{self, cg_solve, cholesky_solve, DenseSymMatrix, DENSE_LIMIT};
use crate::oracle::FrozenOracle;
use crate::problem::{CompositeProblem, Regularizer};

/// Relative slack used by every certificate recheck.
pub const CERT_REL_TOL: f64 = 1e-9;

const MAX_PROX_ITERS: usize = 200_000;
const MAX_CG_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerSolver {
    /// Dense Cholesky up to the dense limit, CG beyond it.
    Auto,
    Dense,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsStatus {
    Certified,
    /// `y = x` with a zero model gradient; both sides of the certificate vanish.
    Stationary,
}

/// Quadratic model of `g` around `x`: value gradient and approximate Hessian.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub x: Vec<f64>,
    pub gradient: Vec<f64>,
    pub hessian: DenseSymMatrix,
}

impl LocalModel {
    pub fn new(problem: &CompositeProblem, oracle: &FrozenOracle, x: &[f64]) -> Self {
        LocalModel {
            x: x.to_vec(),
            gradient: problem.smooth.gradient(x),
            hessian: oracle.evaluate(x),
        }
    }

    /// `grad g(x) + H (y - x)`
    pub fn gradient_at(&self, y: &[f64]) -> Vec<f64> {
        let step = numerics::sub(y, &self.x);
        numerics::add(&self.gradient, &self.hessian.mul_vec(&step))
    }
}

/// A `(sigma_hat, delta)`-approximate Newton solution `(y, u, eps)`.
#[derive(Debug, Clone)]
pub struct AnsCertificate {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub sigma_hat: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub eps: f64,
    /// `||lambda u + y - x||^2 + 2 lambda eps`
    pub lhs: f64,
    /// `sigma_hat^2 ||y - x||^2`
    pub rhs: f64,
    pub inner_iterations: usize,
    /// Model gradient `grad g(x) + H (y - x)` at `y`.
    pub model_gradient: Vec<f64>,
    /// Subgradient of `h` at `y` contained in `u`.
    pub h_subgradient: Vec<f64>,
    pub status: AnsStatus,
}

impl AnsCertificate {
    pub fn step_norm(&self) -> f64 {
        numerics::dist(&self.y, &self.x)
    }

    /// `lambda ||y - x||`
    pub fn step_length(&self) -> f64 {
        self.lambda * self.step_norm()
    }

    /// Recomputes both sides from `(x, lambda, y, u, eps)`.
    pub fn recheck(&self) -> (f64, f64) {
        let d = numerics::sub(&self.y, &self.x);
        let r = numerics::lincomb(self.lambda, &self.u, 1.0, &d);
        (
            numerics::norm_sq(&r) + 2.0 * self.lambda * self.eps,
            self.sigma_hat * self.sigma_hat * numerics::norm_sq(&d),
        )
    }

    pub fn holds(&self) -> bool {
        let (lhs, rhs) = self.recheck();
        lhs <= rhs
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnsOptions {
    pub sigma_hat: f64,
    pub solver: InnerSolver,
}

impl AnsOptions {
    pub fn new(sigma_hat: f64) -> Self {
        AnsOptions {
            sigma_hat,
            solver: InnerSolver::Auto,
        }
    }
}

fn check_inputs(lambda: f64, sigma_hat: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    if !(sigma_hat > 0.0 && sigma_hat < 1.0) {
        return Err(Error::InvalidTolerance(format!("sigma_hat {sigma_hat} outside (0, 1)")));
    }
    Ok(())
}

/// Builds the local model at `x` and solves the subproblem.
pub fn solve_ans(
    problem: &CompositeProblem,
    oracle: &FrozenOracle,
    x: &[f64],
    lambda: f64,
    opts: AnsOptions,
) -> Result<AnsCertificate> {
    let model = LocalModel::new(problem, oracle, x);
    solve_ans_with_model(&problem.reg, &model, lambda, opts)
}

pub fn solve_ans_with_model(
    reg: &Regularizer,
    model: &LocalModel,
    lambda: f64,
    opts: AnsOptions,
) -> Result<AnsCertificate> {
    check_inputs(lambda, opts.sigma_hat)?;
    if model.gradient.len() != model.x.len() || model.hessian.order() != model.x.len() {
        return Err(Error::DimensionMismatch {
            expected: model.x.len(),
            got: model.hessian.order(),
        });
    }
    if !numerics::all_finite(&model.gradient) {
        return Err(Error::NonFinite("gradient"));
    }
    if reg.is_zero() {
        solve_smooth(model, lambda, opts)
    } else {
        solve_composite(reg, model, lambda, opts.sigma_hat)
    }
}

fn finish(
    model: &LocalModel,
    lambda: f64,
    sigma_hat: f64,
    y: Vec<f64>,
    s: Vec<f64>,
    iterations: usize,
) -> AnsCertificate {
    let model_gradient = model.gradient_at(&y);
    let u = numerics::add(&model_gradient, &s);
    let mut cert = AnsCertificate {
        x: model.x.clone(),
        lambda,
        sigma_hat,
        y,
        u,
        eps: 0.0,
        lhs: 0.0,
        rhs: 0.0,
        inner_iterations: iterations,
        model_gradient,
        h_subgradient: s,
        status: AnsStatus::Certified,
    };
    let (lhs, rhs) = cert.recheck();
    cert.lhs = lhs;
    cert.rhs = rhs;
    if rhs == 0.0 && lhs == 0.0 {
        cert.status = AnsStatus::Stationary;
    }
    cert
}

fn solve_smooth(model: &LocalModel, lambda: f64, opts: AnsOptions) -> Result<AnsCertificate> {
    let d = model.x.len();
    let zero = vec![0.0; d];
    if model.gradient.iter().all(|&g| g == 0.0) {
        return Ok(finish(model, lambda, opts.sigma_hat, model.x.clone(), zero, 0));
    }
    let system = model.hessian.clone().scaled(lambda).with_diagonal_shift(1.0);
    let rhs_vec = numerics::scale(&model.gradient, -lambda);
    let use_dense = match opts.solver {
        InnerSolver::Dense => true,
        InnerSolver::Cg => false,
        InnerSolver::Auto => d <= DENSE_LIMIT,
    };
    let (step, iterations) = if use_dense {
        let sol = cholesky_solve(&system, &rhs_vec)?;
        (sol.solution, sol.iterations)
    } else {
        cg_with_schedule(&system, &rhs_vec, opts.sigma_hat)?
    };
    let y = numerics::add(&model.x, &step);
    let cert = finish(model, lambda, opts.sigma_hat, y, zero, iterations);
    if cert.lhs <= cert.rhs {
        Ok(cert)
    } else {
        Err(Error::InnerSolveStalled {
            iterations,
            lhs: cert.lhs,
            rhs: cert.rhs,
        })
    }
}

/// CG on `(lambda H + I) s = -lambda grad`, tightening until the residual is
/// at most `sigma_hat ||s|| / 2`.
fn cg_with_schedule(system: &DenseSymMatrix, b: &[f64], sigma_hat: f64) -> Result<(Vec<f64>, usize)> {
    let apply = |v: &[f64]| system.mul_vec(v);
    let b_norm = numerics::norm(b);
    // (lambda H + I) has eigenvalues >= 1, so ||s|| <= ||b||
    let mut tol = 0.5 * sigma_hat;
    let mut total = 0;
    let mut last = None;
    for _ in 0..MAX_CG_ROUNDS {
        let sol = cg_solve(&apply, b, tol, 10 * b.len() + 50)?;
        total += sol.iterations;
        let s_norm = numerics::norm(&sol.solution);
        if sol.residual_norm <= 0.5 * sigma_hat * s_norm {
            return Ok((sol.solution, total));
        }
        tol = (0.5 * sigma_hat * s_norm / b_norm).min(tol * 0.1).max(1e-15);
        last = Some(sol);
    }
    let sol = last.expect("at least one round");
    Ok((sol.solution, total))
}

/// Accelerated proximal gradient on the `(1/lambda)`-strongly convex
/// subproblem, stopping as soon as the certificate holds.
fn solve_composite(
    reg: &Regularizer,
    model: &LocalModel,
    lambda: f64,
    sigma_hat: f64,
) -> Result<AnsCertificate> {
    let h_norm = model
        .hessian
        .frobenius_norm()
        .min(model.hessian.max_row_abs_sum());
    let inv_lambda = 1.0 / lambda;
    let lip = h_norm + inv_lambda;
    let mu = inv_lambda;
    let momentum = {
        let q = (mu / lip).sqrt();
        (1.0 - q) / (1.0 + q)
    };
    let smooth_grad = |y: &[f64]| {
        let step = numerics::sub(y, &model.x);
        let mut g = numerics::add(&model.gradient, &model.hessian.mul_vec(&step));
        numerics::axpy(inv_lambda, &step, &mut g);
        g
    };
    let mut y = model.x.clone();
    let mut y_prev = y.clone();
    let mut last = (f64::NAN, f64::NAN);
    for it in 1..=MAX_PROX_ITERS {
        let z = numerics::lincomb(1.0 + momentum, &y, -momentum, &y_prev);
        let gz = smooth_grad(&z);
        let w = numerics::lincomb(1.0, &z, -1.0 / lip, &gz);
        let y_next = reg.prox(&w, 1.0 / lip);
        let s = reg.subgrad_from_prox(&w, 1.0 / lip, &y_next);
        y_prev = std::mem::replace(&mut y, y_next);
        if !numerics::all_finite(&y) {
            return Err(Error::NonFinite("proximal iterate"));
        }
        let cert = finish(model, lambda, sigma_hat, y.clone(), s, it);
        if cert.lhs <= cert.rhs {
            return Ok(cert);
        }
        last = (cert.lhs, cert.rhs);
    }
    Err(Error::InnerSolveStalled {
        iterations: MAX_PROX_ITERS,
        lhs: last.0,
        rhs: last.1,
    })
}

/// `(y, v, eps)` stated against the true gradient, with the three bound terms.
#[derive(Debug, Clone)]
pub struct SigmaCertificate {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub eps: f64,
    pub sigma_hat: f64,
    /// `lambda delta` with the error level used in the bounds.
    pub lambda_delta: f64,
    /// `L2 lambda ||y - x|| / 2`
    pub curvature_term: f64,
    /// `||lambda v + y - x||^2 + 2 lambda eps`
    pub residual_sq: f64,
    pub step_norm: f64,
}

impl SigmaCertificate {
    /// `sigma_hat + lambda delta + L2 lambda ||y - x|| / 2`
    pub fn sigma_bound(&self) -> f64 {
        self.sigma_hat + self.lambda_delta + self.curvature_term
    }

    pub fn v_norm(&self) -> f64 {
        numerics::norm(&self.v)
    }

    /// Smallest `sigma` with `||lambda v + y - x||^2 + 2 lambda eps <= sigma^2 ||y - x||^2`.
    pub fn effective_sigma(&self) -> f64 {
        if self.step_norm == 0.0 {
            0.0
        } else {
            self.residual_sq.sqrt() / self.step_norm
        }
    }

    /// The residual inequality with an arbitrary `sigma`.
    pub fn satisfies(&self, sigma: f64) -> bool {
        within(self.residual_sq, sigma * sigma * self.step_norm * self.step_norm)
    }
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + CERT_REL_TOL * rhs.abs()
}

/// `v = grad g(y) + u - (model gradient at y)` together with the bound terms,
/// without checking them.
pub fn to_sigma_certificate_unchecked(
    problem: &CompositeProblem,
    cert: &AnsCertificate,
    delta: f64,
) -> SigmaCertificate {
    let grad_y = problem.smooth.gradient(&cert.y);
    sigma_from_gradient(problem.l2(), cert, delta, &grad_y)
}

/// Variant taking a precomputed `grad g(y)`.
pub fn sigma_from_gradient(l2: f64, cert: &AnsCertificate, delta: f64, grad_y: &[f64]) -> SigmaCertificate {
    let v = numerics::add(grad_y, &numerics::sub(&cert.u, &cert.model_gradient));
    let d = numerics::sub(&cert.y, &cert.x);
    let step_norm = numerics::norm(&d);
    let r = numerics::lincomb(cert.lambda, &v, 1.0, &d);
    SigmaCertificate {
        x: cert.x.clone(),
        lambda: cert.lambda,
        y: cert.y.clone(),
        residual_sq: numerics::norm_sq(&r) + 2.0 * cert.lambda * cert.eps,
        v,
        eps: cert.eps,
        sigma_hat: cert.sigma_hat,
        lambda_delta: cert.lambda * delta,
        curvature_term: 0.5 * l2 * cert.lambda * step_norm,
        step_norm,
    }
}

/// Checks the residual, `||v||` and `eps` bounds of a converted certificate.
pub fn check_sigma_bounds(sc: &SigmaCertificate) -> Result<()> {
    let sigma = sc.sigma_bound();
    let dn = sc.step_norm;
    if !within(sc.residual_sq, sigma * sigma * dn * dn) {
        return Err(Error::CertificateViolation(format!(
            "residual {:e} exceeds {:e}",
            sc.residual_sq,
            sigma * sigma * dn * dn
        )));
    }
    let v_bound = (1.0 + sigma) * dn / sc.lambda;
    if !within(sc.v_norm(), v_bound) {
        return Err(Error::CertificateViolation(format!(
            "||v|| = {:e} exceeds {:e}",
            sc.v_norm(),
            v_bound
        )));
    }
    let eps_bound = sc.sigma_hat * sc.sigma_hat * dn * dn / (2.0 * sc.lambda);
    if !within(sc.eps, eps_bound) {
        return Err(Error::CertificateViolation(format!(
            "eps {:e} exceeds {:e}",
            sc.eps, eps_bound
        )));
    }
    Ok(())
}

/// Converts and checks. `delta` bounds `||H(x) - hess g(x)||`; pass the
/// measured error when a dense comparison is affordable.
pub fn to_sigma_certificate(
    problem: &CompositeProblem,
    cert: &AnsCertificate,
    delta: f64,
) -> Result<SigmaCertificate> {
    let sc = to_sigma_certificate_unchecked(problem, cert, delta);
    check_sigma_bounds(&sc)?;
    Ok(sc)
}

/// `||v|| <= rho` and `eps <= eps_bar`, both closed.
pub fn early_termination_check(cert: &SigmaCertificate, rho: f64, eps_bar: f64) -> bool {
    cert.v_norm() <= rho && cert.eps <= eps_bar
}
