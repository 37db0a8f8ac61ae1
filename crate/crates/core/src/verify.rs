//! Exact resolvents on small dense problems and numerical checks of the
//! step-length inequalities the line search relies on.
//!
//! `phi(lambda, x) = lambda ||y - x||` where `y = (I + lambda B)^{-1}(x)` and
//! `B` is either the subdifferential of `f` or its linearization
//! `y -> grad g(c) + P (y - c) + dh(y)` around a center `c` with
//! `P = hess g(c) + E`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::ans::{solve_ans, to_sigma_certificate_unchecked, AnsOptions, SigmaCertificate};
use crate::error::{Error, Result};
use crate::numerics::{self, cholesky_solve, spectral_norm_upper, DenseSymMatrix};
use crate::oracle::FrozenOracle;
use crate::problem::{CompositeProblem, Regularizer};
use crate::synth;

/// Largest dimension accepted by [`ResolventOracle`].
pub const MAX_VERIFY_DIM: usize = 50;

/// Relative slack of every check.
pub const CHECK_REL_TOL: f64 = 1e-9;

const RESOLVENT_TOL: f64 = 1e-12;
const MAX_NEWTON_ITERS: usize = 100;
const MAX_PROX_ITERS: usize = 200_000;

#[derive(Debug, Clone)]
pub enum Operator {
    /// `grad g + dh`
    Exact,
    /// `grad g(c) + (hess g(c) + E)(y - c) + dh(y)`
    Linearized {
        center: Vec<f64>,
        gradient: Vec<f64>,
        matrix: DenseSymMatrix,
        perturbation_norm: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ResolventOracle {
    problem: CompositeProblem,
    operator: Operator,
    tol: f64,
}

impl ResolventOracle {
    pub fn exact(problem: &CompositeProblem) -> Result<Self> {
        check_dim(problem.dim())?;
        Ok(ResolventOracle {
            problem: problem.clone(),
            operator: Operator::Exact,
            tol: RESOLVENT_TOL,
        })
    }

    /// Linearization at `center`; `perturbation` is added to the Hessian.
    pub fn linearized(
        problem: &CompositeProblem,
        center: &[f64],
        perturbation: Option<&DenseSymMatrix>,
    ) -> Result<Self> {
        check_dim(problem.dim())?;
        if center.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: center.len(),
            });
        }
        let hess = problem.smooth.hessian(center);
        let (matrix, perturbation_norm) = match perturbation {
            Some(e) => (hess.add_scaled(1.0, e), spectral_norm_upper(e, 500)),
            None => (hess, 0.0),
        };
        Ok(ResolventOracle {
            operator: Operator::Linearized {
                center: center.to_vec(),
                gradient: problem.smooth.gradient(center),
                matrix,
                perturbation_norm,
            },
            problem: problem.clone(),
            tol: RESOLVENT_TOL,
        })
    }

    pub fn problem(&self) -> &CompositeProblem {
        &self.problem
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    pub fn center(&self) -> Option<&[f64]> {
        match &self.operator {
            Operator::Linearized { center, .. } => Some(center),
            Operator::Exact => None,
        }
    }

    /// Upper bound on `||E||`; zero for the exact operator.
    pub fn perturbation_norm(&self) -> f64 {
        match &self.operator {
            Operator::Linearized { perturbation_norm, .. } => *perturbation_norm,
            Operator::Exact => 0.0,
        }
    }

    /// Smooth part of the operator at `y`.
    fn smooth_value(&self, y: &[f64]) -> Vec<f64> {
        match &self.operator {
            Operator::Exact => self.problem.smooth.gradient(y),
            Operator::Linearized {
                center,
                gradient,
                matrix,
                ..
            } => numerics::add(gradient, &matrix.mul_vec(&numerics::sub(y, center))),
        }
    }

    fn smooth_lipschitz(&self) -> f64 {
        match &self.operator {
            Operator::Exact => self.problem.l1(),
            Operator::Linearized { matrix, .. } => matrix.frobenius_norm().min(matrix.max_row_abs_sum()),
        }
    }

    /// `y = (I + lambda B)^{-1}(x)`.
    pub fn resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be positive, got {lambda}")));
        }
        if x.len() != self.problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.problem.dim(),
                got: x.len(),
            });
        }
        match (&self.problem.reg, &self.operator) {
            (Regularizer::Zero, Operator::Linearized { center, gradient, matrix, .. }) => {
                // (I + lambda P) y = x - lambda (grad - P c)
                let pc = matrix.mul_vec(center);
                let rhs = numerics::lincomb(1.0, x, -lambda, &numerics::sub(gradient, &pc));
                let system = matrix.clone().scaled(lambda).with_diagonal_shift(1.0);
                Ok(cholesky_solve(&system, &rhs)?.solution)
            }
            (Regularizer::Zero, Operator::Exact) => self.newton_resolvent(lambda, x),
            _ => self.prox_resolvent(lambda, x),
        }
    }

    fn residual(&self, lambda: f64, x: &[f64], y: &[f64], v: &[f64]) -> f64 {
        let r = numerics::lincomb(lambda, v, 1.0, &numerics::sub(y, x));
        numerics::norm(&r)
    }

    fn scale(x: &[f64]) -> f64 {
        1.0 + numerics::norm(x)
    }

    fn newton_resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        let g = &self.problem.smooth;
        let merit = |y: &[f64]| g.value(y) + numerics::dist(y, x).powi(2) / (2.0 * lambda);
        let mut y = x.to_vec();
        let mut best = f64::INFINITY;
        for it in 0..MAX_NEWTON_ITERS {
            let grad = g.gradient(&y);
            let res = self.residual(lambda, x, &y, &grad);
            if res <= 1e-3 * self.tol * Self::scale(x) || (it > 0 && res >= best) {
                best = best.min(res);
                break;
            }
            best = res;
            let r = numerics::lincomb(lambda, &grad, 1.0, &numerics::sub(&y, x));
            let system = g.hessian(&y).scaled(lambda).with_diagonal_shift(1.0);
            let step = cholesky_solve(&system, &r)?.solution;
            let m0 = merit(&y);
            let full = numerics::sub(&y, &step);
            if self.residual(lambda, x, &full, &g.gradient(&full)) < res {
                // near the solution the merit is flat at rounding level
                y = full;
                continue;
            }
            let mut t = 0.5;
            let mut next = numerics::lincomb(1.0, &y, -t, &step);
            while merit(&next) > m0 && t > 1e-12 {
                t *= 0.5;
                next = numerics::lincomb(1.0, &y, -t, &step);
            }
            if t <= 1e-12 {
                break;
            }
            y = next;
        }
        if best > self.tol * Self::scale(x) {
            return Err(Error::InnerSolveStalled {
                iterations: MAX_NEWTON_ITERS,
                lhs: best,
                rhs: self.tol * Self::scale(x),
            });
        }
        Ok(y)
    }

    /// Accelerated proximal gradient on the strongly convex resolvent problem.
    fn prox_resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>> {
        let reg = &self.problem.reg;
        let inv = 1.0 / lambda;
        let lip = self.smooth_lipschitz() + inv;
        let q = (inv / lip).sqrt();
        let momentum = (1.0 - q) / (1.0 + q);
        let grad_s = |y: &[f64]| {
            let mut g = self.smooth_value(y);
            numerics::axpy(inv, &numerics::sub(y, x), &mut g);
            g
        };
        let target = self.tol * Self::scale(x);
        let mut y = x.to_vec();
        let mut y_prev = y.clone();
        let mut best = (f64::INFINITY, y.clone());
        for _ in 0..MAX_PROX_ITERS {
            let z = numerics::lincomb(1.0 + momentum, &y, -momentum, &y_prev);
            let w = numerics::lincomb(1.0, &z, -1.0 / lip, &grad_s(&z));
            let next = reg.prox(&w, 1.0 / lip);
            let s = reg.subgrad_from_prox(&w, 1.0 / lip, &next);
            let v = numerics::add(&self.smooth_value(&next), &s);
            let res = self.residual(lambda, x, &next, &v);
            y_prev = std::mem::replace(&mut y, next);
            if res < best.0 {
                best = (res, y.clone());
            }
            if res <= 1e-2 * target {
                break;
            }
        }
        if best.0 > target {
            return Err(Error::InnerSolveStalled {
                iterations: MAX_PROX_ITERS,
                lhs: best.0,
                rhs: target,
            });
        }
        Ok(best.1)
    }

    /// `lambda ||y - x||` at the resolvent point.
    pub fn phi(&self, lambda: f64, x: &[f64]) -> Result<f64> {
        let y = self.resolvent(lambda, x)?;
        Ok(lambda * numerics::dist(&y, x))
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d > MAX_VERIFY_DIM {
        Err(Error::DenseLimitExceeded {
            order: d,
            limit: MAX_VERIFY_DIM,
        })
    } else {
        Ok(())
    }
}

/// `lambda ||(I + lambda B)^{-1}(x) - x||`
pub fn phi(oracle: &ResolventOracle, lambda: f64, x: &[f64]) -> Result<f64> {
    oracle.phi(lambda, x)
}

/// One line of a check report: `name status margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// Smallest `rhs - lhs` over the inequalities checked.
    pub margin: f64,
    pub detail: String,
}

impl CheckReport {
    pub fn ensure(&self) -> Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(Error::AssertionFailed(format!("{}: {}", self.name, self.detail)))
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} status={} margin={:e}",
            self.name,
            if self.passed { "pass" } else { "fail" },
            self.margin
        )?;
        if !self.detail.is_empty() {
            write!(f, " detail=\"{}\"", self.detail)?;
        }
        Ok(())
    }
}

/// Evaluates `lhs <= rhs` for each `(label, lhs, rhs)` with relative slack.
fn compare(name: &'static str, sides: &[(&str, f64, f64)]) -> CheckReport {
    let mut margin = f64::INFINITY;
    let mut failed = Vec::new();
    for &(label, lhs, rhs) in sides {
        let slack = CHECK_REL_TOL * lhs.abs().max(rhs.abs()) + 1e-14;
        margin = margin.min(rhs - lhs);
        if !(lhs <= rhs + slack) {
            failed.push(format!("{label}: {lhs:e} > {rhs:e}"));
        }
    }
    CheckReport {
        name,
        passed: failed.is_empty(),
        margin,
        detail: failed.join("; "),
    }
}

/// `(lambda/lt) phi(lt) <= phi(lambda) <= (lambda/lt)^2 phi(lt)` for `lt <= lambda`.
pub fn check_phi_monotonicity(
    oracle: &ResolventOracle,
    x: &[f64],
    lambda_small: f64,
    lambda: f64,
) -> Result<CheckReport> {
    let p_small = oracle.phi(lambda_small, x)?;
    let p = oracle.phi(lambda, x)?;
    let ratio = lambda / lambda_small;
    Ok(compare(
        "phi_monotonicity",
        &[("lower", ratio * p_small, p), ("upper", p, ratio * ratio * p_small)],
    ))
}

/// `(1 - s) lambda ||y - x|| <= phi <= (1 + s) lambda ||y - x||` with `s` the
/// certificate's claimed tolerance.
pub fn check_phi_sandwich(oracle: &ResolventOracle, cert: &SigmaCertificate) -> Result<CheckReport> {
    let s = cert.effective_sigma();
    let len = cert.lambda * numerics::dist(&cert.y, &cert.x);
    let p = oracle.phi(cert.lambda, &cert.x)?;
    Ok(compare(
        "phi_sandwich",
        &[("lower", (1.0 - s) * len, p), ("upper", p, (1.0 + s) * len)],
    ))
}

/// Change of `phi` between linearizations at two centers sharing the same
/// perturbation, bounded with `c >= lambda delta`.
pub fn check_phi_shift(
    at_x: &ResolventOracle,
    at_x_tilde: &ResolventOracle,
    lambda: f64,
    c: f64,
) -> Result<CheckReport> {
    let (Some(x), Some(xt)) = (at_x.center(), at_x_tilde.center()) else {
        return Err(Error::InvalidConfig("phi shift needs linearized operators".into()));
    };
    let l2 = at_x.problem().l2();
    let p = at_x.phi(lambda, x)?;
    let pt = at_x_tilde.phi(lambda, xt)?;
    let gap = numerics::dist(x, xt);
    let eta = p.min(pt);
    let rhs = (1.0 + 2.0 * c) * lambda * gap + l2 * lambda * lambda * gap * gap + 2.0 * l2 * lambda * gap * eta;
    Ok(compare("phi_shift", &[("shift", (p - pt).abs(), rhs)]))
}

/// `phi <= (2 L' lambda^2 + lambda r + lambda^2 L2 r^2) / (1 - c)` with
/// `r = ||x - x_star||`, for the linearization at `x`.
pub fn check_phi_distance_bound(
    at_x: &ResolventOracle,
    lambda: f64,
    x_star: &[f64],
    c: f64,
) -> Result<CheckReport> {
    let Some(x) = at_x.center() else {
        return Err(Error::InvalidConfig("distance bound needs a linearized operator".into()));
    };
    let problem = at_x.problem();
    let r = numerics::dist(x, x_star);
    let p = at_x.phi(lambda, x)?;
    let rhs = (2.0 * problem.lh() * lambda * lambda + lambda * r + lambda * lambda * problem.l2() * r * r) / (1.0 - c);
    Ok(compare("phi_distance_bound", &[("distance", p, rhs)]))
}

/// Minimizer of `f` to stationarity `tol` (Newton for smooth problems,
/// accelerated proximal gradient otherwise).
pub fn reference_minimizer(problem: &CompositeProblem, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
    if problem.reg.is_zero() {
        newton_minimize(problem, x0, tol)
    } else {
        prox_minimize(problem, x0, tol)
    }
}

fn newton_minimize(problem: &CompositeProblem, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
    let g = &problem.smooth;
    let mut x = x0.to_vec();
    let mut best = f64::INFINITY;
    for _ in 0..500 {
        let (fx, grad) = g.value_gradient(&x);
        let gn = numerics::norm(&grad);
        best = best.min(gn);
        if gn <= tol {
            return Ok(x);
        }
        let step = cholesky_solve(&g.hessian(&x), &grad)?.solution;
        let full = numerics::sub(&x, &step);
        if numerics::norm(&g.gradient(&full)) < gn {
            // also covers the regime where f is flat at rounding level
            x = full;
            continue;
        }
        let slope = numerics::dot(&grad, &step);
        let mut t = 0.5;
        let mut next = numerics::lincomb(1.0, &x, -t, &step);
        while g.value(&next) > fx - 1e-4 * t * slope && t > 1e-16 {
            t *= 0.5;
            next = numerics::lincomb(1.0, &x, -t, &step);
        }
        if t <= 1e-16 {
            break;
        }
        x = next;
    }
    let gn = numerics::norm(&g.gradient(&x));
    if gn <= tol {
        Ok(x)
    } else {
        Err(Error::InnerSolveStalled {
            iterations: 500,
            lhs: gn.min(best),
            rhs: tol,
        })
    }
}

fn prox_minimize(problem: &CompositeProblem, x0: &[f64], tol: f64) -> Result<Vec<f64>> {
    let g = &problem.smooth;
    let lip = problem.l1();
    let stationarity = |x: &[f64]| {
        let gx = g.gradient(x);
        numerics::dist(x, &problem.reg.prox(&numerics::sub(x, &gx), 1.0))
    };
    let mut x = x0.to_vec();
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut best = (stationarity(&x), x.clone());
    for _ in 0..MAX_PROX_ITERS {
        let w = numerics::lincomb(1.0, &z, -1.0 / lip, &g.gradient(&z));
        let next = problem.reg.prox(&w, 1.0 / lip);
        // gradient-based restart
        if numerics::dot(&numerics::sub(&z, &next), &numerics::sub(&next, &x)) > 0.0 {
            t = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = numerics::lincomb(1.0 + (t - 1.0) / t_next, &next, -(t - 1.0) / t_next, &x);
        x = next;
        t = t_next;
        let r = stationarity(&x);
        if r < best.0 {
            best = (r, x.clone());
        }
        if r <= tol {
            return Ok(x);
        }
    }
    Err(Error::InnerSolveStalled {
        iterations: MAX_PROX_ITERS,
        lhs: best.0,
        rhs: tol,
    })
}

/// The four inequality batteries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Battery {
    Monotonicity,
    Sandwich,
    Shift,
    DistanceBound,
}

impl Battery {
    pub const ALL: [Battery; 4] = [
        Battery::Monotonicity,
        Battery::Sandwich,
        Battery::Shift,
        Battery::DistanceBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Battery::Monotonicity => "phi_monotonicity",
            Battery::Sandwich => "phi_sandwich",
            Battery::Shift => "phi_shift",
            Battery::DistanceBound => "phi_distance_bound",
        }
    }
}

/// Aggregate over a battery.
#[derive(Debug, Clone, PartialEq)]
pub struct BatterySummary {
    pub battery: Battery,
    pub instances: usize,
    pub failures: usize,
    pub worst_margin: f64,
    pub first_failure: Option<String>,
}

impl BatterySummary {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for BatterySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "check={} status={} margin={:e} instances={} failures={}",
            self.battery.name(),
            if self.passed() { "pass" } else { "fail" },
            self.worst_margin,
            self.instances,
            self.failures
        )
    }
}

/// A seeded random problem with `d <= 20`.
pub struct Instance {
    pub problem: CompositeProblem,
    pub rng: ChaCha20Rng,
}

fn normal_vec(rng: &mut ChaCha20Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

fn log_uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Instance `index` of the stream keyed by `seed`: quadratic, logistic, or
/// quadratic with an l1 term, in rotation.
pub fn instance(seed: u64, index: u64) -> Result<Instance> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let d = rng.random_range(2..=20);
    let sub = rng.random::<u64>();
    let problem = match index % 3 {
        0 => {
            let mu = log_uniform(&mut rng, 0.05, 1.0);
            CompositeProblem::smooth_only(std::sync::Arc::new(synth::quadratic_instance(d, mu, sub)?))
        }
        1 => {
            let n = rng.random_range(2 * d..=4 * d);
            let lr = synth::logistic_instance(n, d, 1e-3, 2.0, sub)?;
            CompositeProblem::smooth_only(std::sync::Arc::new(lr))
        }
        _ => {
            let mu = log_uniform(&mut rng, 0.1, 1.0);
            let weight = log_uniform(&mut rng, 0.01, 0.5);
            CompositeProblem::new(
                std::sync::Arc::new(synth::quadratic_instance(d, mu, sub)?),
                Regularizer::L1 { weight },
            )
        }
    };
    Ok(Instance { problem, rng })
}

/// Random positive semidefinite `E` with `||E|| <= norm`.
pub fn psd_perturbation(rng: &mut ChaCha20Rng, d: usize, norm: f64) -> DenseSymMatrix {
    let k = rng.random_range(1..=d);
    let rows: Vec<Vec<f64>> = (0..k).map(|_| normal_vec(rng, d, 1.0)).collect();
    let e = DenseSymMatrix::from_fn(d, |i, j| rows.iter().map(|r| r[i] * r[j]).sum());
    let scale = spectral_norm_upper(&e, 500);
    e.scaled(norm / scale)
}

fn run_one(battery: Battery, seed: u64, index: u64) -> Result<CheckReport> {
    let Instance { problem, mut rng } = instance(seed, index)?;
    let d = problem.dim();
    let x = normal_vec(&mut rng, d, 2.0);
    let lambda = log_uniform(&mut rng, 1e-2, 1e2);
    match battery {
        Battery::Monotonicity => {
            let lambda_small = lambda / (1.0 + 10.0 * rng.random::<f64>());
            let oracle = if rng.random::<bool>() {
                ResolventOracle::exact(&problem)?
            } else {
                let center = normal_vec(&mut rng, d, 2.0);
                let norm = 0.1 * rng.random::<f64>();
                let e = psd_perturbation(&mut rng, d, norm);
                ResolventOracle::linearized(&problem, &center, Some(&e))?
            };
            check_phi_monotonicity(&oracle, &x, lambda_small, lambda)
        }
        Battery::Sandwich => {
            let delta = 0.1 / lambda * rng.random::<f64>();
            let e = psd_perturbation(&mut rng, d, delta);
            let sigma_hat = 0.05 + 0.45 * rng.random::<f64>();
            let oracle = FrozenOracle::perturbed(problem.smooth.clone(), e)?;
            let cert = solve_ans(&problem, &oracle, &x, lambda, AnsOptions::new(sigma_hat))?;
            let sc = to_sigma_certificate_unchecked(&problem, &cert, oracle.declared_error());
            check_phi_sandwich(&ResolventOracle::exact(&problem)?, &sc)
        }
        Battery::Shift => {
            let c = 0.5 * rng.random::<f64>();
            let e = psd_perturbation(&mut rng, d, c / lambda);
            let gap = log_uniform(&mut rng, 1e-3, 1.0);
            let x_tilde = numerics::add(&x, &normal_vec(&mut rng, d, gap / (d as f64).sqrt()));
            let at_x = ResolventOracle::linearized(&problem, &x, Some(&e))?;
            let at_xt = ResolventOracle::linearized(&problem, &x_tilde, Some(&e))?;
            check_phi_shift(&at_x, &at_xt, lambda, lambda * at_x.perturbation_norm())
        }
        Battery::DistanceBound => {
            let c = 0.5 * rng.random::<f64>();
            let e = psd_perturbation(&mut rng, d, c / lambda);
            let x_star = reference_minimizer(&problem, &vec![0.0; d], 1e-9)?;
            let at_x = ResolventOracle::linearized(&problem, &x, Some(&e))?;
            check_phi_distance_bound(&at_x, lambda, &x_star, lambda * at_x.perturbation_norm())
        }
    }
}

/// Runs `instances` seeded cases of `battery` in parallel. Solver errors
/// count as failures.
pub fn run_battery(battery: Battery, instances: usize, seed: u64) -> BatterySummary {
    let results: Vec<Result<CheckReport>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| run_one(battery, seed, i))
        .collect();
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut first_failure = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(rep) => {
                worst = worst.min(rep.margin);
                if !rep.passed {
                    failures += 1;
                    first_failure.get_or_insert_with(|| format!("instance {i}: {}", rep.detail));
                }
            }
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert_with(|| format!("instance {i}: {e}"));
            }
        }
    }
    BatterySummary {
        battery,
        instances,
        failures,
        worst_margin: worst,
        first_failure,
    }
}

/// A case violating the battery's hypotheses, expected to fail.
pub fn negative_control(battery: Battery, seed: u64) -> Result<CheckReport> {
    // index 1 is a smooth logistic instance
    let Instance { problem, mut rng } = instance(seed, 1)?;
    let d = problem.dim();
    let x = normal_vec(&mut rng, d, 2.0);
    let lambda = 1.0;
    match battery {
        Battery::Monotonicity => {
            // step sizes in the wrong order
            let oracle = ResolventOracle::exact(&problem)?;
            check_phi_monotonicity(&oracle, &x, 2.0 * lambda, lambda)
        }
        Battery::Sandwich => {
            // solution moved after the certificate was issued
            let oracle = FrozenOracle::exact(problem.smooth.clone());
            let cert = solve_ans(&problem, &oracle, &x, lambda, AnsOptions::new(0.1))?;
            let mut sc = to_sigma_certificate_unchecked(&problem, &cert, 0.0);
            sc.y = numerics::lincomb(3.0, &sc.y, -2.0, &sc.x);
            check_phi_sandwich(&ResolventOracle::exact(&problem)?, &sc)
        }
        Battery::Shift => {
            // same center, but the two operators use different perturbations
            let small = psd_perturbation(&mut rng, d, 1e-3);
            let large = DenseSymMatrix::scaled_identity(d, 10.0);
            let a = ResolventOracle::linearized(&problem, &x, Some(&small))?;
            let b = ResolventOracle::linearized(&problem, &x, Some(&large))?;
            check_phi_shift(&a, &b, lambda, lambda * a.perturbation_norm())
        }
        Battery::DistanceBound => {
            // the reference point is not a minimizer
            let at_x = ResolventOracle::linearized(&problem, &x, None)?;
            check_phi_distance_bound(&at_x, lambda, &x, 0.0)
        }
    }
}
