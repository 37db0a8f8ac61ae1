//! Bracketing and bisection search for a step size `lambda` whose step length
//! `lambda ||y - x(lambda)||` lands in `[alpha_minus, alpha_plus]`.

use log::warn;

use crate::ans::AnsCertificate;
use crate::error::{Error, Result};
use crate::numerics;

/// Hard cap on midpoint steps; 64 halvings exhaust double precision.
pub const MAX_BISECTION_STEPS: usize = 64;

/// The family of prox centers `x(lambda)` searched over.
pub trait Curve {
    fn point(&self, lambda: f64) -> Vec<f64>;

    /// Limit of `point(lambda)` as `lambda -> 0`.
    fn origin(&self) -> Vec<f64>;
}

/// A curve that does not move.
#[derive(Debug, Clone)]
pub struct FixedPoint(pub Vec<f64>);

impl Curve for FixedPoint {
    fn point(&self, _lambda: f64) -> Vec<f64> {
        self.0.clone()
    }

    fn origin(&self) -> Vec<f64> {
        self.0.clone()
    }
}

/// Produces approximate Newton solutions at trial points.
pub trait TrialSolver {
    fn solve(&mut self, x: &[f64], lambda: f64) -> Result<AnsCertificate>;

    /// Whether a trial already certifies an approximate minimizer.
    fn early_exit(&mut self, _cert: &AnsCertificate) -> bool {
        false
    }
}

impl<F> TrialSolver for F
where
    F: FnMut(&[f64], f64) -> Result<AnsCertificate>,
{
    fn solve(&mut self, x: &[f64], lambda: f64) -> Result<AnsCertificate> {
        self(x, lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepBounds {
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

impl StepBounds {
    /// `[2 sigma_l / L2, 2 sigma_u / L2]`
    pub fn from_sigmas(sigma_l: f64, sigma_u: f64, l2: f64) -> Self {
        StepBounds {
            alpha_minus: 2.0 * sigma_l / l2,
            alpha_plus: 2.0 * sigma_u / l2,
        }
    }

    pub fn classify(&self, step_length: f64) -> Side {
        if step_length < self.alpha_minus {
            Side::Below
        } else if step_length > self.alpha_plus {
            Side::Above
        } else {
            Side::Inside
        }
    }

    /// `alpha_minus (1 + sigma_hat) < alpha_plus (1 - sigma_hat)`
    pub fn separated(&self, sigma_hat: f64) -> bool {
        self.alpha_minus * (1.0 + sigma_hat) < self.alpha_plus * (1.0 - sigma_hat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Inside,
    Above,
}

/// Constants entering the left bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketParams {
    pub sigma_hat: f64,
    pub c: f64,
    pub l2: f64,
}

/// `lambda_plus ||x_plus - x(0)||` (curve constant `M1 = 1`).
pub fn gamma0(lambda_plus: f64, x_plus: &[f64], origin: &[f64]) -> f64 {
    lambda_plus * numerics::dist(x_plus, origin)
}

/// Left bracketing point from a certified right bracket with step norm
/// `||y_plus - x_plus||`.
pub fn left_bracket(
    lambda_plus: f64,
    step_norm_plus: f64,
    gamma0: f64,
    params: BracketParams,
    alpha_minus: f64,
) -> Result<f64> {
    let BracketParams { sigma_hat, c, l2 } = params;
    let denom = (1.0 + sigma_hat) * (1.0 + 2.0 * l2 * gamma0) * lambda_plus * step_norm_plus
        + (1.0 + 2.0 * c) * gamma0
        + l2 * gamma0 * gamma0;
    let numer = (1.0 - sigma_hat) * alpha_minus * lambda_plus;
    let value = numer / denom;
    if !(denom > 0.0) || !value.is_finite() || !(value > 0.0) {
        return Err(Error::DegenerateBracket(format!(
            "left bracket {numer:e} / {denom:e}"
        )));
    }
    Ok(value)
}

/// Step size above which a solution with step length at most `alpha` must
/// already satisfy the early-termination tolerances.
pub fn lambda_floor(alpha: f64, v_bar: f64, eps_bar: f64, sigma_hat: f64, c: f64, l2: f64) -> f64 {
    let first = (alpha / v_bar * (1.0 + sigma_hat + c + 0.5 * l2 * alpha)).sqrt();
    let second = (sigma_hat * sigma_hat * alpha * alpha / (2.0 * eps_bar)).cbrt();
    first.max(second)
}

/// One trial of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketStep {
    pub lo: f64,
    pub hi: f64,
    pub lambda: f64,
    pub step_length: f64,
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct BisectionResult {
    pub lambda: f64,
    /// Prox center `x(lambda)` of the accepted trial.
    pub x: Vec<f64>,
    pub cert: AnsCertificate,
    pub step_length: f64,
    /// Midpoint trials, excluding the bracketing solve.
    pub bisection_count: usize,
    /// All solves made by the search, including the bracketing ones.
    pub solves: usize,
    pub lambda_minus0: f64,
    pub gamma0: f64,
    /// Extra halvings needed because the left bracket overshot.
    pub fallback_halvings: usize,
    pub early_exit: bool,
    pub history: Vec<BracketStep>,
}

fn step_length(x: &[f64], cert: &AnsCertificate, lambda: f64) -> f64 {
    lambda * numerics::dist(&cert.y, x)
}

/// Bracketing stage followed by midpoint bisection on `lambda`.
///
/// `cert_plus` is the solution at `lambda_plus` whose step length exceeds
/// `alpha_plus`. Every trial uses `lambda <= lambda_plus`.
pub fn bisect(
    curve: &dyn Curve,
    solver: &mut dyn TrialSolver,
    lambda_plus: f64,
    cert_plus: &AnsCertificate,
    bounds: StepBounds,
    params: BracketParams,
    max_steps: usize,
) -> Result<BisectionResult> {
    if !bounds.separated(params.sigma_hat) {
        return Err(Error::InvalidBracket(format!(
            "bounds [{:e}, {:e}] too close for sigma_hat {}",
            bounds.alpha_minus, bounds.alpha_plus, params.sigma_hat
        )));
    }
    let x_plus = cert_plus.x.clone();
    let plus_length = step_length(&x_plus, cert_plus, lambda_plus);
    if bounds.classify(plus_length) != Side::Above {
        return Err(Error::InvalidBracket(format!(
            "right bracket step length {plus_length:e} not above {:e}",
            bounds.alpha_plus
        )));
    }
    let g0 = gamma0(lambda_plus, &x_plus, &curve.origin());
    let lambda_minus0 = left_bracket(
        lambda_plus,
        numerics::dist(&cert_plus.y, &x_plus),
        g0,
        params,
        bounds.alpha_minus,
    )?;
    let mut history = Vec::new();
    let mut solves = 0;
    let mut trial = |lambda: f64, lo: f64, hi: f64, history: &mut Vec<BracketStep>| {
        let x = curve.point(lambda);
        let cert = solver.solve(&x, lambda)?;
        let len = step_length(&x, &cert, lambda);
        let side = bounds.classify(len);
        let exit = solver.early_exit(&cert);
        history.push(BracketStep {
            lo,
            hi,
            lambda,
            step_length: len,
            side,
        });
        Ok::<_, Error>((x, cert, len, side, exit))
    };

    let mut lo = lambda_minus0;
    let hi0 = lambda_plus;
    let mut fallback_halvings = 0;
    let (mut x, mut cert, mut len, mut side, mut exit) = trial(lo, lo, hi0, &mut history)?;
    solves += 1;
    while side == Side::Above && !exit {
        if fallback_halvings >= max_steps {
            return Err(Error::BracketExhausted {
                steps: fallback_halvings,
                lo,
                hi: hi0,
            });
        }
        warn!(
            "left bracket {lo:e} overshoots (step length {len:e} > {:e}); halving",
            bounds.alpha_plus
        );
        fallback_halvings += 1;
        lo *= 0.5;
        (x, cert, len, side, exit) = trial(lo, lo, hi0, &mut history)?;
        solves += 1;
    }
    let result = |x, cert, len, count, solves, exit, history| BisectionResult {
        lambda: 0.0,
        x,
        cert,
        step_length: len,
        bisection_count: count,
        solves,
        lambda_minus0,
        gamma0: g0,
        fallback_halvings,
        early_exit: exit,
        history,
    };
    if exit || side == Side::Inside {
        let mut r = result(x, cert, len, 0, solves, exit, history);
        r.lambda = lo;
        return Ok(r);
    }

    let mut hi = hi0;
    for count in 1..=max_steps {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::BracketExhausted { steps: count - 1, lo, hi });
        }
        let (x, cert, len, side, exit) = trial(mid, lo, hi, &mut history)?;
        solves += 1;
        if exit || side == Side::Inside {
            let mut r = result(x, cert, len, count, solves, exit, history);
            r.lambda = mid;
            return Ok(r);
        }
        match side {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
            Side::Inside => unreachable!(),
        }
    }
    Err(Error::BracketExhausted {
        steps: max_steps,
        lo,
        hi,
    })
}

/// Inputs to [`bisection_count_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionBoundInputs {
    pub sigma_hat: f64,
    pub c: f64,
    pub l2: f64,
    /// Lipschitz constant of `h`.
    pub lh: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub lambda_plus: f64,
    pub gamma0: f64,
    /// Distance from the right-bracket center to the solution set.
    pub dist_to_solution: f64,
    /// Curve constant `(2 / sqrt(1 - sigma~^2) + 1) d0`.
    pub m0: f64,
}

/// Worst-case number of midpoint steps (base-2 logarithm).
pub fn bisection_count_bound(p: BisectionBoundInputs) -> f64 {
    let s = p.sigma_hat;
    let lp = p.lambda_plus;
    let d = p.dist_to_solution;
    let denom = (1.0 - p.c) * (1.0 - s) * (1.0 - s) * p.alpha_minus;
    let c0 = (1.0 + s) * (1.0 + 2.0 * p.l2 * p.gamma0)
        * (2.0 * p.lh * lp * lp + lp * d + lp * lp * p.l2 * d * d)
        / denom
        + ((1.0 + 2.0 * p.c) * p.gamma0 + p.l2 * p.gamma0 * p.gamma0) * (1.0 - p.c) * (1.0 - s) / denom;
    let ratio = (1.0 + 2.0 * p.c
        + p.l2 * p.m0 * lp
        + 2.0 * (p.l2 + 1.0 / (p.m0 * lp)) * (1.0 + s) * p.alpha_minus)
        / ((1.0 - s) * p.alpha_plus - (1.0 + s) * p.alpha_minus);
    2.0 + (c0 * c0 * p.m0 * lp * ratio).log2()
}
