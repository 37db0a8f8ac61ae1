//! Adaptive step-size control and the regularized Newton fallback.

use super::config::{HeuristicConfig, Resolved};
use crate::error::{Error, Result};
use crate::numerics::{self, cg_solve, cholesky_solve, DENSE_LIMIT};
use crate::oracle::FrozenOracle;
use crate::problem::CompositeProblem;

/// Outcome of one adaptive search, as seen by the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchStats {
    /// Trial solves spent.
    pub length: usize,
    pub accepted_lambda: f64,
    /// `sigma_k` after any increases made during the search.
    pub sigma: f64,
}

/// Controller output for the next iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerUpdate {
    pub sigma: f64,
    pub lambda_warm: f64,
}

/// Easy searches grow the warm start and tighten `sigma_k`; hard ones keep
/// the accepted step size and the loosened `sigma_k`.
pub fn adaptive_update(cfg: &HeuristicConfig, stats: SearchStats) -> ControllerUpdate {
    if stats.length <= cfg.threshold {
        ControllerUpdate {
            sigma: (stats.sigma * cfg.sigma_step).max(cfg.sigma_min),
            lambda_warm: cfg.warm_factor * stats.accepted_lambda,
        }
    } else {
        ControllerUpdate {
            sigma: stats.sigma,
            lambda_warm: stats.accepted_lambda,
        }
    }
}

/// `sigma_k` after a search step that exceeded the threshold.
pub fn loosen(cfg: &HeuristicConfig, sigma: f64) -> f64 {
    (sigma / cfg.sigma_step).min(cfg.sigma_max)
}

/// Whether the accelerated phase should hand over to regularized Newton steps.
pub fn should_switch(cfg: &HeuristicConfig, accelerations: usize, f_prev: f64, f_next: f64) -> bool {
    if accelerations <= cfg.switch_after {
        return false;
    }
    let progress = if f_prev == 0.0 {
        (f_next - f_prev).abs()
    } else {
        ((f_next - f_prev) / f_prev).abs()
    };
    progress <= cfg.progress_cutoff
}

/// `ceil(c / ||grad||^2)` clamped to the resolved sample range.
pub fn sample_size_for(grad_norm: f64, cfg: &HeuristicConfig, resolved: &Resolved) -> usize {
    let raw = (cfg.sample_constant / (grad_norm * grad_norm)).ceil();
    let raw = if raw.is_nan() || raw >= resolved.sample_max as f64 {
        resolved.sample_max
    } else {
        raw as usize
    };
    raw.clamp(resolved.sample_min, resolved.sample_max)
}

/// Step `p` solving `(H + ||grad||^{3/2} I) p = -grad` with `H` from `oracle` at `y`.
pub fn gr_newton_direction(oracle: &FrozenOracle, y: &[f64], grad: &[f64]) -> Result<Vec<f64>> {
    let g_norm = numerics::norm(grad);
    if g_norm == 0.0 {
        return Ok(vec![0.0; y.len()]);
    }
    let reg = g_norm.powf(1.5);
    let system = oracle.evaluate(y).with_diagonal_shift(reg);
    let rhs = numerics::scale(grad, -1.0);
    if y.len() <= DENSE_LIMIT {
        Ok(cholesky_solve(&system, &rhs)?.solution)
    } else {
        let apply = |v: &[f64]| system.mul_vec(v);
        Ok(cg_solve(&apply, &rhs, 1e-12, 20 * y.len())?.solution)
    }
}

/// One gradient-regularized Newton step from `y` (smooth problems only).
pub fn gr_newton_step(problem: &CompositeProblem, oracle: &FrozenOracle, y: &[f64]) -> Result<Vec<f64>> {
    if !problem.reg.is_zero() {
        return Err(Error::InvalidConfig(
            "regularized Newton steps need a smooth objective".into(),
        ));
    }
    let grad = problem.smooth.gradient(y);
    let p = gr_newton_direction(oracle, y, &grad)?;
    Ok(numerics::add(y, &p))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::numerics::DenseSymMatrix;
    use crate::problem::QuadraticProblem;

    fn resolved(lo: usize, hi: usize) -> Resolved {
        Resolved {
            delta_max: 1.0,
            delta_init: 1.0 / 1024.0,
            l1: 1.0,
            l2: 1.0,
            sample_min: lo,
            sample_max: hi,
        }
    }

    #[test]
    fn easy_search_doubles_the_warm_start() {
        let cfg = HeuristicConfig::default();
        let u = adaptive_update(
            &cfg,
            SearchStats {
                length: 1,
                accepted_lambda: 3.0,
                sigma: 0.9,
            },
        );
        assert_eq!(u.lambda_warm, 6.0);
        assert!((u.sigma - 0.855).abs() < 1e-15);
        let floor = adaptive_update(
            &cfg,
            SearchStats {
                length: 2,
                accepted_lambda: 1.0,
                sigma: 0.7,
            },
        );
        assert_eq!(floor.sigma, 0.7);
    }

    #[test]
    fn hard_search_keeps_step_and_clamps_sigma() {
        let cfg = HeuristicConfig::default();
        assert_eq!(loosen(&cfg, 0.95), 0.95);
        assert!((loosen(&cfg, 0.855) - 0.9).abs() < 1e-15);
        let u = adaptive_update(
            &cfg,
            SearchStats {
                length: 3,
                accepted_lambda: 0.25,
                sigma: 0.95,
            },
        );
        assert_eq!((u.lambda_warm, u.sigma), (0.25, 0.95));
    }

    #[test]
    fn switch_after_forty_accelerations() {
        let cfg = HeuristicConfig::default();
        assert!(should_switch(&cfg, 41, 1.0, 0.95));
        assert!(!should_switch(&cfg, 40, 1.0, 0.95));
        assert!(!should_switch(&cfg, 41, 1.0, 0.5));
    }

    #[test]
    fn sample_size_clamps() {
        let cfg = HeuristicConfig::default();
        let r = resolved(10, 1000);
        assert_eq!(sample_size_for(1.0, &cfg, &r), 10);
        assert_eq!(sample_size_for(0.1, &cfg, &r), 100);
        assert_eq!(sample_size_for(1e-6, &cfg, &r), 1000);
        assert_eq!(sample_size_for(0.0, &cfg, &r), 1000);
    }

    #[test]
    fn unit_gradient_gives_unit_damping() {
        // Q = diag(1, 3), c chosen so grad f(0) = (-0.6, -0.8)
        let q = QuadraticProblem::new(DenseSymMatrix::from_diag(&[1.0, 3.0]), vec![0.6, 0.8]).unwrap();
        let p = CompositeProblem::smooth_only(Arc::new(q));
        let o = FrozenOracle::exact(p.smooth.clone());
        let y = gr_newton_step(&p, &o, &[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let q = QuadraticProblem::new(DenseSymMatrix::identity(2), vec![1.0, 2.0]).unwrap();
        let p = CompositeProblem::smooth_only(Arc::new(q));
        let o = FrozenOracle::exact(p.smooth.clone());
        assert_eq!(gr_newton_step(&p, &o, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(p.smooth.gradient(&[1.0, 2.0]), vec![0.0, 0.0]);
    }
}
