//! The accelerated outer loop and the run harness around it.
//!
//! Each iteration picks a step size `lambda`, solves the proximal Newton
//! subproblem at the interpolated point `x~(lambda)` and applies the
//! extragradient update `x <- x - a v`.

mod config;
mod heuristic;

use std::sync::Arc;
use std::time::Instant;

use log::{debug, warn};
use serde::Serialize;

pub use config::{HeuristicConfig, IanpeConfig, Mode, Resolved};
pub use heuristic::{
    adaptive_update, gr_newton_direction, gr_newton_step, loosen, sample_size_for, should_switch,
    ControllerUpdate, SearchStats,
};

use crate::ans::{
    check_sigma_bounds, early_termination_check, sigma_from_gradient, solve_ans_with_model, AnsCertificate,
    AnsOptions, LocalModel, SigmaCertificate,
};
use crate::error::{Error, Result};
use crate::io::TraceRecord;
use crate::linesearch::{bisect, lambda_floor, BracketParams, Curve, Side, StepBounds, TrialSolver};
use crate::numerics;
use crate::oracle::{freeze_sketch, freeze_subsample, freeze_subsample_sized, FrozenOracle, OracleKind};
use crate::problem::{CompositeProblem, SmoothFunction};

/// `a` solving `a^2 = lambda (A + a)`.
pub fn accel_coefficient(lambda: f64, a_sum: f64) -> f64 {
    0.5 * (lambda + (lambda * lambda + 4.0 * lambda * a_sum).sqrt())
}

/// `A/(A+a) y + a/(A+a) x` with `a = accel_coefficient(lambda, A)`.
pub fn tilde_x(a_sum: f64, x: &[f64], y: &[f64], lambda: f64) -> Vec<f64> {
    let a = accel_coefficient(lambda, a_sum);
    let total = a_sum + a;
    numerics::lincomb(a_sum / total, y, a / total, x)
}

/// `||grad g(y)||` for smooth problems, the proximal gradient residual
/// `||y - prox_h(y - grad g(y))||` otherwise.
pub fn stationarity(problem: &CompositeProblem, y: &[f64], grad: &[f64]) -> f64 {
    if problem.reg.is_zero() {
        numerics::norm(grad)
    } else {
        let z = numerics::sub(y, grad);
        numerics::dist(y, &problem.reg.prox(&z, 1.0))
    }
}

/// Upper bound on shrink steps of the while loop, `log_gamma(delta_max Lambda / C)`
/// with `Lambda` the step-size floor at `2 sigma_l / L2`; `None` when `L2 = 0`.
pub fn while_loop_bound(cfg: &IanpeConfig, resolved: &Resolved) -> Option<f64> {
    if !(resolved.l2 > 0.0) {
        return None;
    }
    let alpha = 2.0 * cfg.sigma_l / resolved.l2;
    let floor = lambda_floor(alpha, cfg.rho_bar, cfg.eps_bar, cfg.sigma_hat, cfg.c, resolved.l2);
    Some((resolved.delta_max * floor / cfg.c).ln() / cfg.gamma.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Accelerated,
    GrNewton,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Accelerated => "accelerated",
            Phase::GrNewton => "gr_newton",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Counters {
    /// Subproblem solves.
    pub oracle_calls: u64,
    /// Full-batch value or gradient evaluations.
    pub full_evals: u64,
    /// Component Hessian evaluations.
    pub component_hessians: u64,
    pub bisection_total: usize,
    pub while_total: usize,
}

impl Counters {
    pub fn data_passes(&self, components: usize) -> f64 {
        self.full_evals as f64 + self.component_hessians as f64 / components as f64
    }
}

#[derive(Debug, Clone)]
pub struct AcceleratorState {
    /// Completed outer iterations.
    pub k: usize,
    pub a_sum: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f_y: f64,
    pub grad_y: Vec<f64>,
    /// Stationarity measure at `y`.
    pub measure: f64,
    /// Error level of the previous iteration.
    pub delta: f64,
    /// Last accepted step size.
    pub lambda: f64,
    pub lambda_warm: f64,
    pub sigma_k: f64,
    pub phase: Phase,
    pub accelerations: usize,
    pub sketch_dim: usize,
    pub counters: Counters,
    components: usize,
}

impl AcceleratorState {
    pub fn new(problem: &CompositeProblem, x0: &[f64], cfg: &IanpeConfig, resolved: &Resolved) -> Result<Self> {
        if x0.len() != problem.dim() {
            return Err(Error::DimensionMismatch {
                expected: problem.dim(),
                got: x0.len(),
            });
        }
        if !numerics::all_finite(x0) {
            return Err(Error::NonFinite("initial point"));
        }
        let (g, grad) = problem.smooth.value_gradient(x0);
        let f = g + problem.reg.value(x0);
        let delta0 = (cfg.gamma * resolved.delta_init).min(resolved.delta_max);
        Ok(AcceleratorState {
            k: 0,
            a_sum: 0.0,
            x: x0.to_vec(),
            y: x0.to_vec(),
            f_y: f,
            measure: stationarity(problem, x0, &grad),
            grad_y: grad,
            delta: resolved.delta_init,
            lambda: 0.0,
            lambda_warm: cfg.c / delta0,
            sigma_k: match cfg.mode {
                Mode::Strict => cfg.sigma_u,
                _ => cfg.heuristic.sigma_init,
            },
            phase: match cfg.mode {
                Mode::GrNewton => Phase::GrNewton,
                _ => Phase::Accelerated,
            },
            accelerations: 0,
            sketch_dim: cfg.oracle.sketch_dim,
            counters: Counters {
                full_evals: 1,
                ..Counters::default()
            },
            components: problem.smooth.num_components(),
        })
    }

    pub fn data_passes(&self) -> f64 {
        self.counters.data_passes(self.components)
    }

    /// Doubles the sketch dimension; at `n` rows the exact Hessian is used.
    pub fn grow_sketch(&mut self) {
        self.sketch_dim = (2 * self.sketch_dim).min(self.components);
    }

    pub fn curve(&self) -> AcceleratorCurve {
        AcceleratorCurve {
            a_sum: self.a_sum,
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }
}

/// `lambda -> x~(lambda)` for a fixed state.
#[derive(Debug, Clone)]
pub struct AcceleratorCurve {
    pub a_sum: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve for AcceleratorCurve {
    fn point(&self, lambda: f64) -> Vec<f64> {
        tilde_x(self.a_sum, &self.x, &self.y, lambda)
    }

    fn origin(&self) -> Vec<f64> {
        if self.a_sum > 0.0 {
            self.y.clone()
        } else {
            self.x.clone()
        }
    }
}

/// Everything evaluated at a trial solution.
#[derive(Debug, Clone)]
struct TrialEval {
    f: f64,
    grad: Vec<f64>,
    sigma: SigmaCertificate,
    early: bool,
}

/// Subproblem solves against one frozen oracle, with bookkeeping.
struct Trials<'a> {
    problem: &'a CompositeProblem,
    oracle: &'a FrozenOracle,
    opts: AnsOptions,
    cert_delta: f64,
    rho_bar: f64,
    eps_bar: f64,
    solves: u64,
    full_evals: u64,
    last: Option<TrialEval>,
    grad_cache: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Trials<'a> {
    fn new(
        ctx: &Context<'a>,
        oracle: &'a FrozenOracle,
        cert_delta: f64,
        grad_cache: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Self {
        Trials {
            problem: ctx.problem,
            oracle,
            opts: AnsOptions::new(ctx.cfg.sigma_hat),
            cert_delta,
            rho_bar: ctx.cfg.rho_bar,
            eps_bar: ctx.cfg.eps_bar,
            solves: 0,
            full_evals: 0,
            last: None,
            grad_cache,
        }
    }

    fn finish(self, counters: &mut Counters) -> Option<(Vec<f64>, Vec<f64>)> {
        counters.oracle_calls += self.solves;
        counters.full_evals += self.full_evals;
        self.grad_cache
    }
}

impl TrialSolver for Trials<'_> {
    fn solve(&mut self, x: &[f64], lambda: f64) -> Result<AnsCertificate> {
        let gradient = match &self.grad_cache {
            Some((at, g)) if at.as_slice() == x => g.clone(),
            _ => {
                self.full_evals += 1;
                let g = self.problem.smooth.gradient(x);
                self.grad_cache = Some((x.to_vec(), g.clone()));
                g
            }
        };
        let model = LocalModel {
            x: x.to_vec(),
            gradient,
            hessian: self.oracle.evaluate(x),
        };
        self.solves += 1;
        solve_ans_with_model(&self.problem.reg, &model, lambda, self.opts)
    }

    fn early_exit(&mut self, cert: &AnsCertificate) -> bool {
        self.full_evals += 1;
        let (g, grad) = self.problem.smooth.value_gradient(&cert.y);
        let sigma = sigma_from_gradient(self.problem.l2(), cert, self.cert_delta, &grad);
        let early = early_termination_check(&sigma, self.rho_bar, self.eps_bar);
        self.last = Some(TrialEval {
            f: g + self.problem.reg.value(&cert.y),
            grad,
            sigma,
            early,
        });
        early
    }
}

/// Summary of a bisection stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BisectionSummary {
    pub count: usize,
    pub solves: usize,
    pub lambda_plus0: f64,
    pub lambda_minus0: f64,
    pub gamma0: f64,
    pub fallback_halvings: usize,
}

/// Per-iteration quantities kept for post-hoc checks.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// Index of the iterate produced, starting at 1.
    pub k: usize,
    pub phase: Phase,
    pub lambda: f64,
    pub delta: f64,
    /// `a_{k}` and `A_{k}` after the update; zero in the Newton phase.
    pub a: f64,
    pub a_sum: f64,
    pub x_tilde: Vec<f64>,
    pub y_tilde: Vec<f64>,
    pub step_length: f64,
    pub while_count: usize,
    pub bisection: Option<BisectionSummary>,
    pub sigma: Option<SigmaCertificate>,
    pub early_exit: bool,
    pub search_length: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    Certificate,
    MaxOuter,
    DataPasses,
}

impl StopReason {
    pub fn converged(self) -> bool {
        matches!(self, StopReason::GradTol | StopReason::Certificate)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GradTol => "grad_tol",
            StopReason::Certificate => "certificate",
            StopReason::MaxOuter => "max_outer",
            StopReason::DataPasses => "data_passes",
        }
    }
}

/// Which stopping rule fires for `state`, if any.
pub fn terminate(state: &AcceleratorState, cfg: &IanpeConfig, certificate: bool) -> Option<StopReason> {
    if state.measure < cfg.grad_tol {
        Some(StopReason::GradTol)
    } else if certificate {
        Some(StopReason::Certificate)
    } else if state.k >= cfg.max_outer {
        Some(StopReason::MaxOuter)
    } else if cfg.max_data_passes.is_some_and(|b| state.data_passes() >= b) {
        Some(StopReason::DataPasses)
    } else {
        None
    }
}

/// Fixed inputs of a run.
pub struct Context<'a> {
    pub problem: &'a CompositeProblem,
    pub cfg: &'a IanpeConfig,
    pub resolved: Resolved,
    start: Instant,
}

impl<'a> Context<'a> {
    pub fn new(problem: &'a CompositeProblem, cfg: &'a IanpeConfig) -> Result<Self> {
        Ok(Context {
            resolved: cfg.resolve(problem)?,
            problem,
            cfg,
            start: Instant::now(),
        })
    }

    fn smooth(&self) -> Arc<dyn SmoothFunction> {
        self.problem.smooth.clone()
    }

    fn wall_nanos(&self) -> u64 {
        if self.cfg.record_timing {
            self.start.elapsed().as_nanos() as u64
        } else {
            0
        }
    }

    /// Oracle for the certified loop at error level `delta`.
    fn freeze_strict(&self, delta: f64, state: &AcceleratorState, redraw: u64) -> Result<FrozenOracle> {
        let iteration = state.k as u64;
        match self.cfg.oracle.kind {
            OracleKind::Exact => Ok(FrozenOracle::exact(self.smooth())),
            // kappa = delta / 2 must stay below 1; a smaller target is still within delta
            OracleKind::SubSample => freeze_subsample(self.smooth(), &self.cfg.oracle, delta.min(1.0), iteration, redraw),
            OracleKind::Sketch if state.sketch_dim >= state.components => Ok(FrozenOracle::exact(self.smooth())),
            OracleKind::Sketch => {
                let mut oc = self.cfg.oracle.clone();
                oc.sketch_dim = state.sketch_dim;
                freeze_sketch(self.smooth(), &oc, iteration, redraw)
            }
        }
    }

    /// Oracle for the adaptive scheme, sized from the current gradient.
    fn freeze_sized(&self, shift: f64, state: &AcceleratorState) -> Result<FrozenOracle> {
        match self.cfg.oracle.kind {
            OracleKind::Exact => Ok(FrozenOracle::exact(self.smooth())),
            OracleKind::SubSample => {
                let size = sample_size_for(state.measure, &self.cfg.heuristic, &self.resolved);
                freeze_subsample_sized(self.smooth(), self.cfg.oracle.seed, size, shift, state.k as u64, 0)
            }
            OracleKind::Sketch if state.sketch_dim >= state.components => Ok(FrozenOracle::exact(self.smooth())),
            OracleKind::Sketch => {
                let mut oc = self.cfg.oracle.clone();
                oc.sketch_dim = state.sketch_dim;
                freeze_sketch(self.smooth(), &oc, state.k as u64, 0)
            }
        }
    }

    fn record(&self, state: &AcceleratorState, diag: &StepDiagnostics, sample_size: usize) -> TraceRecord {
        TraceRecord {
            iter: diag.k,
            mode: diag.phase.as_str().to_string(),
            f: state.f_y,
            grad_norm: state.measure,
            lambda: diag.lambda,
            delta: diag.delta,
            step_length: diag.step_length,
            bisection_count: diag.bisection.map_or(0, |b| b.count),
            while_count: diag.while_count,
            oracle_calls: state.counters.oracle_calls,
            data_passes: state.data_passes(),
            wall_nanos: self.wall_nanos(),
            sigma_k: state.sigma_k,
            sample_size,
        }
    }
}

/// Accepted trial of an accelerated iteration.
struct Accepted {
    lambda: f64,
    delta: f64,
    cert: AnsCertificate,
    eval: TrialEval,
    while_count: usize,
    bisection: Option<BisectionSummary>,
    search_length: usize,
    sample_size: usize,
}

/// Extragradient update shared by both accelerated variants.
fn apply_update(ctx: &Context, state: &mut AcceleratorState, acc: Accepted) -> (TraceRecord, StepDiagnostics) {
    let a = accel_coefficient(acc.lambda, state.a_sum);
    let step_length = acc.cert.step_length();
    let x_tilde = acc.cert.x;
    let y_tilde = acc.cert.y;
    numerics::axpy(-a, &acc.eval.sigma.v, &mut state.x);
    state.a_sum += a;
    if acc.eval.f <= state.f_y {
        state.y = y_tilde.clone();
        state.f_y = acc.eval.f;
        state.measure = stationarity(ctx.problem, &y_tilde, &acc.eval.grad);
        state.grad_y = acc.eval.grad;
    }
    state.k += 1;
    state.delta = acc.delta;
    state.lambda = acc.lambda;
    state.accelerations += 1;
    state.counters.while_total += acc.while_count;
    state.counters.bisection_total += acc.bisection.map_or(0, |b| b.count);
    let diag = StepDiagnostics {
        k: state.k,
        phase: Phase::Accelerated,
        lambda: acc.lambda,
        delta: acc.delta,
        a,
        a_sum: state.a_sum,
        x_tilde,
        y_tilde,
        step_length,
        while_count: acc.while_count,
        bisection: acc.bisection,
        early_exit: acc.eval.early,
        sigma: Some(acc.eval.sigma),
        search_length: acc.search_length,
        x: state.x.clone(),
        y: state.y.clone(),
        f_y: state.f_y,
    };
    (ctx.record(state, &diag, acc.sample_size), diag)
}

/// One certified iteration: error schedule, while loop, bisection, update.
pub fn outer_step(ctx: &Context, state: &mut AcceleratorState) -> Result<(TraceRecord, StepDiagnostics)> {
    let cfg = ctx.cfg;
    let bounds = StepBounds::from_sigmas(cfg.sigma_l, cfg.sigma_u, ctx.resolved.l2);
    let curve = state.curve();
    let mut delta = (cfg.gamma * state.delta).min(ctx.resolved.delta_max);
    let mut while_count = 0;
    let mut cache = None;
    let (oracle, lambda, cert, eval, side) = loop {
        let oracle = ctx.freeze_strict(delta, state, while_count as u64)?;
        let lambda = cfg.c / delta;
        let (cert, eval) = {
            let mut trials = Trials::new(ctx, &oracle, cert_delta(&oracle, delta), cache.take());
            let cert = trials.solve(&curve.point(lambda), lambda)?;
            trials.early_exit(&cert);
            let eval = trials.last.take().expect("evaluated trial");
            cache = trials.finish(&mut state.counters);
            (cert, eval)
        };
        state.counters.component_hessians += oracle.component_evaluations();
        let side = bounds.classify(cert.step_length());
        if eval.early || side != Side::Below {
            break (oracle, lambda, cert, eval, side);
        }
        if while_count >= cfg.max_while {
            return Err(Error::WhileLoopExhausted(while_count));
        }
        while_count += 1;
        delta /= cfg.gamma;
    };
    let before = oracle.component_evaluations();
    let (lambda, cert, eval, bisection) = if side == Side::Above && !eval.early {
        let mut trials = Trials::new(ctx, &oracle, cert_delta(&oracle, delta), cache);
        let params = BracketParams {
            sigma_hat: cfg.sigma_hat,
            c: cfg.c,
            l2: ctx.resolved.l2,
        };
        let r = bisect(&curve, &mut trials, lambda, &cert, bounds, params, cfg.max_bisection);
        let last = trials.last.take();
        trials.finish(&mut state.counters);
        let r = r?;
        if r.fallback_halvings > 0 && oracle.is_sketch() {
            state.grow_sketch();
        }
        let summary = BisectionSummary {
            count: r.bisection_count,
            solves: r.solves,
            lambda_plus0: lambda,
            lambda_minus0: r.lambda_minus0,
            gamma0: r.gamma0,
            fallback_halvings: r.fallback_halvings,
        };
        (r.lambda, r.cert, last.expect("bisection evaluates every trial"), Some(summary))
    } else {
        (lambda, cert, eval, None)
    };
    state.counters.component_hessians += oracle.component_evaluations() - before;
    // a sketch carries no error bound; enlarge it when the true-gradient test fails
    if oracle.is_sketch() && !eval.sigma.satisfies(cfg.sigma_tilde()) {
        state.grow_sketch();
    }
    if oracle.declared_error().is_finite() {
        if let Err(e) = check_sigma_bounds(&eval.sigma) {
            if oracle.is_exact() {
                return Err(e);
            }
            warn!("iteration {}: sub-sampled oracle missed its error target: {e}", state.k + 1);
        }
    }
    let sample_size = oracle.sample_size();
    Ok(apply_update(
        ctx,
        state,
        Accepted {
            lambda,
            delta,
            cert,
            eval,
            while_count,
            bisection,
            search_length: 0,
            sample_size,
        },
    ))
}

fn cert_delta(oracle: &FrozenOracle, delta: f64) -> f64 {
    let declared = oracle.declared_error();
    if declared.is_finite() {
        declared
    } else {
        delta
    }
}

/// One iteration of the adaptive scheme: warm-started halving search on the
/// residual test `||lambda v + y~ - x~|| <= sigma_k ||y~ - x~||`.
pub fn heuristic_step(ctx: &Context, state: &mut AcceleratorState) -> Result<(TraceRecord, StepDiagnostics)> {
    let cfg = ctx.cfg;
    let hc = &cfg.heuristic;
    let delta = (cfg.c / state.lambda_warm).min(ctx.resolved.delta_max);
    let lambda0 = cfg.c / delta;
    let oracle = ctx.freeze_sized(0.5 * delta, state)?;
    let curve = state.curve();
    let mut trials = Trials::new(ctx, &oracle, delta, None);
    let mut tried: Vec<(f64, AnsCertificate, TrialEval)> = Vec::new();
    let mut sigma = state.sigma_k;
    let mut lambda = lambda0;
    let pick = loop {
        let cert = match trials.solve(&curve.point(lambda), lambda) {
            Ok(c) => c,
            Err(e) => {
                trials.finish(&mut state.counters);
                return Err(e);
            }
        };
        trials.early_exit(&cert);
        let eval = trials.last.take().expect("evaluated trial");
        let pass = eval.early || eval.sigma.satisfies(sigma);
        tried.push((lambda, cert, eval));
        if pass {
            break tried.len() - 1;
        }
        if tried.len() >= hc.threshold {
            sigma = loosen(hc, sigma);
            if let Some(i) = tried.iter().position(|t| t.2.sigma.satisfies(sigma)) {
                break i;
            }
        }
        if tried.len() >= cfg.max_bisection {
            trials.finish(&mut state.counters);
            return Err(Error::BracketExhausted {
                steps: tried.len(),
                lo: lambda,
                hi: lambda0,
            });
        }
        lambda *= 0.5;
    };
    trials.finish(&mut state.counters);
    state.counters.component_hessians += oracle.component_evaluations();
    let search_length = tried.len();
    let (lambda, cert, eval) = tried.swap_remove(pick);
    let update = adaptive_update(
        hc,
        SearchStats {
            length: search_length,
            accepted_lambda: lambda,
            sigma,
        },
    );
    debug!(
        "iteration {}: search length {search_length}, lambda {lambda:e}, sigma {sigma}",
        state.k + 1
    );
    state.sigma_k = update.sigma;
    state.lambda_warm = update.lambda_warm;
    let f_prev = state.f_y;
    let out = apply_update(
        ctx,
        state,
        Accepted {
            lambda,
            delta,
            cert,
            eval,
            while_count: 0,
            bisection: None,
            search_length,
            sample_size: oracle.sample_size(),
        },
    );
    if ctx.problem.reg.is_zero() && should_switch(hc, state.accelerations, f_prev, state.f_y) {
        debug!("switching to regularized Newton steps after iteration {}", state.k);
        state.phase = Phase::GrNewton;
    }
    Ok(out)
}

/// One gradient-regularized Newton iteration from `state.y`.
pub fn newton_step(ctx: &Context, state: &mut AcceleratorState) -> Result<(TraceRecord, StepDiagnostics)> {
    let oracle = ctx.freeze_sized(0.0, state)?;
    let reg = state.measure.powf(1.5);
    let p = gr_newton_direction(&oracle, &state.y, &state.grad_y)?;
    state.counters.component_hessians += oracle.component_evaluations();
    let y_new = numerics::add(&state.y, &p);
    let (g, grad) = ctx.problem.smooth.value_gradient(&y_new);
    state.counters.full_evals += 1;
    let step_length = reg * numerics::norm(&p);
    state.f_y = g + ctx.problem.reg.value(&y_new);
    state.measure = stationarity(ctx.problem, &y_new, &grad);
    state.grad_y = grad;
    state.y = y_new;
    state.k += 1;
    let diag = StepDiagnostics {
        k: state.k,
        phase: Phase::GrNewton,
        lambda: reg,
        delta: 0.0,
        a: 0.0,
        a_sum: state.a_sum,
        x_tilde: Vec::new(),
        y_tilde: Vec::new(),
        step_length,
        while_count: 0,
        bisection: None,
        sigma: None,
        early_exit: false,
        search_length: 1,
        x: state.x.clone(),
        y: state.y.clone(),
        f_y: state.f_y,
    };
    Ok((ctx.record(state, &diag, oracle.sample_size()), diag))
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub steps: Vec<StepDiagnostics>,
    pub state: AcceleratorState,
    pub stop: StopReason,
    pub resolved: Resolved,
}

impl RunOutput {
    pub fn converged(&self) -> bool {
        self.stop.converged()
    }
}

/// JSON block written above a trace.
pub fn trace_header(cfg: &IanpeConfig, resolved: &Resolved, problem: &CompositeProblem) -> serde_json::Value {
    let certified = cfg.mode == Mode::Strict && cfg.oracle.kind != OracleKind::Sketch;
    serde_json::json!({
        "mode": cfg.mode,
        "guarantee": if certified { "certified" } else { "heuristic" },
        "config": cfg,
        "resolved": resolved,
        "dim": problem.dim(),
        "components": problem.smooth.num_components(),
    })
}

/// Runs the configured method from `x0` until a stopping rule fires.
pub fn run(problem: &CompositeProblem, x0: &[f64], cfg: &IanpeConfig) -> Result<RunOutput> {
    let ctx = Context::new(problem, cfg)?;
    if cfg.mode == Mode::GrNewton && !problem.reg.is_zero() {
        return Err(Error::InvalidConfig(
            "regularized Newton mode needs a smooth objective".into(),
        ));
    }
    let mut state = AcceleratorState::new(problem, x0, cfg, &ctx.resolved)?;
    let mut records = Vec::new();
    let mut steps = Vec::new();
    let mut certificate = false;
    let stop = loop {
        if let Some(reason) = terminate(&state, cfg, certificate) {
            break reason;
        }
        let iteration = state.k + 1;
        let (rec, diag) = match (cfg.mode, state.phase) {
            (_, Phase::GrNewton) => newton_step(&ctx, &mut state),
            (Mode::Strict, _) => outer_step(&ctx, &mut state),
            _ => heuristic_step(&ctx, &mut state),
        }
        .map_err(|e| e.at_iteration(iteration))?;
        certificate = diag.early_exit;
        if !state.f_y.is_finite() {
            return Err(Error::NonFinite("objective").at_iteration(iteration));
        }
        records.push(rec);
        steps.push(diag);
    };
    Ok(RunOutput {
        records,
        steps,
        state,
        stop,
        resolved: ctx.resolved,
    })
}
