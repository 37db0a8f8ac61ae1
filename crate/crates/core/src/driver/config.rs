use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linesearch::MAX_BISECTION_STEPS;
use crate::oracle::OracleConfig;
use crate::problem::CompositeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Certified outer loop with bracketing and bisection.
    Strict,
    /// Adaptive acceptance test, warm-started step sizes and a late switch to
    /// regularized Newton steps.
    Heuristic,
    /// Gradient-regularized Newton steps only.
    GrNewton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub sigma_init: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Searches with at most this many trial solves count as easy.
    pub threshold: usize,
    /// Growth of the warm-start step size after an easy search.
    pub warm_factor: f64,
    /// Multiplicative change of `sigma_k` per easy or hard search.
    pub sigma_step: f64,
    /// Accelerated iterations before the switch may fire.
    pub switch_after: usize,
    /// Relative decrease of `f` at or below which the switch fires.
    pub progress_cutoff: f64,
    /// Sample size `ceil(sample_constant / ||grad f||^2)` before clamping.
    pub sample_constant: f64,
    /// Defaults to `max(4 d, n / 100)`, at most `n`.
    pub sample_min: Option<usize>,
    /// Defaults to `n`.
    pub sample_max: Option<usize>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            sigma_init: 0.9,
            sigma_min: 0.7,
            sigma_max: 0.95,
            threshold: 2,
            warm_factor: 2.0,
            sigma_step: 0.95,
            switch_after: 40,
            progress_cutoff: 0.1,
            sample_constant: 1.0,
            sample_min: None,
            sample_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IanpeConfig {
    pub mode: Mode,
    /// Product bound `lambda delta <= c`.
    pub c: f64,
    /// Growth factor of the error schedule.
    pub gamma: f64,
    /// Error level before the first iteration; defaults to `delta_max / 2^10`.
    pub delta_init: Option<f64>,
    /// Largest error level; defaults to the gradient Lipschitz constant.
    pub delta_max: Option<f64>,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub sigma_hat: f64,
    /// Early termination tolerance on `||v||`.
    pub rho_bar: f64,
    /// Early termination tolerance on `eps`.
    pub eps_bar: f64,
    pub grad_tol: f64,
    pub max_outer: usize,
    pub max_while: usize,
    pub max_bisection: usize,
    /// Stop once this many data passes have been spent.
    pub max_data_passes: Option<f64>,
    /// Record wall-clock time in traces; off gives byte-identical traces.
    pub record_timing: bool,
    pub heuristic: HeuristicConfig,
    pub oracle: OracleConfig,
}

impl Default for IanpeConfig {
    fn default() -> Self {
        IanpeConfig {
            mode: Mode::Strict,
            c: 0.1,
            gamma: 2.0,
            delta_init: None,
            delta_max: None,
            sigma_l: 0.1,
            sigma_u: 0.5,
            sigma_hat: 0.1,
            rho_bar: 1e-9,
            eps_bar: 1e-9,
            grad_tol: 1e-7,
            max_outer: 1000,
            max_while: 128,
            max_bisection: MAX_BISECTION_STEPS,
            max_data_passes: None,
            record_timing: true,
            heuristic: HeuristicConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(msg()))
    }
}

fn open_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

impl IanpeConfig {
    /// `C + sigma_u + sigma_hat`
    pub fn sigma_tilde(&self) -> f64 {
        self.c + self.sigma_u + self.sigma_hat
    }

    pub fn validate(&self) -> Result<()> {
        require(open_unit(self.c), || format!("c = {} outside (0, 1)", self.c))?;
        require(self.gamma > 1.0 && self.gamma.is_finite(), || {
            format!("gamma = {} must exceed 1", self.gamma)
        })?;
        require(open_unit(self.sigma_hat), || format!("sigma_hat = {} outside (0, 1)", self.sigma_hat))?;
        require(
            self.sigma_l > 0.0 && self.sigma_l < self.sigma_u && self.sigma_u < 1.0,
            || format!("need 0 < sigma_l < sigma_u < 1, got {} and {}", self.sigma_l, self.sigma_u),
        )?;
        require(self.sigma_hat + self.sigma_u < 1.0, || {
            format!("sigma_hat + sigma_u = {} must be below 1", self.sigma_hat + self.sigma_u)
        })?;
        require(
            self.sigma_l * (1.0 + self.sigma_hat) < self.sigma_u * (1.0 - self.sigma_hat),
            || "bracket bounds overlap: need sigma_l (1 + sigma_hat) < sigma_u (1 - sigma_hat)".into(),
        )?;
        require(self.sigma_tilde() < 1.0, || {
            format!("c + sigma_u + sigma_hat = {} must be below 1", self.sigma_tilde())
        })?;
        if let (Some(lo), Some(hi)) = (self.delta_init, self.delta_max) {
            require(lo < hi, || format!("delta_init {lo} must be below delta_max {hi}"))?;
        }
        for (name, v) in [("delta_init", self.delta_init), ("delta_max", self.delta_max)] {
            if let Some(v) = v {
                require(v > 0.0 && v.is_finite(), || format!("{name} = {v} must be positive"))?;
            }
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidTolerance(format!("grad_tol = {}", self.grad_tol)));
        }
        if !(self.rho_bar > 0.0 && self.eps_bar > 0.0) {
            return Err(Error::InvalidTolerance(format!(
                "rho_bar = {}, eps_bar = {}",
                self.rho_bar, self.eps_bar
            )));
        }
        require(self.max_bisection > 0 && self.max_while > 0, || {
            "max_while and max_bisection must be positive".into()
        })?;
        let h = &self.heuristic;
        require(
            h.sigma_min > 0.0 && h.sigma_min <= h.sigma_init && h.sigma_init <= h.sigma_max && h.sigma_max < 1.0,
            || {
                format!(
                    "need 0 < sigma_min <= sigma_init <= sigma_max < 1, got {}, {}, {}",
                    h.sigma_min, h.sigma_init, h.sigma_max
                )
            },
        )?;
        require(h.threshold >= 1, || "threshold must be at least 1".into())?;
        require(h.warm_factor > 1.0, || format!("warm_factor = {} must exceed 1", h.warm_factor))?;
        require(open_unit(h.sigma_step), || format!("sigma_step = {} outside (0, 1)", h.sigma_step))?;
        require(h.sample_constant > 0.0, || "sample_constant must be positive".into())?;
        if let (Some(lo), Some(hi)) = (h.sample_min, h.sample_max) {
            require(lo >= 1 && lo <= hi, || format!("sample bounds [{lo}, {hi}] invalid"))?;
        }
        self.oracle.validate()
    }

    /// Fills in the problem-dependent defaults.
    pub fn resolve(&self, problem: &CompositeProblem) -> Result<Resolved> {
        self.validate()?;
        let l1 = problem.l1();
        let delta_max = self.delta_max.unwrap_or(l1);
        if !(delta_max > 0.0 && delta_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delta_max = {delta_max}; set it explicitly for this problem"
            )));
        }
        let delta_init = self.delta_init.unwrap_or(delta_max / 1024.0);
        require(delta_init < delta_max, || {
            format!("delta_init {delta_init} must be below delta_max {delta_max}")
        })?;
        let n = problem.smooth.num_components();
        let d = problem.dim();
        let sample_max = self.heuristic.sample_max.unwrap_or(n).clamp(1, n);
        let sample_min = self
            .heuristic
            .sample_min
            .unwrap_or((4 * d).max(n / 100))
            .clamp(1, sample_max);
        Ok(Resolved {
            delta_max,
            delta_init,
            l1,
            l2: problem.l2(),
            sample_min,
            sample_max,
        })
    }
}

/// Problem-dependent constants of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub delta_max: f64,
    pub delta_init: f64,
    pub l1: f64,
    pub l2: f64,
    pub sample_min: usize,
    pub sample_max: usize,
}
