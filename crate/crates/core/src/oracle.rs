//! Inexact Hessian oracles.
//!
//! A [`FrozenOracle`] fixes all of its randomness (the sample multiset or the
//! sketch matrix) when it is built, so every query inside one outer iteration
//! sees the same approximation. Randomness is keyed by
//! `(seed, outer iteration, redraw count)`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{spectral_norm_upper, DenseMatrix, DenseSymMatrix};
use crate::problem::SmoothFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    SubSample,
    Sketch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub seed: u64,
    /// Error target used when the oracle is built outside the driver.
    pub delta_target: f64,
    /// Probability budget for a sub-sample missing its error target.
    pub failure_budget: f64,
    /// Number of query points one frozen oracle must cover.
    pub points_budget: usize,
    pub sketch_dim: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::Exact,
            seed: 0,
            delta_target: 0.1,
            failure_budget: 0.1,
            points_budget: 64,
            sketch_dim: 32,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_target > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "oracle delta_target must be positive, got {}",
                self.delta_target
            )));
        }
        if !(self.failure_budget > 0.0 && self.failure_budget < 1.0) {
            return Err(Error::InvalidTolerance(format!(
                "failure budget {} outside (0, 1)",
                self.failure_budget
            )));
        }
        if self.points_budget == 0 || self.sketch_dim == 0 {
            return Err(Error::InvalidConfig(
                "points_budget and sketch_dim must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of [`sample_size_uniform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSize {
    /// Uncapped value of the formula (at least 1, saturating).
    pub requested: usize,
    /// `min(requested, n)`.
    pub size: usize,
    pub capped_at_full_batch: bool,
}

/// `ceil(16 L1^2 / kappa^2 * ln(2 N d / failure))`, clamped to `[1, n]`.
pub fn sample_size_uniform(
    l1: f64,
    kappa: f64,
    points: usize,
    d: usize,
    failure: f64,
    n: usize,
) -> Result<SampleSize> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidTolerance(format!("kappa {kappa} outside (0, 1)")));
    }
    if !(failure > 0.0 && failure < 1.0) {
        return Err(Error::InvalidTolerance(format!(
            "failure probability {failure} outside (0, 1)"
        )));
    }
    if points == 0 || d == 0 || n == 0 || !(l1 >= 0.0) {
        return Err(Error::InvalidConfig(
            "sample size needs N, d, n >= 1 and L1 >= 0".into(),
        ));
    }
    let log_term = (2.0 * points as f64 * d as f64 / failure).ln();
    let raw = (16.0 * l1 * l1 / (kappa * kappa) * log_term).ceil();
    let requested = if raw.is_nan() || raw < 1.0 {
        1
    } else if raw >= usize::MAX as f64 {
        usize::MAX
    } else {
        raw as usize
    };
    Ok(SampleSize {
        requested,
        size: requested.min(n),
        capped_at_full_batch: requested >= n,
    })
}

#[derive(Debug, Clone)]
enum Approximation {
    Exact,
    /// Multiset of component indices; `None` means the full batch.
    SubSample { sample: Option<Vec<usize>> },
    /// `m x n` sketch applied to the Hessian square root.
    Sketch { sketch: DenseMatrix },
    /// `hess g(x) + E` for a fixed symmetric `E`.
    Perturbed { perturbation: DenseSymMatrix },
}

/// An approximate Hessian `x -> H(x)` with all randomness fixed.
#[derive(Debug)]
pub struct FrozenOracle {
    smooth: Arc<dyn SmoothFunction>,
    approx: Approximation,
    shift: f64,
    declared_error: f64,
    seed: u64,
    iteration: u64,
    redraws: u64,
    component_evals: AtomicU64,
    evaluations: AtomicU64,
}

fn keyed_rng(seed: u64, iteration: u64, redraw: u64, tag: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&iteration.to_le_bytes());
    key[16..24].copy_from_slice(&redraw.to_le_bytes());
    key[24..].copy_from_slice(&tag.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

const TAG_SUBSAMPLE: u64 = 1;
const TAG_SKETCH: u64 = 2;

impl FrozenOracle {
    fn build(smooth: Arc<dyn SmoothFunction>, approx: Approximation, shift: f64, declared: f64) -> Self {
        FrozenOracle {
            smooth,
            approx,
            shift,
            declared_error: declared,
            seed: 0,
            iteration: 0,
            redraws: 0,
            component_evals: AtomicU64::new(0),
            evaluations: AtomicU64::new(0),
        }
    }

    /// `H(x) = hess g(x)`.
    pub fn exact(smooth: Arc<dyn SmoothFunction>) -> Self {
        Self::build(smooth, Approximation::Exact, 0.0, 0.0)
    }

    /// `H(x) = hess g(x) + E`; the declared error is `||E||`.
    pub fn perturbed(smooth: Arc<dyn SmoothFunction>, perturbation: DenseSymMatrix) -> Result<Self> {
        if perturbation.order() != smooth.dim() {
            return Err(Error::DimensionMismatch {
                expected: smooth.dim(),
                got: perturbation.order(),
            });
        }
        let norm = spectral_norm_upper(&perturbation, 500);
        Ok(Self::build(
            smooth,
            Approximation::Perturbed { perturbation },
            0.0,
            norm,
        ))
    }

    /// Sketch oracle with an explicit `m x n` sketch matrix.
    pub fn with_sketch_matrix(smooth: Arc<dyn SmoothFunction>, sketch: DenseMatrix) -> Result<Self> {
        let n = smooth
            .finite_sum()
            .ok_or(Error::NotFiniteSum("sketch"))?
            .num_components();
        if sketch.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sketch.cols(),
            });
        }
        Ok(Self::build(smooth, Approximation::Sketch { sketch }, 0.0, f64::INFINITY))
    }

    pub fn smooth(&self) -> &Arc<dyn SmoothFunction> {
        &self.smooth
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Error bound the oracle was built for; 0 for the exact oracle and
    /// infinite for sketches, which carry no a-priori guarantee.
    pub fn declared_error(&self) -> f64 {
        self.declared_error
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.approx, Approximation::Exact)
    }

    pub fn is_sketch(&self) -> bool {
        matches!(self.approx, Approximation::Sketch { .. })
    }

    /// Number of sampled components, `n` for full-batch variants.
    pub fn sample_size(&self) -> usize {
        match &self.approx {
            Approximation::SubSample { sample: Some(s) } => s.len(),
            _ => self.smooth.num_components(),
        }
    }

    pub fn sample(&self) -> Option<&[usize]> {
        match &self.approx {
            Approximation::SubSample { sample: Some(s) } => Some(s),
            _ => None,
        }
    }

    pub fn sketch_dim(&self) -> Option<usize> {
        match &self.approx {
            Approximation::Sketch { sketch } => Some(sketch.rows()),
            _ => None,
        }
    }

    pub fn redraws(&self) -> u64 {
        self.redraws
    }

    /// Component-Hessian evaluations performed so far.
    pub fn component_evaluations(&self) -> u64 {
        self.component_evals.load(Ordering::Relaxed)
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// `H(x)` as a dense symmetric matrix.
    pub fn evaluate(&self, x: &[f64]) -> DenseSymMatrix {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let n = self.smooth.num_components() as u64;
        let h = match &self.approx {
            Approximation::Exact => {
                self.component_evals.fetch_add(n, Ordering::Relaxed);
                self.smooth.hessian(x)
            }
            Approximation::Perturbed { perturbation } => {
                self.component_evals.fetch_add(n, Ordering::Relaxed);
                self.smooth.hessian(x).add_scaled(1.0, perturbation)
            }
            Approximation::SubSample { sample } => match sample {
                None => {
                    self.component_evals.fetch_add(n, Ordering::Relaxed);
                    self.smooth.hessian(x)
                }
                Some(s) => {
                    self.component_evals.fetch_add(s.len() as u64, Ordering::Relaxed);
                    self.smooth
                        .finite_sum()
                        .expect("sub-sample oracle built on a finite sum")
                        .sampled_hessian(x, s)
                }
            },
            Approximation::Sketch { sketch } => {
                self.component_evals.fetch_add(n, Ordering::Relaxed);
                let (root, ridge) = self
                    .smooth
                    .finite_sum()
                    .expect("sketch oracle built on a finite sum")
                    .hessian_sqrt(x);
                sketch.matmul(&root).gram().with_diagonal_shift(ridge)
            }
        };
        if self.shift != 0.0 {
            h.with_diagonal_shift(self.shift)
        } else {
            h
        }
    }

    /// `H(x) v`.
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.approx {
            Approximation::Exact => {
                self.evaluations.fetch_add(1, Ordering::Relaxed);
                self.component_evals
                    .fetch_add(self.smooth.num_components() as u64, Ordering::Relaxed);
                let mut out = self.smooth.hessian_vec(x, v);
                crate::numerics::axpy(self.shift, v, &mut out);
                out
            }
            _ => self.evaluate(x).mul_vec(v),
        }
    }

    /// Sketch only: `m <- 2m` and a fresh draw. Fails once `2m > n`.
    pub fn double_dimension(&mut self) -> Result<()> {
        let Approximation::Sketch { sketch } = &self.approx else {
            return Err(Error::InvalidConfig("only sketch oracles can grow".into()));
        };
        let m = sketch.rows();
        let n = sketch.cols();
        if 2 * m > n {
            return Err(Error::SketchDimExceedsRows {
                requested: 2 * m,
                rows: n,
            });
        }
        self.redraws += 1;
        let sketch = gaussian_sketch(2 * m, n, self.seed, self.iteration, self.redraws);
        self.approx = Approximation::Sketch { sketch };
        Ok(())
    }
}

fn gaussian_sketch(m: usize, n: usize, seed: u64, iteration: u64, redraw: u64) -> DenseMatrix {
    let mut rng = keyed_rng(seed, iteration, redraw, TAG_SKETCH);
    let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive deviation");
    let data = (0..m * n).map(|_| normal.sample(&mut rng)).collect();
    DenseMatrix::from_row_major(m, n, data).expect("sized buffer")
}

/// Sub-sampled oracle `(1/|S|) sum_{j in S} hess g_j + (delta/2) I` for outer
/// iteration `iteration`, with `|S|` sized for `kappa = delta/2`.
pub fn freeze_subsample(
    smooth: Arc<dyn SmoothFunction>,
    cfg: &OracleConfig,
    delta: f64,
    iteration: u64,
    redraw: u64,
) -> Result<FrozenOracle> {
    let fs = smooth.finite_sum().ok_or(Error::NotFiniteSum("sub-sample"))?;
    let n = fs.num_components();
    let kappa = delta / 2.0;
    let size = sample_size_uniform(
        smooth.gradient_lipschitz(),
        kappa,
        cfg.points_budget,
        smooth.dim(),
        cfg.failure_budget,
        n,
    )?;
    let sample = if size.capped_at_full_batch {
        None
    } else {
        let mut rng = keyed_rng(cfg.seed, iteration, redraw, TAG_SUBSAMPLE);
        Some((0..size.size).map(|_| rng.random_range(0..n)).collect())
    };
    Ok(freeze_with_sample(smooth, sample, kappa, delta, cfg.seed, iteration, redraw))
}

/// Sub-sampled oracle with an explicit sample size (no error guarantee).
pub fn freeze_subsample_sized(
    smooth: Arc<dyn SmoothFunction>,
    seed: u64,
    size: usize,
    shift: f64,
    iteration: u64,
    redraw: u64,
) -> Result<FrozenOracle> {
    let fs = smooth.finite_sum().ok_or(Error::NotFiniteSum("sub-sample"))?;
    let n = fs.num_components();
    let sample = if size >= n {
        None
    } else {
        let mut rng = keyed_rng(seed, iteration, redraw, TAG_SUBSAMPLE);
        Some((0..size.max(1)).map(|_| rng.random_range(0..n)).collect())
    };
    let declared = if sample.is_none() { shift } else { f64::INFINITY };
    Ok(freeze_with_sample(smooth, sample, shift, declared, seed, iteration, redraw))
}

fn freeze_with_sample(
    smooth: Arc<dyn SmoothFunction>,
    sample: Option<Vec<usize>>,
    shift: f64,
    declared: f64,
    seed: u64,
    iteration: u64,
    redraw: u64,
) -> FrozenOracle {
    let mut o = FrozenOracle::build(smooth, Approximation::SubSample { sample }, shift, declared);
    o.seed = seed;
    o.iteration = iteration;
    o.redraws = redraw;
    o
}

/// Gaussian sketch oracle `(S R)^T (S R) + r I` where `hess g = R^T R + r I`
/// and `S` is `m x n` with `N(0, 1/m)` entries.
pub fn freeze_sketch(
    smooth: Arc<dyn SmoothFunction>,
    cfg: &OracleConfig,
    iteration: u64,
    redraw: u64,
) -> Result<FrozenOracle> {
    let fs = smooth.finite_sum().ok_or(Error::NotFiniteSum("sketch"))?;
    let n = fs.num_components();
    let m = cfg.sketch_dim;
    if m > n {
        return Err(Error::SketchDimExceedsRows { requested: m, rows: n });
    }
    let sketch = gaussian_sketch(m, n, cfg.seed, iteration, redraw);
    let mut o = FrozenOracle::with_sketch_matrix(smooth, sketch)?;
    o.seed = cfg.seed;
    o.iteration = iteration;
    o.redraws = redraw;
    Ok(o)
}

/// `||H(x) - hess g(x)||_2`, measured densely.
pub fn oracle_error(oracle: &FrozenOracle, x: &[f64]) -> f64 {
    if oracle.is_exact() {
        return oracle.shift;
    }
    let diff = oracle.evaluate(x).sub(&oracle.smooth.hessian(x));
    spectral_norm_upper(&diff, 300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn logistic(n: usize, d: usize, seed: u64) -> Arc<dyn SmoothFunction> {
        Arc::new(synth::logistic_instance(n, d, 1e-3, 1.0, seed).unwrap())
    }

    #[test]
    fn sample_size_formula() {
        // ln(2 N d / failure) = 4 exactly
        let failure = 2.0 / 4f64.exp();
        let s = sample_size_uniform(1.0, 0.5, 1, 1, failure, 10_000).unwrap();
        assert_eq!(s.requested, 256);
        assert!(!s.capped_at_full_batch);
        let tiny = sample_size_uniform(1e-6, 0.9, 1, 1, 0.5, 10).unwrap();
        assert_eq!(tiny.size, 1);
        let capped = sample_size_uniform(1.0, 0.01, 64, 10, 0.1, 100).unwrap();
        assert_eq!(capped.size, 100);
        assert!(capped.capped_at_full_batch);
    }

    #[test]
    fn sample_size_rejects_bad_tolerances() {
        assert!(matches!(
            sample_size_uniform(1.0, 1.0, 1, 1, 0.1, 10),
            Err(Error::InvalidTolerance(_))
        ));
        assert!(matches!(
            sample_size_uniform(1.0, 0.5, 1, 1, 1.0, 10),
            Err(Error::InvalidTolerance(_))
        ));
        assert!(matches!(
            sample_size_uniform(1.0, 0.5, 1, 1, 0.0, 10),
            Err(Error::InvalidTolerance(_))
        ));
    }

    #[test]
    fn full_batch_subsample_is_shifted_hessian() {
        let g = logistic(40, 5, 1);
        let cfg = OracleConfig::default();
        // tiny delta forces the cap
        let o = freeze_subsample(g.clone(), &cfg, 1e-3, 0, 0).unwrap();
        assert!(o.sample().is_none());
        let x = synth::gaussian_vector(5, 2);
        let expect = g.hessian(&x).with_diagonal_shift(5e-4);
        assert_eq!(o.evaluate(&x), expect);
        assert!((oracle_error(&o, &x) - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn subsample_is_keyed_by_seed_iteration_redraw() {
        let g = logistic(5000, 3, 4);
        let cfg = OracleConfig {
            seed: 11,
            ..OracleConfig::default()
        };
        let a = freeze_subsample(g.clone(), &cfg, 0.9, 3, 0).unwrap();
        let b = freeze_subsample(g.clone(), &cfg, 0.9, 3, 0).unwrap();
        let c = freeze_subsample(g.clone(), &cfg, 0.9, 3, 1).unwrap();
        let d = freeze_subsample(g, &cfg, 0.9, 4, 0).unwrap();
        assert!(a.sample().is_some());
        assert_eq!(a.sample(), b.sample());
        assert_ne!(a.sample(), c.sample());
        assert_ne!(a.sample(), d.sample());
    }

    #[test]
    fn identity_sketch_recovers_hessian() {
        let g = logistic(12, 4, 5);
        let n = 12;
        let mut eye = DenseMatrix::zeros(n, n);
        for i in 0..n {
            eye.set(i, i, 1.0);
        }
        let o = FrozenOracle::with_sketch_matrix(g.clone(), eye).unwrap();
        let x = synth::gaussian_vector(4, 6);
        let err = o.evaluate(&x).sub(&g.hessian(&x)).frobenius_norm();
        assert!(err < 1e-15);
    }

    #[test]
    fn rank_one_sketch_is_psd() {
        let g = logistic(30, 3, 7);
        let cfg = OracleConfig {
            kind: OracleKind::Sketch,
            sketch_dim: 1,
            ..OracleConfig::default()
        };
        let o = freeze_sketch(g, &cfg, 0, 0).unwrap();
        let x = [0.3, -0.2, 1.0];
        let h = o.evaluate(&x);
        for k in 0..50 {
            let v = synth::gaussian_vector(3, 100 + k);
            assert!(h.quad_form(&v) >= -1e-12 * crate::numerics::norm_sq(&v));
        }
    }

    #[test]
    fn sketch_doubling_stops_at_rows() {
        let g = logistic(16, 3, 8);
        let cfg = OracleConfig {
            kind: OracleKind::Sketch,
            sketch_dim: 4,
            ..OracleConfig::default()
        };
        let mut o = freeze_sketch(g, &cfg, 0, 0).unwrap();
        o.double_dimension().unwrap();
        assert_eq!(o.sketch_dim(), Some(8));
        o.double_dimension().unwrap();
        assert_eq!(o.sketch_dim(), Some(16));
        assert!(matches!(
            o.double_dimension(),
            Err(Error::SketchDimExceedsRows { requested: 32, rows: 16 })
        ));
    }

    #[test]
    fn exact_oracle_has_no_error() {
        let g = logistic(20, 3, 9);
        let o = FrozenOracle::exact(g);
        assert_eq!(oracle_error(&o, &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(o.declared_error(), 0.0);
    }
}
