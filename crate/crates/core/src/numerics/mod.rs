//! Dense/sparse linear algebra and certified solvers.
//!
//! Every reduction goes through [`pairwise_sum`] or [`pairwise_reduce`]. The
//! summation tree depends only on the input length, never on the thread
//! count, so results are bit-identical across runs and machines with the same
//! floating-point semantics.

mod dense;
mod solve;
mod sparse;

use std::ops::Range;

pub use dense::{DenseMatrix, DenseSymMatrix};
pub use solve::{cg_solve, cholesky_solve, spectral_norm_upper, SolveCertificate, DENSE_LIMIT};
pub use sparse::SparseRowMatrix;

const SUM_LEAF: usize = 16;
const PAR_THRESHOLD: usize = 4096;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= SUM_LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(i)` for `i` in `range`, without materializing the terms.
pub fn pairwise_sum_by(range: Range<usize>, f: &impl Fn(usize) -> f64) -> f64 {
    let len = range.end - range.start;
    if len <= SUM_LEAF {
        let mut s = 0.0;
        for i in range {
            s += f(i);
        }
        return s;
    }
    let mid = range.start + len / 2;
    pairwise_sum_by(range.start..mid, f) + pairwise_sum_by(mid..range.end, f)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    pairwise_sum_by(0..a.len(), &|i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_by(0..a.len(), &|i| (a[i] - b[i]) * (a[i] - b[i])).sqrt()
}

/// `a - b`
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + b`
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// `s * x + t * y`
pub fn lincomb(s: f64, x: &[f64], t: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| s * a + t * b).collect()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Deterministic parallel tree reduction over an index range.
///
/// The range is split at its midpoint until pieces are at most `leaf` long;
/// `leaf_fn` handles each piece and `combine` merges siblings left-to-right.
/// Large subtrees are evaluated with `rayon::join`, which does not change the
/// shape of the tree.
pub fn pairwise_reduce<T, L, C>(range: Range<usize>, leaf: usize, leaf_fn: &L, combine: &C) -> T
where
    T: Send,
    L: Fn(Range<usize>) -> T + Sync,
    C: Fn(T, T) -> T + Sync,
{
    let len = range.end - range.start;
    if len <= leaf.max(1) {
        return leaf_fn(range);
    }
    let mid = range.start + len / 2;
    let (left, right) = if len >= PAR_THRESHOLD {
        rayon::join(
            || pairwise_reduce(range.start..mid, leaf, leaf_fn, combine),
            || pairwise_reduce(mid..range.end, leaf, leaf_fn, combine),
        )
    } else {
        (
            pairwise_reduce(range.start..mid, leaf, leaf_fn, combine),
            pairwise_reduce(mid..range.end, leaf, leaf_fn, combine),
        )
    };
    combine(left, right)
}

/// Element-wise vector sum as a `combine` for [`pairwise_reduce`].
pub fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(&b) {
        *x += y;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact_small_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
        assert_eq!(pairwise_sum_by(0..1000, &|i| xs[i]), 500500.0);
    }

    #[test]
    fn pairwise_sum_is_more_accurate_than_naive() {
        let xs = vec![0.1; 1_000_000];
        let naive: f64 = xs.iter().sum();
        let pw = pairwise_sum(&xs);
        assert!((pw - 100000.0).abs() < (naive - 100000.0).abs());
        assert!((pw - 100000.0).abs() < 1e-8);
    }

    #[test]
    fn pairwise_reduce_is_independent_of_thread_count() {
        let n = 100_000;
        let leaf = |r: Range<usize>| {
            let mut s = 0.0;
            for i in r {
                s += (i as f64).sin();
            }
            s
        };
        let combine = |a: f64, b: f64| a + b;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| pairwise_reduce(0..n, 64, &leaf, &combine));
        let b = four.install(|| pairwise_reduce(0..n, 64, &leaf, &combine));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
