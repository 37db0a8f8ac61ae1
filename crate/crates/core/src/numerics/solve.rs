use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{all_finite, axpy, dot, norm, sub, DenseSymMatrix};
use crate::error::{Error, Result};

/// Largest order accepted by [`cholesky_solve`].
pub const DENSE_LIMIT: usize = 4096;

const REFINE_ROUNDS: usize = 4;
const CHOL_RESIDUAL_REL: f64 = 1e-10;

/// A linear-system solution together with its recomputed residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveCertificate {
    pub solution: Vec<f64>,
    /// `||M x - b||`, recomputed from the returned solution.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Cholesky {
    n: usize,
    // lower triangle, row-major, full n*n buffer
    l: Vec<f64>,
}

impl Cholesky {
    fn factor(m: &DenseSymMatrix) -> Result<Self> {
        let n = m.order();
        let scale = (m.trace() / n.max(1) as f64).abs();
        let neg_tol = -1e-12 * scale;
        let floor = (f64::EPSILON * scale).max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let (head, tail) = l.split_at_mut(j * n);
            let row_j = &mut tail[..n];
            for i in 0..j {
                let row_i = &head[i * n..i * n + n];
                let s = m.get(j, i) - dot(&row_j[..i], &row_i[..i]);
                row_j[i] = s / row_i[i];
            }
            let mut pivot = m.get(j, j) - dot(&row_j[..j], &row_j[..j]);
            if !pivot.is_finite() {
                return Err(Error::NonFinite("cholesky pivot"));
            }
            if pivot < neg_tol {
                return Err(Error::NotPositiveDefinite { row: j, pivot });
            }
            if pivot < floor {
                pivot = floor;
            }
            row_j[j] = pivot.sqrt();
        }
        Ok(Cholesky { n, l })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = vec![0.0; n];
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            z[i] = (b[i] - dot(row, &z[..i])) / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            // column i of L below the diagonal
            let col: Vec<f64> = ((i + 1)..n).map(|k| self.l[k * n + i]).collect();
            s -= dot(&col, &x[i + 1..]);
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

fn residual(m: &DenseSymMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    sub(&m.mul_vec(x), b)
}

/// Solves `M x = b` for symmetric positive (semi)definite `M` by Cholesky
/// factorization with iterative refinement.
///
/// Pivots down to `-1e-12 * trace(M) / d` are clamped to a tiny positive
/// floor; anything more negative is reported as `NotPositiveDefinite`.
pub fn cholesky_solve(m: &DenseSymMatrix, b: &[f64]) -> Result<SolveCertificate> {
    let n = m.order();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if n > DENSE_LIMIT {
        return Err(Error::DenseLimitExceeded {
            order: n,
            limit: DENSE_LIMIT,
        });
    }
    if !m.is_finite() || !all_finite(b) {
        return Err(Error::NonFinite("cholesky input"));
    }
    let chol = Cholesky::factor(m)?;
    let mut x = chol.solve(b);
    let fro = m.frobenius_norm();
    let b_norm = norm(b);
    let mut r = residual(m, &x, b);
    let mut r_norm = norm(&r);
    let mut rounds = 0;
    while rounds < REFINE_ROUNDS && r_norm > CHOL_RESIDUAL_REL * (b_norm + fro * norm(&x)) * 1e-3 {
        let dx = chol.solve(&r);
        let mut cand = x.clone();
        axpy(-1.0, &dx, &mut cand);
        let r_cand = residual(m, &cand, b);
        let cand_norm = norm(&r_cand);
        rounds += 1;
        if !(cand_norm < r_norm) {
            break;
        }
        x = cand;
        r = r_cand;
        r_norm = cand_norm;
    }
    if !all_finite(&x) || !r_norm.is_finite() {
        return Err(Error::NonFinite("cholesky solution"));
    }
    let converged = r_norm <= CHOL_RESIDUAL_REL * (b_norm + fro * norm(&x));
    Ok(SolveCertificate {
        solution: x,
        residual_norm: r_norm,
        iterations: 1 + rounds,
        converged,
    })
}

/// Conjugate gradients on a symmetric positive semidefinite operator.
///
/// Stops once the recomputed residual satisfies `||A x - b|| <= tol ||b||`,
/// or after `max_iters` iterations with `converged = false` and the best
/// iterate seen. A curvature `p'Ap` that is not positive relative to the
/// largest Rayleigh quotient seen so far is reported as `BreakdownDetected`.
pub fn cg_solve(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<SolveCertificate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTolerance(format!("cg tolerance {tol}")));
    }
    let n = b.len();
    let b_norm = norm(b);
    let target = tol * b_norm;
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(SolveCertificate {
            solution: x,
            residual_norm: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut best = (x.clone(), b_norm);
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut max_rayleigh: f64 = 0.0;
    let mut it = 0;
    while it < max_iters {
        let ap = apply(&p);
        if ap.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: ap.len(),
            });
        }
        let pap = dot(&p, &ap);
        let pp = dot(&p, &p);
        if !pap.is_finite() {
            return Err(Error::NonFinite("cg curvature"));
        }
        max_rayleigh = max_rayleigh.max(pap / pp);
        if pap <= 4.0 * f64::EPSILON * max_rayleigh * pp || pap <= 0.0 {
            return Err(Error::BreakdownDetected {
                iteration: it,
                curvature: pap,
            });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        it += 1;
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            // confirm against the true residual; restart if they disagree
            let true_r = sub(b, &apply(&x));
            let true_norm = norm(&true_r);
            if true_norm < best.1 {
                best = (x.clone(), true_norm);
            }
            if true_norm <= target {
                break;
            }
            r = true_r;
            rr = dot(&r, &r);
            p = r.clone();
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    let final_norm = norm(&sub(&apply(&x), b));
    let (solution, residual_norm) = if final_norm <= best.1 {
        (x, final_norm)
    } else {
        best
    };
    if !all_finite(&solution) {
        return Err(Error::NonFinite("cg solution"));
    }
    Ok(SolveCertificate {
        converged: residual_norm <= target,
        solution,
        residual_norm,
        iterations: it,
    })
}

/// Power-iteration estimate of `||M||_2` for symmetric `M`.
///
/// Returns the largest `||M v||` over the unit iterates, which never exceeds
/// the true norm and converges to it from below.
pub fn spectral_norm_upper(m: &DenseSymMatrix, iters: usize) -> f64 {
    let n = m.order();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let v_norm = norm(&v);
    v.iter_mut().for_each(|x| *x /= v_norm);
    let mut best: f64 = 0.0;
    for _ in 0..iters.max(1) {
        let w = m.mul_vec(&v);
        let w_norm = norm(&w);
        best = best.max(w_norm);
        if w_norm == 0.0 || !w_norm.is_finite() {
            break;
        }
        v = w.into_iter().map(|x| x / w_norm).collect();
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let m = DenseSymMatrix::identity(3);
        let c = cholesky_solve(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.solution, vec![1.0, 2.0, 3.0]);
        assert_eq!(c.residual_norm, 0.0);
        assert!(c.converged);
    }

    #[test]
    fn diagonal_system() {
        let m = DenseSymMatrix::from_diag(&[2.0, 4.0]);
        let c = cholesky_solve(&m, &[2.0, 4.0]).unwrap();
        for x in &c.solution {
            assert!((x - 1.0).abs() <= 2.0 * f64::EPSILON);
        }
    }

    #[test]
    fn cholesky_errors() {
        let m = DenseSymMatrix::from_diag(&[1.0, -1.0]);
        assert!(matches!(
            cholesky_solve(&m, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
        let m = DenseSymMatrix::identity(2);
        assert!(matches!(
            cholesky_solve(&m, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cg_identity_one_iteration() {
        let b = [3.0, -1.0, 0.5];
        let c = cg_solve(&|v| v.to_vec(), &b, 1e-12, 10).unwrap();
        assert_eq!(c.iterations, 1);
        assert_eq!(c.solution, b.to_vec());
    }

    #[test]
    fn cg_singular_operator_never_nan() {
        // kernel along the first coordinate
        let op = |v: &[f64]| vec![0.0, 2.0 * v[1], 3.0 * v[2]];
        let ok = cg_solve(&op, &[0.0, 1.0, 1.0], 1e-12, 50).unwrap();
        assert!(ok.converged);
        assert!(ok.solution.iter().all(|x| x.is_finite()));
        match cg_solve(&op, &[1.0, 1.0, 1.0], 1e-12, 50) {
            Ok(c) => assert!(c.solution.iter().all(|x| x.is_finite())),
            Err(e) => assert!(matches!(e, Error::BreakdownDetected { .. })),
        }
    }

    #[test]
    fn cg_rejects_bad_tolerance() {
        assert!(cg_solve(&|v| v.to_vec(), &[1.0], 0.0, 5).is_err());
    }

    #[test]
    fn spectral_norm_simple_cases() {
        let m = DenseSymMatrix::from_diag(&[3.0, 1.0]);
        assert!((spectral_norm_upper(&m, 200) - 3.0).abs() < 1e-6);
        assert_eq!(spectral_norm_upper(&DenseSymMatrix::zeros(4), 200), 0.0);
        let m = DenseSymMatrix::from_diag(&[-5.0, 5.0, 1.0]);
        assert!((spectral_norm_upper(&m, 200) - 5.0).abs() < 1e-9);
    }
}
