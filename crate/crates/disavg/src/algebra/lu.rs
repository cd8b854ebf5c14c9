//! Complex LU factorization with partial pivoting: linear solves for the
//! rational matrix-exponential approximant and determinants for the path
//! covariance self-checks.

use super::OperatorMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;

pub(crate) struct LuFactors {
    n: usize,
    /// Packed L (unit lower, implicit diagonal) and U.
    lu: Vec<Complex64>,
    /// Row permutation: step `k` swapped rows `k` and `pivots[k]`.
    pivots: Vec<usize>,
    swap_count: usize,
}

/// Factors `m = P·L·U`.
///
/// # Errors
/// `Convergence` when a pivot column is exactly zero (singular input); the
/// callers here only factor matrices that are nonsingular by construction.
pub(crate) fn lu_factor(m: &OperatorMatrix) -> Result<LuFactors> {
    let n = m.dim();
    let mut lu = m.as_slice().to_vec();
    let mut pivots = vec![0usize; n];
    let mut swap_count = 0;

    for k in 0..n {
        let mut best = k;
        let mut best_abs = lu[k * n + k].norm();
        for r in (k + 1)..n {
            let a = lu[r * n + k].norm();
            if a > best_abs {
                best = r;
                best_abs = a;
            }
        }
        pivots[k] = best;
        if best_abs == 0.0 {
            return Err(Error::Convergence {
                operation: "lu factorization pivot",
                residual: 0.0,
                tolerance: f64::MIN_POSITIVE,
            });
        }
        if best != k {
            for j in 0..n {
                lu.swap(k * n + j, best * n + j);
            }
            swap_count += 1;
        }
        let inv_pivot = Complex64::new(1.0, 0.0) / lu[k * n + k];
        for r in (k + 1)..n {
            let factor = lu[r * n + k] * inv_pivot;
            lu[r * n + k] = factor;
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let ukj = lu[k * n + j];
                lu[r * n + j] -= factor * ukj;
            }
        }
    }
    Ok(LuFactors {
        n,
        lu,
        pivots,
        swap_count,
    })
}

impl LuFactors {
    /// Solves `A·X = B` for the matrix `B`, overwriting it with `X`.
    pub(crate) fn solve_matrix(&self, b: &mut OperatorMatrix) {
        let n = self.n;
        assert_eq!(b.dim(), n, "dimension mismatch");
        let bd = b.as_mut_slice();

        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                for j in 0..n {
                    bd.swap(k * n + j, p * n + j);
                }
            }
        }
        // Forward substitution on whole rows keeps the inner loop contiguous.
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let bkj = bd[k * n + j];
                    bd[i * n + j] -= l * bkj;
                }
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[i * n + k];
                if u.re == 0.0 && u.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let bkj = bd[k * n + j];
                    bd[i * n + j] -= u * bkj;
                }
            }
            let inv = Complex64::new(1.0, 0.0) / self.lu[i * n + i];
            for j in 0..n {
                bd[i * n + j] *= inv;
            }
        }
    }
}

/// Determinant via LU; returns 0 for singular input.
pub(crate) fn determinant(m: &OperatorMatrix) -> Complex64 {
    match lu_factor(m) {
        Ok(f) => {
            let mut det = if f.swap_count % 2 == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(-1.0, 0.0)
            };
            for k in 0..f.n {
                det *= f.lu[k * f.n + k];
            }
            det
        }
        Err(_) => Complex64::new(0.0, 0.0),
    }
}
