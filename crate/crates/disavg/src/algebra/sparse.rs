//! Sparse operators in compressed-row form and the action of their
//! exponential on a vector.
//!
//! The four-copy generators live in dimension N⁴; densifying them just to
//! read off one matrix element of the exponential would be wasteful. The
//! action `e^M v` is computed by scaling (substeps of norm ≲ 1) and a
//! truncated Taylor series per substep, which is accurate and cheap for the
//! moderately-sized dissipative generators used here.

use super::OperatorMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Square sparse matrix, compressed sparse row storage.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseOperator {
    /// Builds from coordinate triplets; duplicate positions are summed,
    /// exact zeros dropped.
    ///
    /// # Errors
    /// `InvalidInput` for `dim == 0`, out-of-range indices, or non-finite
    /// values.
    pub fn from_triplets(
        dim: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("sparse dimension must be ≥ 1".into()));
        }
        let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::InvalidInput(format!(
                    "sparse index ({r}, {c}) out of range for dim {dim}"
                )));
            }
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::InvalidInput("sparse entries must be finite".into()));
            }
            entries.push((r, c, v));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_start = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(entries.len());
        let mut rows_tmp: Vec<usize> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (rows_tmp.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows_tmp.push(r);
            cols.push(c);
            vals.push(v);
        }
        // Drop entries that summed to exactly zero.
        let mut k = 0;
        while k < vals.len() {
            if vals[k].re == 0.0 && vals[k].im == 0.0 {
                rows_tmp.remove(k);
                cols.remove(k);
                vals.remove(k);
            } else {
                k += 1;
            }
        }
        for &r in &rows_tmp {
            row_start[r + 1] += 1;
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        Ok(Self {
            dim,
            row_start,
            cols,
            vals,
        })
    }

    /// Converts a dense matrix, keeping only nonzero entries.
    pub fn from_dense(m: &OperatorMatrix) -> Self {
        let n = m.dim();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, triplets).expect("dense entries are in range")
    }

    /// Densifies, placing every stored entry.
    pub fn to_dense(&self) -> OperatorMatrix {
        let mut m = OperatorMatrix::zeros(self.dim);
        for r in 0..self.dim {
            for k in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim, "vector length mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[r] = acc;
        }
        out
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0f64; self.dim];
        for (k, &c) in self.cols.iter().enumerate() {
            col[c] += self.vals[k].norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }
}

/// Maximum Taylor terms per substep before declaring non-convergence.
const APPLY_EXPM_MAX_TERMS: usize = 128;

/// Computes `e^M · v` to relative accuracy ~`tol` without densifying `M`.
///
/// The matrix is split as `M = s · (M/s)` with `s ≈ ‖M‖₁` so each substep
/// has norm ≲ 1, where the Taylor series of the exponential converges
/// rapidly with strictly decreasing terms.
///
/// # Panics
/// If `tol` is not a positive finite number or `v` has the wrong length.
///
/// # Errors
/// `Convergence` (carrying the residual estimate) if a substep fails to
/// reach the term-size cutoff within the iteration cap.
pub fn apply_expm(m: &SparseOperator, v: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    assert!(tol > 0.0 && tol.is_finite(), "tolerance must be positive");
    assert_eq!(v.len(), m.dim(), "vector length mismatch");

    let steps = m.one_norm().ceil().max(1.0) as usize;
    let inv_steps = Complex64::new(1.0 / steps as f64, 0.0);
    let step_tol = tol / (2.0 * steps as f64);

    let mut current = v.to_vec();
    for _ in 0..steps {
        let mut acc = current.clone();
        let mut term = current;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for k in 1..=APPLY_EXPM_MAX_TERMS {
            term = m.apply(&term);
            let scale = inv_steps / k as f64;
            for z in &mut term {
                *z *= scale;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            let term_norm = norm2(&term);
            let acc_norm = norm2(&acc).max(f64::MIN_POSITIVE);
            residual = term_norm / acc_norm;
            if k >= 2 && residual <= step_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                operation: "apply_expm taylor substep",
                residual,
                tolerance: step_tol,
            });
        }
        current = acc;
    }
    Ok(current)
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::expm;
    use crate::testutil::{c, randc, test_rng};
    use rand::Rng;

    #[test]
    fn round_trip_preserves_entries_exactly() {
        let mut rng = test_rng(51);
        let dense = OperatorMatrix::from_fn(6, |i, j| {
            if (i + 2 * j) % 3 == 0 {
                randc(&mut rng)
            } else {
                c(0.0, 0.0)
            }
        });
        let sparse = SparseOperator::from_dense(&dense);
        assert_eq!(sparse.to_dense(), dense);
        assert!(sparse.nnz() < 36);
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let s = SparseOperator::from_triplets(
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.5)), (1, 0, c(0.0, 1.0))],
        )
        .unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.to_dense()[(0, 1)], c(3.0, 0.5));
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(SparseOperator::from_triplets(0, vec![]).is_err());
        assert!(SparseOperator::from_triplets(2, vec![(2, 0, c(1.0, 0.0))]).is_err());
        assert!(SparseOperator::from_triplets(2, vec![(0, 0, c(f64::NAN, 0.0))]).is_err());
    }

    #[test]
    fn apply_and_one_norm_match_dense() {
        let mut rng = test_rng(52);
        let dense = OperatorMatrix::from_fn(9, |_, _| {
            if rng.gen::<f64>() < 0.3 {
                randc(&mut rng)
            } else {
                c(0.0, 0.0)
            }
        });
        let sparse = SparseOperator::from_dense(&dense);
        let v: Vec<_> = (0..9).map(|_| randc(&mut rng)).collect();
        let sv = sparse.apply(&v);
        let dv = dense.apply(&v);
        for (a, b) in sv.iter().zip(&dv) {
            assert!((a - b).norm() <= 1e-14);
        }
        assert!((sparse.one_norm() - dense.one_norm()).abs() <= 1e-14);
    }

    #[test]
    fn exponential_action_identity_cases() {
        let zero = SparseOperator::from_triplets(3, vec![]).unwrap();
        let v = vec![c(1.0, 0.0), c(0.0, -2.0), c(0.5, 0.5)];
        let out = apply_expm(&zero, &v, 1e-12).unwrap();
        for (a, b) in out.iter().zip(&v) {
            assert!((a - b).norm() <= 1e-12);
        }

        let d = SparseOperator::from_triplets(
            3,
            vec![(0, 0, c(0.3, 1.0)), (1, 1, c(-0.2, 0.0)), (2, 2, c(0.0, -2.0))],
        )
        .unwrap();
        let e1 = apply_expm(&d, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)], 1e-12).unwrap();
        assert!((e1[1] - c(-0.2, 0.0).exp()).norm() <= 1e-12);
        assert!(e1[0].norm() <= 1e-14 && e1[2].norm() <= 1e-14);
    }

    #[test]
    fn exponential_action_matches_dense_oracle() {
        let mut rng = test_rng(53);
        for n in [8usize, 50] {
            let dense = OperatorMatrix::from_fn(n, |_, _| {
                if rng.gen::<f64>() < 0.15 {
                    randc(&mut rng)
                } else {
                    c(0.0, 0.0)
                }
            });
            let sparse = SparseOperator::from_dense(&dense);
            let v: Vec<_> = (0..n).map(|_| randc(&mut rng)).collect();

            let fast = apply_expm(&sparse, &v, 1e-10).unwrap();
            let slow = expm(&dense).unwrap().apply(&v);
            let err: f64 = fast
                .iter()
                .zip(&slow)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let scale: f64 = slow.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-9 * scale.max(1.0), "n={n} err={err:.3e}");
        }
    }
}
