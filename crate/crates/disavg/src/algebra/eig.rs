//! Hermitian and normal-matrix eigendecompositions via cyclic Jacobi.
//!
//! Jacobi iteration is slower than tridiagonalization-based solvers but is
//! simple, numerically robust (eigenvectors orthogonal to machine precision),
//! and has no external dependencies. Matrix dimensions in this crate stay in
//! the hundreds, where cubic-per-sweep cost is acceptable.

use super::OperatorMatrix;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix: `M = V · diag(values) · V†`.
pub struct HermitianEig {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose `k`-th column is the eigenvector of `values[k]`.
    pub vectors: OperatorMatrix,
}

/// Relative Hermiticity tolerance accepted by [`eigh`].
const HERMITICITY_TOL: f64 = 1e-8;
/// Off-diagonal Frobenius norm (relative to ‖M‖_F) at which sweeps stop.
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a Hermitian matrix.
///
/// # Errors
/// `InvalidInput` if `m` is not Hermitian within `1e-8` relative to its
/// scale; `Convergence` if the sweep budget is exhausted (not observed in
/// practice).
pub fn eigh(m: &OperatorMatrix) -> Result<HermitianEig> {
    let (values, vectors) = jacobi(m, true)?;
    Ok(HermitianEig {
        values,
        vectors: vectors.expect("vectors requested"),
    })
}

/// Eigenvalues only, ascending. Roughly halves the work of [`eigh`] by not
/// accumulating the unitary — the per-sample hot path of the trace and
/// form-factor estimators.
pub fn eigh_values(m: &OperatorMatrix) -> Result<Vec<f64>> {
    Ok(jacobi(m, false)?.0)
}

fn jacobi(
    m: &OperatorMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<OperatorMatrix>)> {
    let n = m.dim();
    let scale = m.frobenius_norm().max(1.0);
    if m.hermiticity_error() > HERMITICITY_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "eigh requires a Hermitian matrix (defect {:.3e})",
            m.hermiticity_error()
        )));
    }

    // Work on the Hermitian average so tiny input asymmetry cannot bias the
    // iteration; force the diagonal real.
    let mut a = OperatorMatrix::from_fn(n, |i, j| {
        if i == j {
            Complex64::new(m[(i, j)].re, 0.0)
        } else {
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        }
    });
    let mut v = want_vectors.then(|| OperatorMatrix::identity(n));

    let fro = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = OFF_DIAGONAL_TOL * fro;

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            let (values, perm) = sorted_diagonal(&a);
            let vectors = v.map(|v| permute_columns(&v, &perm));
            return Ok((values, vectors));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, v.as_mut(), p, q);
            }
        }
    }
    Err(Error::Convergence {
        operation: "eigh jacobi sweeps",
        residual: off_diagonal_norm(&a),
        tolerance: target,
    })
}

fn off_diagonal_norm(a: &OperatorMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation annihilating the (p, q) entry.
fn rotate(a: &mut OperatorMatrix, v: Option<&mut OperatorMatrix>, p: usize, q: usize) {
    let n = a.dim();
    let apq = a[(p, q)];
    let beta = apq.norm();
    if beta == 0.0 {
        return;
    }
    let u = apq / beta; // unit phase of the pivot entry
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * beta);
    let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;
    let su = u * sn; // phase-carrying sine
    let subar = su.conj();

    let data = a.as_mut_slice();
    // Column update: A ← A·J with J[:,p] = (c, −s·ū), J[:,q] = (s·u, c).
    for r in 0..n {
        let mrp = data[r * n + p];
        let mrq = data[r * n + q];
        data[r * n + p] = mrp * cs - mrq * subar;
        data[r * n + q] = mrp * su + mrq * cs;
    }
    // Row update: A ← J†·A.
    for r in 0..n {
        let mpr = data[p * n + r];
        let mqr = data[q * n + r];
        data[p * n + r] = mpr * cs - mqr * su;
        data[q * n + r] = mpr * subar + mqr * cs;
    }
    // The 2×2 pivot block is known in closed form; writing it explicitly
    // removes the rounding drift of the two-pass update.
    let bpp = app * cs * cs - 2.0 * beta * cs * sn + aqq * sn * sn;
    let bqq = app * sn * sn + 2.0 * beta * cs * sn + aqq * cs * cs;
    data[p * n + p] = Complex64::new(bpp, 0.0);
    data[q * n + q] = Complex64::new(bqq, 0.0);
    data[p * n + q] = Complex64::new(0.0, 0.0);
    data[q * n + p] = Complex64::new(0.0, 0.0);

    if let Some(v) = v {
        let vd = v.as_mut_slice();
        for r in 0..n {
            let vrp = vd[r * n + p];
            let vrq = vd[r * n + q];
            vd[r * n + p] = vrp * cs - vrq * subar;
            vd[r * n + q] = vrp * su + vrq * cs;
        }
    }
}

fn sorted_diagonal(a: &OperatorMatrix) -> (Vec<f64>, Vec<usize>) {
    let n = a.dim();
    let mut idx: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    idx.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    (idx.iter().map(|&i| diag[i]).collect(), idx)
}

fn permute_columns(v: &OperatorMatrix, perm: &[usize]) -> OperatorMatrix {
    let n = v.dim();
    OperatorMatrix::from_fn(n, |i, j| v[(i, perm[j])])
}

/// Eigendecomposition `M = V · diag(λ) · V†` for a *normal* matrix, via
/// simultaneous diagonalization of the Hermitian and anti-Hermitian parts.
///
/// Returns `None` when the computed decomposition fails its own residual
/// check (e.g. the input was not actually normal); callers fall back to a
/// rational approximation in that case.
pub(crate) fn eig_normal(m: &OperatorMatrix) -> Option<(Vec<Complex64>, OperatorMatrix)> {
    let n = m.dim();
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return Some((
            vec![Complex64::new(0.0, 0.0); n],
            OperatorMatrix::identity(n),
        ));
    }

    // M = A + iB with A, B Hermitian; for normal M they commute and share an
    // eigenbasis.
    let md = m.dagger();
    let mut a = m.clone();
    a.add_scaled(Complex64::new(1.0, 0.0), &md);
    let a = a.scaled(Complex64::new(0.5, 0.0));
    let mut b = m.clone();
    b.add_scaled(Complex64::new(-1.0, 0.0), &md);
    let b = b.scaled(Complex64::new(0.0, -0.5));

    let ea = eigh(&a).ok()?;
    let mut v = ea.vectors;

    // Rotate within each degenerate eigenspace of A to diagonalize B there.
    let bp = v.dagger().matmul(&b).matmul(&v);
    let tol_cluster = 1e-10 * fro.max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && ea.values[end] - ea.values[end - 1] <= tol_cluster {
            end += 1;
        }
        let len = end - start;
        if len > 1 {
            let block = OperatorMatrix::from_fn(len, |i, j| bp[(start + i, start + j)]);
            let eb = eigh(&block).ok()?;
            rotate_column_block(&mut v, start, &eb.vectors);
        }
        start = end;
    }

    // Self-validating: residual off-diagonal mass of V†MV decides whether
    // the basis is trusted.
    let r = v.dagger().matmul(m).matmul(&v);
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += r[(i, j)].norm_sqr();
            }
        }
    }
    if off.sqrt() > 1e-11 * fro.max(1.0) {
        return None;
    }
    let values = (0..n).map(|i| r[(i, i)]).collect();
    Some((values, v))
}

/// Replaces columns `[start, start + u.dim())` of `v` by their product with `u`.
fn rotate_column_block(v: &mut OperatorMatrix, start: usize, u: &OperatorMatrix) {
    let n = v.dim();
    let k = u.dim();
    let old: Vec<Vec<Complex64>> = (0..k)
        .map(|c| (0..n).map(|r| v[(r, start + c)]).collect())
        .collect();
    for c in 0..k {
        for r in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..k {
                acc += old[l][r] * u[(l, c)];
            }
            v[(r, start + c)] = acc;
        }
    }
}
