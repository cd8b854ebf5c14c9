//! Matrix exponential.
//!
//! Dispatch order:
//! 1. dimension 1: scalar `exp`;
//! 2. dimension 2: exact closed form via the trace shift — this is the hot
//!    path of the stochastic product estimator, which exponentiates tens of
//!    millions of 2×2 factor exponents;
//! 3. normal matrices (commutator test ‖MM† − M†M‖_F ≤ 1e−12·‖M‖_F²):
//!    eigendecomposition, exact up to the eigensolver's accuracy;
//! 4. otherwise: degree-13 diagonal Padé with scaling and squaring, with the
//!    lower-degree approximants 3/5/7/9 for small norms.

use super::{eig_normal, lu_factor, OperatorMatrix};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Relative normality tolerance for the eigendecomposition fast path.
const NORMALITY_TOL: f64 = 1e-12;

/// Computes `e^M`.
///
/// Relative accuracy is ~1e−10 or better in the Frobenius norm for
/// well-conditioned inputs.
///
/// # Errors
/// `InvalidInput` for non-finite entries; `Convergence` if the rational
/// approximant's linear solve breaks down or the required scaling exceeds
/// the supported range (entries astronomically large).
pub fn expm(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    if !m.is_finite() {
        return Err(Error::InvalidInput(
            "expm requires finite matrix entries".into(),
        ));
    }
    let n = m.dim();
    if n == 1 {
        return Ok(OperatorMatrix::from_diagonal(&[m[(0, 0)].exp()]));
    }
    if n == 2 {
        return Ok(expm2(m));
    }
    let fro = m.frobenius_norm();
    if fro == 0.0 {
        return Ok(OperatorMatrix::identity(n));
    }
    if m.normality_defect() <= NORMALITY_TOL * fro * fro {
        if let Some((values, v)) = eig_normal(m) {
            let phases: Vec<Complex64> = values.iter().map(|z| z.exp()).collect();
            let mut w = v.clone();
            w.scale_columns(&phases);
            return Ok(w.matmul(&v.dagger()));
        }
        // Normality test passed but the basis failed its residual check;
        // the rational path below handles it regardless.
    }
    pade_expm(m)
}

/// Exact 2×2 exponential: with τ = tr(M)/2 and Δ = M − τI we have
/// Δ² = q²·I for q² = Δ₀₀² + Δ₀₁Δ₁₀, hence
/// `e^M = e^τ (cosh(q)·I + sinhc(q)·Δ)`.
fn expm2(m: &OperatorMatrix) -> OperatorMatrix {
    let tau = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let d00 = m[(0, 0)] - tau;
    let q2 = d00 * d00 + m[(0, 1)] * m[(1, 0)];
    let q = q2.sqrt();
    let (ch, shc) = if q.norm() <= 0.5 {
        // Series in q²; at |q| = 0.5 the first omitted terms are ~1e−16.
        let mut ch = Complex64::new(0.0, 0.0);
        let mut shc = Complex64::new(0.0, 0.0);
        // cosh: 1/(2k)!, sinhc: 1/(2k+1)!, Horner from k = 7 down.
        for k in (0..=7).rev() {
            let f2k = factorial(2 * k);
            let f2k1 = factorial(2 * k + 1);
            ch = ch * q2 + Complex64::new(1.0 / f2k, 0.0);
            shc = shc * q2 + Complex64::new(1.0 / f2k1, 0.0);
        }
        (ch, shc)
    } else {
        (q.cosh(), q.sinh() / q)
    };
    let scale = tau.exp();
    let mut out = OperatorMatrix::zeros(2);
    out[(0, 0)] = scale * (ch + shc * d00);
    out[(0, 1)] = scale * shc * m[(0, 1)];
    out[(1, 0)] = scale * shc * m[(1, 0)];
    out[(1, 1)] = scale * (ch - shc * d00);
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0f64, |acc, i| acc * i as f64)
}

// Diagonal Padé coefficients and the 1-norm thresholds at which each degree
// keeps the truncation error below double-precision unit roundoff.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Scaling-and-squaring rational approximation for general matrices.
fn pade_expm(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let n = m.dim();
    let norm = m.one_norm();
    let id = OperatorMatrix::identity(n);

    if norm <= THETA_9 {
        let a2 = m.matmul(m);
        // U = M·(odd-coefficient polynomial in A²), V = even polynomial.
        let (u_poly, v) = if norm <= THETA_3 {
            let mut up = id.scaled(real(B3[1]));
            up.add_scaled(real(B3[3]), &a2);
            let mut v = id.scaled(real(B3[0]));
            v.add_scaled(real(B3[2]), &a2);
            (up, v)
        } else {
            let a4 = a2.matmul(&a2);
            if norm <= THETA_5 {
                let mut up = id.scaled(real(B5[1]));
                up.add_scaled(real(B5[3]), &a2);
                up.add_scaled(real(B5[5]), &a4);
                let mut v = id.scaled(real(B5[0]));
                v.add_scaled(real(B5[2]), &a2);
                v.add_scaled(real(B5[4]), &a4);
                (up, v)
            } else {
                let a6 = a2.matmul(&a4);
                if norm <= THETA_7 {
                    let mut up = id.scaled(real(B7[1]));
                    up.add_scaled(real(B7[3]), &a2);
                    up.add_scaled(real(B7[5]), &a4);
                    up.add_scaled(real(B7[7]), &a6);
                    let mut v = id.scaled(real(B7[0]));
                    v.add_scaled(real(B7[2]), &a2);
                    v.add_scaled(real(B7[4]), &a4);
                    v.add_scaled(real(B7[6]), &a6);
                    (up, v)
                } else {
                    let a8 = a2.matmul(&a6);
                    let mut up = id.scaled(real(B9[1]));
                    up.add_scaled(real(B9[3]), &a2);
                    up.add_scaled(real(B9[5]), &a4);
                    up.add_scaled(real(B9[7]), &a6);
                    up.add_scaled(real(B9[9]), &a8);
                    let mut v = id.scaled(real(B9[0]));
                    v.add_scaled(real(B9[2]), &a2);
                    v.add_scaled(real(B9[4]), &a4);
                    v.add_scaled(real(B9[6]), &a6);
                    v.add_scaled(real(B9[8]), &a8);
                    (up, v)
                }
            }
        };
        let u = m.matmul(&u_poly);
        return rational_solve(&u, &v, 0);
    }

    // Degree 13 with scaling by 2^s.
    let s = ((norm / THETA_13).log2().ceil()).max(0.0);
    if s > 64.0 {
        return Err(Error::Convergence {
            operation: "expm scaling",
            residual: norm,
            tolerance: THETA_13 * 2f64.powi(64),
        });
    }
    let s = s as u32;
    let a = m.scaled(real(0.5f64.powi(s as i32)));
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    let mut w1 = a6.scaled(real(B13[13]));
    w1.add_scaled(real(B13[11]), &a4);
    w1.add_scaled(real(B13[9]), &a2);
    let mut w2 = a6.scaled(real(B13[7]));
    w2.add_scaled(real(B13[5]), &a4);
    w2.add_scaled(real(B13[3]), &a2);
    w2.add_scaled(real(B13[1]), &id);
    let mut u_poly = a6.matmul(&w1);
    u_poly.add_scaled(real(1.0), &w2);
    let u = a.matmul(&u_poly);

    let mut z1 = a6.scaled(real(B13[12]));
    z1.add_scaled(real(B13[10]), &a4);
    z1.add_scaled(real(B13[8]), &a2);
    let mut v = a6.matmul(&z1);
    v.add_scaled(real(B13[6]), &a6);
    v.add_scaled(real(B13[4]), &a4);
    v.add_scaled(real(B13[2]), &a2);
    v.add_scaled(real(B13[0]), &id);

    rational_solve(&u, &v, s)
}

/// Solves (V − U)·F = (V + U), then squares `s` times.
fn rational_solve(u: &OperatorMatrix, v: &OperatorMatrix, s: u32) -> Result<OperatorMatrix> {
    let a = v - u;
    let mut f = v + u;
    let factors = lu_factor(&a).map_err(|_| Error::Convergence {
        operation: "expm rational solve",
        residual: f64::INFINITY,
        tolerance: f64::MIN_POSITIVE,
    })?;
    factors.solve_matrix(&mut f);
    for _ in 0..s {
        f = f.matmul(&f);
    }
    Ok(f)
}
