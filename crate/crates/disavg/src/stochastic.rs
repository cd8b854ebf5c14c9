//! Bridge-path estimators of the disorder-averaged propagator.
//!
//! The disorder average of `e^{itH(x)}` is exactly equal to a path average
//! of time-ordered operator products over Brownian-bridge realizations; the
//! estimators here discretize that representation on `n` time steps, with
//! bias `O(1/√n)` and statistical error `O(1/√paths)`.
//!
//! Two discretizations are provided: the default ordered product of
//! exponential factors ([`path_propagator`] under [`estimate_s_stochastic`]),
//! and an Euler–Maruyama integrator for the equivalent operator SDE
//! ([`estimate_s_sde`]) retained as a cross-validation of the product form.

use crate::algebra::{expm, OperatorMatrix};
use crate::bridge::{sample_bridge_indexed, BridgePath};
use crate::error::{Error, Result};
use crate::model::DisorderedHamiltonian;
use crate::sampling::{matrix_result, EstimatorResult};
use crate::stats::{chunked_reduce, VectorWelford};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Constant part of every product factor: `(it/n)H₀ − (t²γ²/2n)ΣᵢDᵢ²`.
fn factor_base(model: &DisorderedHamiltonian, t: f64, n: usize) -> OperatorMatrix {
    let inv_n = 1.0 / n as f64;
    let gamma = model.gamma();
    let mut base = model.h0().scaled(Complex64::new(0.0, t * inv_n));
    base.add_scaled(
        Complex64::new(-t * t * gamma * gamma * 0.5 * inv_n, 0.0),
        &model.sum_disorder_sq(),
    );
    base
}

/// One product factor for the step increments `dl` (one per disorder term).
fn path_factor(
    model: &DisorderedHamiltonian,
    t: f64,
    base: &OperatorMatrix,
    dl: &[f64],
) -> OperatorMatrix {
    let mut g = base.clone();
    for (op, &d) in model.disorder_ops().iter().zip(dl) {
        g.add_scaled(Complex64::new(t * model.gamma() * d, 0.0), op);
    }
    expm(&g).expect("factor exponent is finite and well-scaled")
}

/// Time-ordered operator product along one bridge path:
/// `∏ⱼ exp{(it/n)H₀ − (t²γ²/2n)ΣᵢDᵢ² + tγ Σᵢ Δl_j⁽ⁱ⁾ Dᵢ}`,
/// factor `j = 1` applied first (rightmost).
///
/// # Errors
/// `InvalidInput` when the path's disorder-term count differs from the
/// model's.
pub fn path_propagator(
    model: &DisorderedHamiltonian,
    t: f64,
    path: &BridgePath,
) -> Result<OperatorMatrix> {
    if path.num_terms() != model.num_terms() {
        return Err(Error::InvalidInput(format!(
            "path carries {} disorder terms, model has {}",
            path.num_terms(),
            model.num_terms()
        )));
    }
    let n = path.n();
    let base = factor_base(model, t, n);
    let mut dl = vec![0.0f64; model.num_terms()];
    let mut prod = OperatorMatrix::identity(model.dim());
    for j in 0..n {
        for (i, slot) in dl.iter_mut().enumerate() {
            *slot = path.term_increments(i)[j];
        }
        let factor = path_factor(model, t, &base, &dl);
        prod = factor.matmul(&prod);
    }
    Ok(prod)
}

/// Monte Carlo mean of [`path_propagator`] over sampled bridges: estimates
/// `S(t)` with bias `O(1/√n)` and statistical error `O(1/√paths)`.
///
/// # Panics
/// If `n == 0` or `paths < 2`.
pub fn estimate_s_stochastic(
    model: &DisorderedHamiltonian,
    t: f64,
    n: usize,
    paths: u64,
    seed: u64,
) -> EstimatorResult {
    assert!(n >= 1, "need at least one time step");
    assert!(paths >= 2, "need at least two paths for standard errors");
    let dim = model.dim();
    let m = model.num_terms();
    let base = factor_base(model, t, n);
    let acc = chunked_reduce(
        paths,
        || VectorWelford::new(dim * dim),
        |w, p| {
            let path = sample_bridge_indexed(n, m, seed, p);
            let mut dl = vec![0.0f64; m];
            let mut prod = OperatorMatrix::identity(dim);
            for j in 0..n {
                for (i, slot) in dl.iter_mut().enumerate() {
                    *slot = path.term_increments(i)[j];
                }
                let factor = path_factor(model, t, &base, &dl);
                prod = factor.matmul(&prod);
            }
            w.push(prod.as_slice());
        },
        VectorWelford::merge,
    );
    matrix_result(acc, dim, seed)
}

/// Euler–Maruyama cross-validation of the product estimator: integrates
/// `dX = itH₀X ds + tγ Σᵢ Dᵢ X dzᵢ` over `s ∈ [0, 1]` with step `1/n`,
/// where each `zᵢ` follows the bridge SDE `dz = −z/(1−s)·ds + dW`. The
/// drift diverges at `s = 1`, so the final step pins `z` to zero directly.
///
/// # Panics
/// If `n < 2` or `paths < 2`.
pub fn estimate_s_sde(
    model: &DisorderedHamiltonian,
    t: f64,
    n: usize,
    paths: u64,
    seed: u64,
) -> EstimatorResult {
    assert!(n >= 2, "need at least two time steps");
    assert!(paths >= 2, "need at least two paths for standard errors");
    let dim = model.dim();
    let m = model.num_terms();
    let h = 1.0 / n as f64;
    let sqrt_h = h.sqrt();
    let tg = t * model.gamma();
    let acc = chunked_reduce(
        paths,
        || VectorWelford::new(dim * dim),
        |w, p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p);
            let mut z = vec![0.0f64; m];
            let mut x = OperatorMatrix::identity(dim);
            for k in 0..n {
                let s = k as f64 * h;
                // generator for this step: itH₀·h + tγ Σᵢ dzᵢ Dᵢ
                let mut gen = model.h0().scaled(Complex64::new(0.0, t * h));
                for (i, op) in model.disorder_ops().iter().enumerate() {
                    let dz = if k == n - 1 {
                        -z[i]
                    } else {
                        let dw: f64 = {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            sqrt_h * g
                        };
                        -z[i] * h / (1.0 - s) + dw
                    };
                    z[i] += dz;
                    gen.add_scaled(Complex64::new(tg * dz, 0.0), op);
                }
                let update = gen.matmul(&x);
                x.add_scaled(Complex64::new(1.0, 0.0), &update);
            }
            w.push(x.as_slice());
        },
        VectorWelford::merge,
    );
    matrix_result(acc, dim, seed)
}
