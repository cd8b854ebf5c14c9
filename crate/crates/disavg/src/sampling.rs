//! Brute-force disorder averaging: the ground-truth oracle every other
//! estimator in the crate is validated against.
//!
//! Couplings are drawn per sample from counter-based RNG streams — stream
//! index = sample index — so results are a pure function of `(seed, sample
//! count)` and cannot depend on how samples are scheduled across threads.
//! Accumulation follows the deterministic chunk-merge contract of
//! [`crate::stats`].

use crate::algebra::{eigh, eigh_values, OperatorMatrix};
use crate::error::{Error, Result};
use crate::model::{sample_hamiltonian, DisorderedHamiltonian};
use crate::quadrature::gauss_hermite;
use crate::stats::{chunked_reduce, ScalarWelford, VectorWelford};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Matrix-valued Monte Carlo mean with entrywise standard errors.
#[derive(Clone, Debug)]
pub struct EstimatorResult {
    /// Entrywise sample mean.
    pub mean: OperatorMatrix,
    /// Standard error of each entry's real part, row-major.
    pub stderr_re: Vec<f64>,
    /// Standard error of each entry's imaginary part, row-major.
    pub stderr_im: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
}

impl EstimatorResult {
    /// Wraps a deterministic matrix in the estimator interface (zero
    /// standard errors, zero samples).
    pub fn exact(mean: OperatorMatrix, seed: u64) -> Self {
        let len = mean.dim() * mean.dim();
        EstimatorResult {
            mean,
            stderr_re: vec![0.0; len],
            stderr_im: vec![0.0; len],
            samples: 0,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn stderr_re_at(&self, i: usize, j: usize) -> f64 {
        self.stderr_re[i * self.dim() + j]
    }

    pub fn stderr_im_at(&self, i: usize, j: usize) -> f64 {
        self.stderr_im[i * self.dim() + j]
    }

    /// Largest standard error across entries and components.
    pub fn max_stderr(&self) -> f64 {
        self.stderr_re
            .iter()
            .chain(&self.stderr_im)
            .fold(0.0f64, |a, &b| a.max(b))
    }

    /// Frobenius distance from `target` with the statistical noise floor
    /// removed: `√max(‖mean − target‖²_F − Σ stderr², 0)`. Estimates the
    /// systematic bias of the estimator when `target` is (near-)exact.
    pub fn debiased_distance(&self, target: &OperatorMatrix) -> f64 {
        let diff_sq = (&self.mean - target).frobenius_norm().powi(2);
        let noise_sq: f64 = self
            .stderr_re
            .iter()
            .chain(&self.stderr_im)
            .map(|s| s * s)
            .sum();
        (diff_sq - noise_sq).max(0.0).sqrt()
    }

    /// True when `|mean − target|` is within `k` standard errors plus an
    /// absolute floor, entrywise and per component.
    pub fn within_stderr(&self, target: &OperatorMatrix, k: f64, floor: f64) -> bool {
        let n = self.dim();
        assert_eq!(target.dim(), n, "dimension mismatch");
        for i in 0..n {
            for j in 0..n {
                let d = self.mean[(i, j)] - target[(i, j)];
                if d.re.abs() > k * self.stderr_re_at(i, j) + floor {
                    return false;
                }
                if d.im.abs() > k * self.stderr_im_at(i, j) + floor {
                    return false;
                }
            }
        }
        true
    }
}

/// Scalar Monte Carlo mean with standard errors per component.
#[derive(Clone, Copy, Debug)]
pub struct ScalarEstimate {
    pub value: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub samples: u64,
    pub seed: u64,
}

/// RNG for one sample: fixed seed, stream = sample index.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the coupling vector of sample `index`.
fn draw_couplings(model: &DisorderedHamiltonian, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = sample_rng(seed, index);
    (0..model.num_terms())
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            model.gamma() * g
        })
        .collect()
}

/// `count` i.i.d. coupling vectors `x ~ N(0, γ²)^m`, deterministic in
/// `(seed, sample index)`.
///
/// # Panics
/// If `count == 0`.
pub fn sample_disorder(model: &DisorderedHamiltonian, count: u64, seed: u64) -> Vec<Vec<f64>> {
    assert!(count >= 1, "need at least one sample");
    (0..count).map(|i| draw_couplings(model, seed, i)).collect()
}

/// Eigendecomposition of the sampled Hamiltonian for one disorder draw.
fn sampled_eig(
    model: &DisorderedHamiltonian,
    seed: u64,
    index: u64,
) -> (Vec<f64>, OperatorMatrix) {
    let x = draw_couplings(model, seed, index);
    let h = sample_hamiltonian(model, &x).expect("coupling length matches by construction");
    let e = eigh(&h).expect("sampled Hamiltonian is Hermitian by construction");
    (e.values, e.vectors)
}

/// One sampled propagator `e^{itH(x)}`, unitary to machine precision.
pub(crate) fn sampled_propagator(
    model: &DisorderedHamiltonian,
    t: f64,
    seed: u64,
    index: u64,
) -> OperatorMatrix {
    let (values, vectors) = sampled_eig(model, seed, index);
    let phases: Vec<Complex64> = values
        .iter()
        .map(|&w| Complex64::new(0.0, t * w).exp())
        .collect();
    let mut u = vectors.clone();
    u.scale_columns(&phases);
    u.matmul(&vectors.dagger())
}

pub(crate) fn matrix_result(w: VectorWelford, dim: usize, seed: u64) -> EstimatorResult {
    let entries = w.entries();
    let samples = entries[0].count();
    let mean_data: Vec<Complex64> = entries.iter().map(|e| e.mean()).collect();
    let mean = OperatorMatrix::from_buffer(dim, mean_data).expect("finite accumulated mean");
    let stderr_re = entries.iter().map(|e| e.stderr().0).collect();
    let stderr_im = entries.iter().map(|e| e.stderr().1).collect();
    EstimatorResult {
        mean,
        stderr_re,
        stderr_im,
        samples,
        seed,
    }
}

/// Monte Carlo estimate of the disorder-averaged propagator
/// `S(t) = E[e^{itH(x)}]`, entrywise mean and standard errors.
///
/// # Panics
/// If `samples < 2`.
pub fn estimate_propagator(
    model: &DisorderedHamiltonian,
    t: f64,
    samples: u64,
    seed: u64,
) -> EstimatorResult {
    assert!(samples >= 2, "need at least two samples for standard errors");
    let dim = model.dim();
    let acc = chunked_reduce(
        samples,
        || VectorWelford::new(dim * dim),
        |w, i| {
            let u = sampled_propagator(model, t, seed, i);
            w.push(u.as_slice());
        },
        VectorWelford::merge,
    );
    matrix_result(acc, dim, seed)
}

fn scalar_estimates(
    ts: &[f64],
    acc: Vec<ScalarWelford>,
    samples: u64,
    seed: u64,
) -> Vec<ScalarEstimate> {
    debug_assert_eq!(ts.len(), acc.len());
    acc.into_iter()
        .map(|w| {
            let (stderr_re, stderr_im) = w.stderr();
            ScalarEstimate {
                value: w.mean(),
                stderr_re,
                stderr_im,
                samples,
                seed,
            }
        })
        .collect()
}

/// Normalized-trace observable `(1/N)·E[tr e^{itH(x)}]` on a whole time
/// grid, reusing one spectrum per sample for every grid point.
///
/// # Panics
/// If `samples < 2` or `ts` is empty.
pub fn estimate_trace_x_series(
    model: &DisorderedHamiltonian,
    ts: &[f64],
    samples: u64,
    seed: u64,
) -> Vec<ScalarEstimate> {
    assert!(samples >= 2, "need at least two samples for standard errors");
    assert!(!ts.is_empty(), "need at least one time point");
    let inv_n = 1.0 / model.dim() as f64;
    let acc = chunked_reduce(
        samples,
        || vec![ScalarWelford::new(); ts.len()],
        |w, i| {
            let x = draw_couplings(model, seed, i);
            let h = sample_hamiltonian(model, &x).expect("coupling length matches");
            let values = eigh_values(&h).expect("Hermitian by construction");
            for (acc_t, &t) in w.iter_mut().zip(ts) {
                let mut tr = Complex64::new(0.0, 0.0);
                for &lam in &values {
                    tr += Complex64::new(0.0, t * lam).exp();
                }
                acc_t.push(tr * inv_n);
            }
        },
        |a, b| {
            a.into_iter()
                .zip(b)
                .map(|(x, y)| x.merge(y))
                .collect::<Vec<_>>()
        },
    );
    scalar_estimates(ts, acc, samples, seed)
}

/// Single-time convenience wrapper over [`estimate_trace_x_series`].
pub fn estimate_trace_x(
    model: &DisorderedHamiltonian,
    t: f64,
    samples: u64,
    seed: u64,
) -> ScalarEstimate {
    estimate_trace_x_series(model, &[t], samples, seed)[0]
}

/// Spectral form factor `(1/N²)·E[|tr e^{itH(x)}|²]` on a time grid.
/// The estimate is real; imaginary standard errors are zero.
///
/// # Panics
/// If `samples < 2` or `ts` is empty.
pub fn estimate_sff_series(
    model: &DisorderedHamiltonian,
    ts: &[f64],
    samples: u64,
    seed: u64,
) -> Vec<ScalarEstimate> {
    assert!(samples >= 2, "need at least two samples for standard errors");
    assert!(!ts.is_empty(), "need at least one time point");
    let inv_n2 = 1.0 / (model.dim() * model.dim()) as f64;
    let acc = chunked_reduce(
        samples,
        || vec![ScalarWelford::new(); ts.len()],
        |w, i| {
            let x = draw_couplings(model, seed, i);
            let h = sample_hamiltonian(model, &x).expect("coupling length matches");
            let values = eigh_values(&h).expect("Hermitian by construction");
            for (acc_t, &t) in w.iter_mut().zip(ts) {
                let mut tr = Complex64::new(0.0, 0.0);
                for &lam in &values {
                    tr += Complex64::new(0.0, t * lam).exp();
                }
                acc_t.push(Complex64::new(tr.norm_sqr() * inv_n2, 0.0));
            }
        },
        |a, b| {
            a.into_iter()
                .zip(b)
                .map(|(x, y)| x.merge(y))
                .collect::<Vec<_>>()
        },
    );
    scalar_estimates(ts, acc, samples, seed)
}

/// Single-time convenience wrapper over [`estimate_sff_series`].
pub fn estimate_sff(
    model: &DisorderedHamiltonian,
    t: f64,
    samples: u64,
    seed: u64,
) -> ScalarEstimate {
    estimate_sff_series(model, &[t], samples, seed)[0]
}

/// Monte Carlo estimate of the disorder-averaged density matrix
/// `ρ(t) = E[e^{−itH}|ψ₀⟩⟨ψ₀|e^{itH}]`.
///
/// Every sample has unit trace exactly, so the mean does too (up to
/// floating-point roundoff).
///
/// # Errors
/// `InvalidInput` if `psi0` does not have unit norm within `1e−12` or its
/// length differs from the model dimension.
///
/// # Panics
/// If `samples < 2`.
pub fn estimate_density(
    model: &DisorderedHamiltonian,
    t: f64,
    psi0: &[Complex64],
    samples: u64,
    seed: u64,
) -> Result<EstimatorResult> {
    assert!(samples >= 2, "need at least two samples for standard errors");
    let dim = model.dim();
    if psi0.len() != dim {
        return Err(Error::InvalidInput(format!(
            "initial state has length {}, model dimension is {dim}",
            psi0.len()
        )));
    }
    let norm: f64 = psi0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "initial state must be normalized (‖ψ₀‖ = {norm})"
        )));
    }

    let acc = chunked_reduce(
        samples,
        || VectorWelford::new(dim * dim),
        |w, i| {
            let (values, vectors) = sampled_eig(model, seed, i);
            // φ = V e^{−itλ} V† ψ₀ via two matrix-vector products
            let mut y = vec![Complex64::new(0.0, 0.0); dim];
            for k in 0..dim {
                let mut acc_k = Complex64::new(0.0, 0.0);
                for r in 0..dim {
                    acc_k += vectors[(r, k)].conj() * psi0[r];
                }
                y[k] = acc_k * Complex64::new(0.0, -t * values[k]).exp();
            }
            let phi = vectors.apply(&y);
            let rho = crate::algebra::outer_product(&phi);
            w.push(rho.as_slice());
        },
        VectorWelford::merge,
    );
    Ok(matrix_result(acc, dim, seed))
}

/// Deterministic quadrature oracle for single-term models:
/// `∫ g_γ(x) e^{itH(x)} dx` by Gauss–Hermite quadrature with the change of
/// variables `x = √2·γ·u`.
///
/// # Errors
/// `Unsupported` unless the model has exactly one disorder term.
pub fn propagator_gauss_hermite(
    model: &DisorderedHamiltonian,
    t: f64,
    nodes: usize,
) -> Result<OperatorMatrix> {
    if model.num_terms() != 1 {
        return Err(Error::Unsupported(format!(
            "quadrature oracle requires exactly one disorder term, model has {}",
            model.num_terms()
        )));
    }
    assert!(nodes >= 1, "need at least one quadrature node");
    let rule = gauss_hermite(nodes);
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let dim = model.dim();
    let mut sum = OperatorMatrix::zeros(dim);
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let x = std::f64::consts::SQRT_2 * model.gamma() * u;
        let h = sample_hamiltonian(model, &[x]).expect("single term");
        let e = eigh(&h).expect("Hermitian by construction");
        let phases: Vec<Complex64> = e
            .values
            .iter()
            .map(|&lam| Complex64::new(0.0, t * lam).exp())
            .collect();
        let mut uexp = e.vectors.clone();
        uexp.scale_columns(&phases);
        let uexp = uexp.matmul(&e.vectors.dagger());
        sum.add_scaled(Complex64::new(w * inv_sqrt_pi, 0.0), &uexp);
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::expm;
    use crate::model::{build_anderson, build_copies};
    use crate::testutil::{assert_close, c};

    fn two_by_two_test_model(gamma: f64) -> DisorderedHamiltonian {
        let h0 = OperatorMatrix::from_buffer(
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let d = OperatorMatrix::from_diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        DisorderedHamiltonian::new(h0, vec![d], gamma).unwrap()
    }

    #[test]
    fn disorder_draws_have_requested_moments() {
        let model = two_by_two_test_model(0.7);
        let n = 100_000u64;
        let draws = sample_disorder(&model, n, 3);
        let mean: f64 = draws.iter().map(|x| x[0]).sum::<f64>() / n as f64;
        let var: f64 = draws.iter().map(|x| x[0] * x[0]).sum::<f64>() / n as f64;
        // 4σ CLT bounds at fixed seed
        assert!(mean.abs() <= 4.0 * 0.7 / (n as f64).sqrt());
        assert!((var - 0.49).abs() <= 0.05 * 0.49);

        let zero = build_anderson(4, 0.0).unwrap();
        for x in sample_disorder(&zero, 10, 5) {
            assert!(x.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn draws_are_deterministic_and_stream_indexed() {
        let model = two_by_two_test_model(1.0);
        let a = sample_disorder(&model, 50, 9);
        let b = sample_disorder(&model, 50, 9);
        assert_eq!(a, b);
        // extending the sample count must not change earlier draws
        let longer = sample_disorder(&model, 80, 9);
        assert_eq!(&longer[..50], &a[..]);
    }

    #[test]
    fn per_sample_propagators_are_unitary() {
        let model = build_anderson(5, 1.3).unwrap();
        let id = OperatorMatrix::identity(5);
        for i in 0..5 {
            let u = sampled_propagator(&model, 1.7, 11, i);
            let prod = u.dagger().matmul(&u);
            assert!((&prod - &id).max_abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_disorder_propagator_is_exact_with_zero_stderr() {
        let model = build_anderson(4, 0.0).unwrap();
        let t = 0.9;
        let r = estimate_propagator(&model, t, 10, 0);
        let want = expm(&model.h0().scaled(c(0.0, t))).unwrap();
        assert!((&r.mean - &want).max_abs() <= 1e-11);
        assert_eq!(r.max_stderr(), 0.0);
        assert_eq!(r.samples, 10);
    }

    #[test]
    fn commuting_model_matches_closed_form() {
        // A = aI, B = bI: S(t) = e^{ita}·e^{−γ²t²b²/2}·I
        let (a, b, gamma, t) = (0.4, 1.1, 0.8, 1.2);
        let h0 = OperatorMatrix::from_diagonal(&[c(a, 0.0); 2]);
        let d = OperatorMatrix::from_diagonal(&[c(b, 0.0); 2]);
        let model = DisorderedHamiltonian::new(h0, vec![d], gamma).unwrap();
        let r = estimate_propagator(&model, t, 4000, 1);
        let phase = c(0.0, t * a).exp() * c(-gamma * gamma * t * t * b * b / 2.0, 0.0).exp();
        let want = OperatorMatrix::from_diagonal(&[phase; 2]);
        assert!(r.within_stderr(&want, 3.0, 1e-12));
    }

    #[test]
    fn monte_carlo_matches_quadrature_oracle() {
        let model = two_by_two_test_model(0.5);
        let t = 1.0;
        let oracle = propagator_gauss_hermite(&model, t, 64).unwrap();
        let r = estimate_propagator(&model, t, 20_000, 2);
        assert!(r.within_stderr(&oracle, 3.0, 1e-12));
        // more nodes should not change the oracle at this precision
        let oracle128 = propagator_gauss_hermite(&model, t, 128).unwrap();
        assert!((&oracle - &oracle128).max_abs() <= 1e-12);
    }

    #[test]
    fn quadrature_oracle_requires_single_term() {
        let model = build_anderson(3, 1.0).unwrap();
        assert!(propagator_gauss_hermite(&model, 1.0, 32).is_err());
    }

    #[test]
    fn estimates_are_thread_count_independent() {
        let model = two_by_two_test_model(0.9);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_propagator(&model, 0.8, 600, 17))
        };
        let a = run(1);
        let b = run(4);
        for (x, y) in a.mean.as_slice().iter().zip(b.mean.as_slice()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        for (x, y) in a.stderr_re.iter().zip(&b.stderr_re) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn trace_estimate_boundary_cases() {
        let model = build_anderson(6, 1.0).unwrap();
        let at_zero = estimate_trace_x(&model, 0.0, 10, 0);
        assert!((at_zero.value - c(1.0, 0.0)).norm() <= 1e-14);
        assert_eq!((at_zero.stderr_re, at_zero.stderr_im), (0.0, 0.0));

        // γ = 0: deterministic free-spectrum sum
        let free = build_anderson(6, 0.0).unwrap();
        let t = 1.4;
        let r = estimate_trace_x(&free, t, 5, 0);
        let want: Complex64 = (0..6)
            .map(|l| {
                let w = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * l as f64 / 6.0).cos();
                c(0.0, t * w).exp()
            })
            .sum::<Complex64>()
            / 6.0;
        assert!((r.value - want).norm() <= 1e-12);
    }

    #[test]
    fn series_matches_single_time_calls_bitwise() {
        let model = build_anderson(4, 1.0).unwrap();
        let ts = [0.3, 0.9, 2.2];
        let series = estimate_trace_x_series(&model, &ts, 300, 7);
        for (k, &t) in ts.iter().enumerate() {
            let single = estimate_trace_x(&model, t, 300, 7);
            assert_eq!(series[k].value.re.to_bits(), single.value.re.to_bits());
            assert_eq!(series[k].value.im.to_bits(), single.value.im.to_bits());
        }
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt_samples() {
        let model = build_anderson(4, 1.0).unwrap();
        let small = estimate_trace_x(&model, 1.0, 2000, 21);
        let large = estimate_trace_x(&model, 1.0, 8000, 21);
        let ratio = large.stderr_re / small.stderr_re;
        assert!(
            (0.4..=0.6).contains(&ratio),
            "quadrupling samples should halve stderr, ratio {ratio}"
        );
    }

    #[test]
    fn form_factor_boundary_cases_and_two_copy_identity() {
        let model = build_anderson(3, 0.6).unwrap();
        let at_zero = estimate_sff(&model, 0.0, 10, 0);
        assert!((at_zero.value - c(1.0, 0.0)).norm() <= 1e-14);

        let free = build_anderson(3, 0.0).unwrap();
        let t = 0.7;
        let det = estimate_sff(&free, t, 5, 0);
        let tr: Complex64 = (0..3)
            .map(|l| {
                let w = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * l as f64 / 3.0).cos();
                c(0.0, t * w).exp()
            })
            .sum();
        assert!((det.value.re - tr.norm_sqr() / 9.0).abs() <= 1e-12);
        assert!(det.value.im == 0.0);

        // SFF equals the normalized trace of the two-copy propagator mean.
        let sff = estimate_sff(&model, t, 10_000, 3);
        let copies = build_copies(&model, 2).unwrap();
        let two = estimate_propagator(&copies, t, 10_000, 4);
        let tr2 = two.mean.trace().re / 9.0;
        let tr2_se: f64 = (0..copies.dim())
            .map(|i| two.stderr_re_at(i, i).powi(2))
            .sum::<f64>()
            .sqrt()
            / 9.0;
        let band = 4.0 * (sff.stderr_re + tr2_se);
        assert!(
            (sff.value.re - tr2).abs() <= band,
            "sff {} vs two-copy {} band {band}",
            sff.value.re,
            tr2
        );
    }

    #[test]
    fn density_estimates_are_physical() {
        let model = build_anderson(4, 0.8).unwrap();
        let mut psi = vec![c(0.0, 0.0); 4];
        psi[0] = c(1.0, 0.0);

        let at_zero = estimate_density(&model, 0.0, &psi, 10, 0).unwrap();
        let projector = crate::algebra::outer_product(&psi);
        assert!((&at_zero.mean - &projector).max_abs() <= 1e-14);

        let r = estimate_density(&model, 0.9, &psi, 500, 1).unwrap();
        assert!((r.mean.trace() - c(1.0, 0.0)).norm() <= 1e-13);
        assert!(r.mean.hermiticity_error() <= 1e-13);

        // γ = 0 keeps the state pure: tr(ρ²) = 1
        let free = build_anderson(4, 0.0).unwrap();
        let pure = estimate_density(&free, 0.9, &psi, 5, 0).unwrap();
        let purity = pure.mean.matmul(&pure.mean).trace().re;
        assert_close(purity, 1.0, 1e-12);
    }

    #[test]
    fn density_rejects_unnormalized_state() {
        let model = build_anderson(3, 1.0).unwrap();
        let bad = vec![c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)];
        assert!(estimate_density(&model, 1.0, &bad, 10, 0).is_err());
        let short = vec![c(1.0, 0.0)];
        assert!(estimate_density(&model, 1.0, &short, 10, 0).is_err());
    }
}
