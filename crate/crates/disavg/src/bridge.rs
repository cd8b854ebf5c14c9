//! Discretized Brownian-bridge path measure: exact sampling plus analytic
//! covariance oracles.
//!
//! A bridge on `n` steps is built from i.i.d. Wiener increments
//! `Δwⱼ ~ N(0, 1/n)` as `bⱼ = wⱼ − (j/n)·wₙ`, and the estimators consume its
//! increments `Δlⱼ = bⱼ − bⱼ₋₁`. Sampling this construction directly keeps
//! the finite-`n` measure exact — there is no drift-singular SDE to
//! discretize — and the paths are dimensionless: the disorder strength γ
//! enters only through the operator factors built on top of them.
//!
//! The measure's precision matrix is `n·M` with `M = 2I − P_{n−1}`, the
//! Laplacian-like matrix of the path graph; [`path_matrix_checks`] verifies
//! its spectrum `2 − 2cos(πj/n)`, its determinant `n`, and the inverse
//! relation `M·Cov = (1/n)·I` numerically.

use crate::algebra::{determinant, eigh, OperatorMatrix};
use crate::error::{Error, Result};
use crate::stats::{chunked_reduce, VectorWelford};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// One realization of the discretized bridge for `m` disorder terms.
///
/// `increments[i][j]` is `Δlⱼ` of term `i`; each row sums to zero exactly
/// (the bridge is pinned at both ends), so the partial sums
/// `l_j = Σ_{k≤j} Δl_k` satisfy `l_0 = l_n = 0`.
#[derive(Clone, Debug)]
pub struct BridgePath {
    n: usize,
    increments: Vec<Vec<f64>>,
}

impl BridgePath {
    pub(crate) fn from_increments(increments: Vec<Vec<f64>>) -> Self {
        assert!(!increments.is_empty(), "need at least one disorder term");
        let n = increments[0].len();
        assert!(n >= 1, "need at least one step");
        assert!(increments.iter().all(|row| row.len() == n));
        BridgePath { n, increments }
    }

    /// Number of time steps.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of disorder terms (independent bridges).
    pub fn num_terms(&self) -> usize {
        self.increments.len()
    }

    /// Increment rows, one per disorder term.
    pub fn increments(&self) -> &[Vec<f64>] {
        &self.increments
    }

    /// Increments of one disorder term.
    pub fn term_increments(&self, term: usize) -> &[f64] {
        &self.increments[term]
    }

    /// Bridge values `l_0, …, l_n` of one term (length `n + 1`), by a
    /// left-to-right partial sum so that `l_n` is exactly zero.
    pub fn values(&self, term: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0f64;
        out.push(acc);
        for &d in &self.increments[term] {
            acc += d;
            out.push(acc);
        }
        out
    }
}

/// Draws the increment rows for one path from an already-positioned RNG.
fn draw_increments(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..m)
        .map(|_| {
            if n == 1 {
                // pinned at both ends: the single increment is identically 0
                return vec![0.0];
            }
            let dw: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(rng);
                    scale * g
                })
                .collect();
            let drift = dw.iter().sum::<f64>() / n as f64;
            let mut inc: Vec<f64> = dw[..n - 1].iter().map(|&d| d - drift).collect();
            // The last increment is determined by the others; assigning the
            // negated partial sum pins the endpoint exactly in floating point.
            let pin = -inc.iter().sum::<f64>();
            inc.push(pin);
            inc
        })
        .collect()
}

/// Bridge realization for path `index` of the stream family `seed`.
pub(crate) fn sample_bridge_indexed(n: usize, m: usize, seed: u64, index: u64) -> BridgePath {
    assert!(n >= 1, "need at least one step");
    assert!(m >= 1, "need at least one disorder term");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    BridgePath::from_increments(draw_increments(n, m, &mut rng))
}

/// Samples one discretized bridge per disorder term.
///
/// Equal inputs give bit-identical paths; distinct realizations of the same
/// `(n, m)` family come from distinct seeds (estimators use one RNG stream
/// per path index internally).
///
/// # Panics
/// If `n == 0` or `m == 0`.
pub fn sample_bridge(n: usize, m: usize, seed: u64) -> BridgePath {
    sample_bridge_indexed(n, m, seed, 0)
}

/// Exact covariance of the bridge values `l_j` and `l_jp` on an `n`-step
/// grid: `min{(j/n)(1−jp/n), (jp/n)(1−j/n)}`.
///
/// # Errors
/// `InvalidInput` if `n == 0` or either index exceeds `n`.
pub fn bridge_covariance(n: usize, j: usize, jp: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    if j > n || jp > n {
        return Err(Error::InvalidInput(format!(
            "indices ({j}, {jp}) out of range 0..={n}"
        )));
    }
    let s = j as f64 / n as f64;
    let sp = jp as f64 / n as f64;
    Ok((s * (1.0 - sp)).min(sp * (1.0 - s)))
}

/// Numerical self-test of the path-graph precision matrix `M = 2I − P_{n−1}`.
#[derive(Clone, Debug, Serialize)]
pub struct PathMatrixReport {
    pub n: usize,
    /// Max deviation of the computed spectrum from `2 − 2cos(πj/n)`.
    pub max_eigenvalue_deviation: f64,
    /// Relative deviation of `det(M)` from `n`.
    pub determinant_relative_deviation: f64,
    /// Max entry of `M·Cov − (1/n)·I` with `Cov` from [`bridge_covariance`].
    pub max_inverse_identity_deviation: f64,
}

impl PathMatrixReport {
    /// Largest of the three deviations.
    pub fn max_deviation(&self) -> f64 {
        self.max_eigenvalue_deviation
            .max(self.determinant_relative_deviation)
            .max(self.max_inverse_identity_deviation)
    }
}

/// Builds `M = 2I − P_{n−1}` and verifies its known spectrum, determinant,
/// and inverse relation to the bridge covariance, returning max deviations.
///
/// # Errors
/// `InvalidInput` unless `2 ≤ n ≤ 512`.
pub fn path_matrix_checks(n: usize) -> Result<PathMatrixReport> {
    if !(2..=512).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "n = {n} outside the supported range 2..=512"
        )));
    }
    let dim = n - 1;
    let m = OperatorMatrix::from_fn(dim, |i, j| {
        if i == j {
            Complex64::new(2.0, 0.0)
        } else if i.abs_diff(j) == 1 {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });

    let eig = eigh(&m)?;
    let mut expected: Vec<f64> = (1..n)
        .map(|j| 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    expected.sort_by(|a, b| a.total_cmp(b));
    let max_eigenvalue_deviation = eig
        .values
        .iter()
        .zip(&expected)
        .map(|(&got, &want)| (got - want).abs())
        .fold(0.0f64, f64::max);

    let det = determinant(&m);
    let determinant_relative_deviation = (det - Complex64::new(n as f64, 0.0)).norm() / n as f64;

    // Apply the tridiagonal M to the covariance matrix row-wise:
    // (M·Cov)[a][b] = 2·C[a][b] − C[a−1][b] − C[a+1][b] with C[0][·] and
    // C[n][·] identically zero (pinned endpoints).
    let cov_row = |a: usize| -> Vec<f64> {
        (1..n)
            .map(|b| bridge_covariance(n, a, b).expect("indices in range"))
            .collect()
    };
    let inv_n = 1.0 / n as f64;
    let mut max_inverse_identity_deviation = 0.0f64;
    for a in 1..n {
        let mid = cov_row(a);
        let up = if a > 1 { cov_row(a - 1) } else { vec![0.0; dim] };
        let down = if a + 1 < n { cov_row(a + 1) } else { vec![0.0; dim] };
        for b in 1..n {
            let got = 2.0 * mid[b - 1] - up[b - 1] - down[b - 1];
            let want = if a == b { inv_n } else { 0.0 };
            max_inverse_identity_deviation = max_inverse_identity_deviation.max((got - want).abs());
        }
    }

    Ok(PathMatrixReport {
        n,
        max_eigenvalue_deviation,
        determinant_relative_deviation,
        max_inverse_identity_deviation,
    })
}

/// Empirical-vs-analytic comparison of the bridge covariance on a set of
/// grid indices.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceCheck {
    pub n: usize,
    pub paths: u64,
    pub seed: u64,
    /// Grid indices whose pairwise covariances were sampled.
    pub indices: Vec<usize>,
    /// Analytic covariance per index pair, row-major over `indices`.
    pub analytic: Vec<f64>,
    /// Monte Carlo estimate per index pair.
    pub empirical: Vec<f64>,
    /// Standard error of each estimate.
    pub stderr: Vec<f64>,
    /// Largest absolute deviation across pairs.
    pub max_abs_deviation: f64,
    /// Largest deviation measured in standard errors.
    pub max_sigma_deviation: f64,
    /// True when every pair agrees within four standard errors.
    pub within_four_sigma: bool,
}

/// Samples `paths` bridges and compares the empirical covariance of the
/// values `l_j` (for `j` in `indices`, all pairs) against
/// [`bridge_covariance`].
///
/// # Errors
/// `InvalidInput` if `n == 0`, an index exceeds `n`, `indices` is empty, or
/// `paths < 2`.
pub fn empirical_covariance_check(
    n: usize,
    indices: &[usize],
    paths: u64,
    seed: u64,
) -> Result<CovarianceCheck> {
    if n == 0 {
        return Err(Error::InvalidInput("need at least one step".into()));
    }
    if indices.is_empty() {
        return Err(Error::InvalidInput("need at least one index".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&j| j > n) {
        return Err(Error::InvalidInput(format!(
            "index {bad} out of range 0..={n}"
        )));
    }
    if paths < 2 {
        return Err(Error::InvalidInput(
            "need at least two paths for standard errors".into(),
        ));
    }

    let k = indices.len();
    let acc = chunked_reduce(
        paths,
        || VectorWelford::new(k * k),
        |w, p| {
            let path = sample_bridge_indexed(n, 1, seed, p);
            let values = path.values(0);
            let picked: Vec<f64> = indices.iter().map(|&j| values[j]).collect();
            let mut products = Vec::with_capacity(k * k);
            for &a in &picked {
                for &b in &picked {
                    products.push(Complex64::new(a * b, 0.0));
                }
            }
            w.push(&products);
        },
        VectorWelford::merge,
    );

    let mut analytic = Vec::with_capacity(k * k);
    for &a in indices {
        for &b in indices {
            analytic.push(bridge_covariance(n, a, b).expect("validated above"));
        }
    }
    let empirical: Vec<f64> = acc.entries().iter().map(|e| e.mean().re).collect();
    let stderr: Vec<f64> = acc.entries().iter().map(|e| e.stderr().0).collect();

    let mut max_abs_deviation = 0.0f64;
    let mut max_sigma_deviation = 0.0f64;
    for i in 0..k * k {
        let dev = (empirical[i] - analytic[i]).abs();
        max_abs_deviation = max_abs_deviation.max(dev);
        let sigma = if stderr[i] > 0.0 {
            dev / stderr[i]
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_sigma_deviation = max_sigma_deviation.max(sigma);
    }

    Ok(CovarianceCheck {
        n,
        paths,
        seed,
        indices: indices.to_vec(),
        analytic,
        empirical,
        stderr,
        max_abs_deviation,
        max_sigma_deviation,
        within_four_sigma: max_sigma_deviation <= 4.0,
    })
}
