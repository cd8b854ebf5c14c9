//! Gaussian quadrature rules via the Golub–Welsch eigenvalue method.
//!
//! Nodes are the eigenvalues of the symmetric Jacobi matrix of the
//! orthogonal-polynomial recurrence; weights come from the first components
//! of its eigenvectors. The Hermitian eigensolver from [`crate::algebra`]
//! does the work, so no extra dependencies are involved.

use crate::algebra::{eigh, OperatorMatrix};
use num_complex::Complex64;

/// A quadrature rule: `∫ f ≈ Σ weights[i] · f(nodes[i])`.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds a rule from the three-term recurrence off-diagonals `beta[k]`
/// (Jacobi matrix with zero diagonal) and zeroth moment `mu0`.
fn golub_welsch(betas: &[f64], mu0: f64) -> QuadRule {
    let n = betas.len() + 1;
    let mut j = OperatorMatrix::zeros(n);
    for (k, &b) in betas.iter().enumerate() {
        j[(k, k + 1)] = Complex64::new(b, 0.0);
        j[(k + 1, k)] = Complex64::new(b, 0.0);
    }
    let e = eigh(&j).expect("Jacobi matrix is symmetric");
    let nodes = e.values.clone();
    let weights = (0..n)
        .map(|k| mu0 * e.vectors[(0, k)].norm_sqr())
        .collect();
    QuadRule { nodes, weights }
}

/// Gauss–Legendre on [−1, 1]: exact for polynomials of degree ≤ 2n−1.
///
/// # Panics
/// If `n == 0`.
pub fn gauss_legendre(n: usize) -> QuadRule {
    assert!(n >= 1, "quadrature order must be at least 1");
    let betas: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&betas, 2.0)
}

/// Gauss–Legendre transplanted to [0, 1].
pub fn gauss_legendre_01(n: usize) -> QuadRule {
    let mut rule = gauss_legendre(n);
    for x in &mut rule.nodes {
        *x = 0.5 * (*x + 1.0);
    }
    for w in &mut rule.weights {
        *w *= 0.5;
    }
    rule
}

/// Gauss–Hermite with weight `e^{−x²}` on the whole line:
/// `∫ e^{−x²} f(x) dx ≈ Σ wᵢ f(xᵢ)`.
///
/// # Panics
/// If `n == 0`.
pub fn gauss_hermite(n: usize) -> QuadRule {
    assert!(n >= 1, "quadrature order must be at least 1");
    let betas: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    golub_welsch(&betas, std::f64::consts::PI.sqrt())
}
