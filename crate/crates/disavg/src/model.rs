//! Disordered Hamiltonian models `H(x) = H₀ + Σⱼ xⱼ Dⱼ`.
//!
//! Includes the 1-D tight-binding chain with site disorder, the diffusive
//! generator `K = itH₀ − (γ²t²/2)ΣⱼDⱼ²` that governs the leading disorder
//! average, tensor-copy models for form factors and OTOCs, and the cyclic
//! copy-swap permutation.

use crate::algebra::{kron, OperatorMatrix};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Hermiticity tolerance enforced on `h0` and every disorder operator.
const HERMITICITY_TOL: f64 = 1e-12;

/// A fixed Hamiltonian plus Gaussian-weighted disorder directions.
///
/// The couplings `xⱼ` are i.i.d. `N(0, γ²)`; `gamma` is their common
/// standard deviation.
#[derive(Clone, Debug)]
pub struct DisorderedHamiltonian {
    h0: OperatorMatrix,
    disorder_ops: Vec<OperatorMatrix>,
    gamma: f64,
}

impl DisorderedHamiltonian {
    /// Validates Hermiticity, matching dimensions, and `gamma ≥ 0`.
    pub fn new(
        h0: OperatorMatrix,
        disorder_ops: Vec<OperatorMatrix>,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "disorder strength must be a finite non-negative number, got {gamma}"
            )));
        }
        let scale = h0.frobenius_norm().max(1.0);
        if h0.hermiticity_error() > HERMITICITY_TOL * scale {
            return Err(Error::InvalidInput(
                "base Hamiltonian must be Hermitian".into(),
            ));
        }
        for (j, d) in disorder_ops.iter().enumerate() {
            if d.dim() != h0.dim() {
                return Err(Error::InvalidInput(format!(
                    "disorder operator {j} has dim {} but h0 has dim {}",
                    d.dim(),
                    h0.dim()
                )));
            }
            let dscale = d.frobenius_norm().max(1.0);
            if d.hermiticity_error() > HERMITICITY_TOL * dscale {
                return Err(Error::InvalidInput(format!(
                    "disorder operator {j} must be Hermitian"
                )));
            }
        }
        Ok(Self {
            h0,
            disorder_ops,
            gamma,
        })
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// Number of disorder directions `m`.
    pub fn num_terms(&self) -> usize {
        self.disorder_ops.len()
    }

    pub fn h0(&self) -> &OperatorMatrix {
        &self.h0
    }

    pub fn disorder_ops(&self) -> &[OperatorMatrix] {
        &self.disorder_ops
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Same model with a different disorder strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.h0.clone(), self.disorder_ops.clone(), gamma)
    }

    /// `Σⱼ Dⱼ²`, the damping operator of the diffusive generator.
    pub fn sum_disorder_sq(&self) -> OperatorMatrix {
        let mut s = OperatorMatrix::zeros(self.dim());
        for d in &self.disorder_ops {
            s.add_scaled(Complex64::new(1.0, 0.0), &d.matmul(d));
        }
        s
    }
}

/// 1-D tight-binding chain with periodic boundary conditions and one site
/// projector per lattice site as disorder directions:
/// `h0 = 2I − Σⱼ(|j+1⟩⟨j| + |j⟩⟨j+1|)`, `Dⱼ = |j⟩⟨j|`.
///
/// # Errors
/// `InvalidInput` for `n < 2`.
pub fn build_anderson(n: usize, gamma: f64) -> Result<DisorderedHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "chain length must be at least 2, got {n}"
        )));
    }
    let mut h0 = OperatorMatrix::zeros(n);
    for j in 0..n {
        h0[(j, j)] = Complex64::new(2.0, 0.0);
    }
    for j in 0..n {
        let jp = (j + 1) % n;
        // At n = 2 both bonds connect the same pair, so the hop doubles.
        h0[(jp, j)] += Complex64::new(-1.0, 0.0);
        h0[(j, jp)] += Complex64::new(-1.0, 0.0);
    }
    let disorder_ops = (0..n)
        .map(|j| {
            let mut d = OperatorMatrix::zeros(n);
            d[(j, j)] = Complex64::new(1.0, 0.0);
            d
        })
        .collect();
    DisorderedHamiltonian::new(h0, disorder_ops, gamma)
}

/// One disorder realization: `H₀ + Σⱼ xⱼ Dⱼ`.
///
/// # Errors
/// `InvalidInput` when `x.len() ≠ m`.
pub fn sample_hamiltonian(model: &DisorderedHamiltonian, x: &[f64]) -> Result<OperatorMatrix> {
    if x.len() != model.num_terms() {
        return Err(Error::InvalidInput(format!(
            "coupling vector has length {}, model has {} disorder terms",
            x.len(),
            model.num_terms()
        )));
    }
    let mut h = model.h0.clone();
    for (xj, d) in x.iter().zip(&model.disorder_ops) {
        h.add_scaled(Complex64::new(*xj, 0.0), d);
    }
    Ok(h)
}

/// Diffusive (leading disorder-average) generator
/// `K = itH₀ − (γ²t²/2) Σⱼ Dⱼ²`.
pub fn diffusive_generator(model: &DisorderedHamiltonian, t: f64) -> OperatorMatrix {
    let mut k = model.h0.scaled(Complex64::new(0.0, t));
    let damping = -model.gamma * model.gamma * t * t / 2.0;
    k.add_scaled(Complex64::new(damping, 0.0), &model.sum_disorder_sq());
    k
}

/// Tensor-copy model on `N^copies` dimensions with alternating signs:
/// `h0 → Σ_c (−1)^{c+1} I⊗…⊗h0⊗…⊗I` (copy `c` in slot `c`, slot 1
/// leftmost), and each disorder direction likewise — the same coupling `xⱼ`
/// multiplies all copies, matching a disorder average of a product of
/// forward and backward propagators.
///
/// # Errors
/// `Unsupported` for `copies ∉ {2, 4}`.
pub fn build_copies(model: &DisorderedHamiltonian, copies: usize) -> Result<DisorderedHamiltonian> {
    if copies != 2 && copies != 4 {
        return Err(Error::Unsupported(format!(
            "copy construction is defined for 2 or 4 copies, got {copies}"
        )));
    }
    let h0 = alternating_copy_sum(&model.h0, copies)?;
    let disorder_ops = model
        .disorder_ops
        .iter()
        .map(|d| alternating_copy_sum(d, copies))
        .collect::<Result<Vec<_>>>()?;
    DisorderedHamiltonian::new(h0, disorder_ops, model.gamma)
}

/// `Σ_c (−1)^{c+1} I ⊗ … ⊗ op (slot c) ⊗ … ⊗ I`.
fn alternating_copy_sum(op: &OperatorMatrix, copies: usize) -> Result<OperatorMatrix> {
    let n = op.dim();
    let dim_total = n.pow(copies as u32);
    let mut sum = OperatorMatrix::zeros(dim_total);
    let id = OperatorMatrix::identity(n);
    for c in 0..copies {
        let factors: Vec<&OperatorMatrix> = (0..copies)
            .map(|slot| if slot == c { op } else { &id })
            .collect();
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        sum.add_scaled(Complex64::new(sign, 0.0), &kron(&factors)?);
    }
    Ok(sum)
}

/// Sparse triplets of the diffusive generator for a copy model, built
/// without densifying: the OTOC path needs this at dimension `N⁴`.
pub(crate) fn sparse_copies_generator(
    model: &DisorderedHamiltonian,
    copies: usize,
    t: f64,
) -> Result<crate::algebra::SparseOperator> {
    if copies != 2 && copies != 4 {
        return Err(Error::Unsupported(format!(
            "copy construction is defined for 2 or 4 copies, got {copies}"
        )));
    }
    let n = model.dim();
    let dim_total = n.pow(copies as u32);
    let mut triplets: Vec<(usize, usize, Complex64)> = Vec::new();

    // itH₀ on each copy with alternating signs: one slot varies, the rest
    // are diagonal identity indices.
    let it = Complex64::new(0.0, t);
    let strides: Vec<usize> = (0..copies).map(|c| n.pow((copies - 1 - c) as u32)).collect();
    for c in 0..copies {
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = it * sign;
        for a in 0..n {
            for b in 0..n {
                let v = model.h0[(a, b)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                // enumerate the identity indices of the other slots
                for rest in 0..(dim_total / n) {
                    let (row, col) = embed_index(a, b, c, rest, n, &strides);
                    triplets.push((row, col, coeff * v));
                }
            }
        }
    }

    // −(γ²t²/2) Σⱼ (copy sum of Dⱼ)²: expand the square over copy slots.
    let damping = Complex64::new(-model.gamma * model.gamma * t * t / 2.0, 0.0);
    for d in &model.disorder_ops {
        for c1 in 0..copies {
            for c2 in 0..copies {
                let sign = if (c1 + c2) % 2 == 0 { 1.0 } else { -1.0 };
                let coeff = damping * sign;
                add_two_slot_product(&mut triplets, d, c1, c2, n, copies, &strides, coeff);
            }
        }
    }

    crate::algebra::SparseOperator::from_triplets(dim_total, triplets)
}

/// Row/column of `op` acting in slot `c` while the remaining slots carry the
/// flattened identity index `rest`.
fn embed_index(
    a: usize,
    b: usize,
    c: usize,
    rest: usize,
    n: usize,
    strides: &[usize],
) -> (usize, usize) {
    let copies = strides.len();
    let mut digits = Vec::with_capacity(copies - 1);
    let mut r = rest;
    for _ in 0..copies - 1 {
        digits.push(r % n);
        r /= n;
    }
    let mut row = 0usize;
    let mut col = 0usize;
    let mut di = 0;
    for slot in 0..copies {
        if slot == c {
            row += a * strides[slot];
            col += b * strides[slot];
        } else {
            row += digits[di] * strides[slot];
            col += digits[di] * strides[slot];
            di += 1;
        }
    }
    (row, col)
}

/// Appends triplets of `(op in slot c1)·(op in slot c2)` times `coeff`.
#[allow(clippy::too_many_arguments)]
fn add_two_slot_product(
    triplets: &mut Vec<(usize, usize, Complex64)>,
    op: &OperatorMatrix,
    c1: usize,
    c2: usize,
    n: usize,
    copies: usize,
    strides: &[usize],
    coeff: Complex64,
) {
    let dim_total = n.pow(copies as u32);
    if c1 == c2 {
        let sq = op.matmul(op);
        for a in 0..n {
            for b in 0..n {
                let v = sq[(a, b)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                for rest in 0..(dim_total / n) {
                    let (row, col) = embed_index(a, b, c1, rest, n, strides);
                    triplets.push((row, col, coeff * v));
                }
            }
        }
        return;
    }
    // Distinct slots: op ⊗ op in slots (c1, c2), identity elsewhere.
    for a1 in 0..n {
        for b1 in 0..n {
            let v1 = op[(a1, b1)];
            if v1.re == 0.0 && v1.im == 0.0 {
                continue;
            }
            for a2 in 0..n {
                for b2 in 0..n {
                    let v2 = op[(a2, b2)];
                    if v2.re == 0.0 && v2.im == 0.0 {
                        continue;
                    }
                    for rest in 0..(dim_total / (n * n)) {
                        let (row, col) =
                            embed_two_slots(a1, b1, a2, b2, c1, c2, rest, n, strides);
                        triplets.push((row, col, coeff * v1 * v2));
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn embed_two_slots(
    a1: usize,
    b1: usize,
    a2: usize,
    b2: usize,
    c1: usize,
    c2: usize,
    rest: usize,
    n: usize,
    strides: &[usize],
) -> (usize, usize) {
    let copies = strides.len();
    let mut digits = Vec::with_capacity(copies - 2);
    let mut r = rest;
    for _ in 0..copies - 2 {
        digits.push(r % n);
        r /= n;
    }
    let mut row = 0usize;
    let mut col = 0usize;
    let mut di = 0;
    for slot in 0..copies {
        if slot == c1 {
            row += a1 * strides[slot];
            col += b1 * strides[slot];
        } else if slot == c2 {
            row += a2 * strides[slot];
            col += b2 * strides[slot];
        } else {
            row += digits[di] * strides[slot];
            col += digits[di] * strides[slot];
            di += 1;
        }
    }
    (row, col)
}

/// Permutation matrix cycling copy registers one step to the right:
/// `P |a₁⟩⊗|a₂⟩⊗…⊗|a_c⟩ = |a_c⟩⊗|a₁⟩⊗…⊗|a_{c−1}⟩`, so `P^copies = I`.
///
/// # Panics
/// If `n == 0` or `copies < 2`.
pub fn swap_cycle_operator(n: usize, copies: usize) -> OperatorMatrix {
    assert!(n >= 1, "site dimension must be at least 1");
    assert!(copies >= 2, "need at least two copies to cycle");
    let dim_total = n.pow(copies as u32);
    let mut p = OperatorMatrix::zeros(dim_total);
    for col in 0..dim_total {
        // digits of col, slot 1 (leftmost) is the most significant
        let mut digits = vec![0usize; copies];
        let mut r = col;
        for slot in (0..copies).rev() {
            digits[slot] = r % n;
            r /= n;
        }
        // right cyclic shift: output digits are (a_c, a_1, ..., a_{c-1})
        let mut row = 0usize;
        for slot in 0..copies {
            let src = if slot == 0 { copies - 1 } else { slot - 1 };
            row = row * n + digits[src];
        }
        p[(row, col)] = Complex64::new(1.0, 0.0);
    }
    p
}
