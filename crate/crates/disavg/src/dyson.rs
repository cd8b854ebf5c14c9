//! Perturbative propagators for weak disorder: the diffusive zeroth order
//! `e^K`, its second-order fluctuation correction, and the completely
//! positive Lindblad evolution of density matrices.
//!
//! The diffusive generator `K = itH₀ − (γ²t²/2)ΣᵢDᵢ²` captures the mean
//! effect of the disorder; the second-order term restores the leading
//! fluctuation contribution through time-ordered integrals of the
//! interaction-picture operators `Dᵢ(s) = e^{sK}Dᵢe^{−sK}`. There is no
//! first-order term: the linear-in-disorder contribution averages to zero,
//! so the expansion proceeds in powers of γ².
//!
//! For density matrices the same truncation arranges into a Lindblad-form
//! generator, giving a completely positive, trace-preserving map by
//! construction. Note the generator used here carries `{Dᵢ², ρ}` in the
//! anticommutator — the only choice that preserves the trace alongside the
//! `DᵢρDᵢ` term — with the Hamiltonian part `−it[H₀, ρ]` matching the
//! `e^{−itH}ρe^{itH}` convention of the Monte Carlo density estimator,
//! which arbitrates the sign.

use crate::algebra::{eig_normal, eigh_values, expm, kron, OperatorMatrix};
use crate::error::{Error, Result};
use crate::model::{diffusive_generator, DisorderedHamiltonian};
use crate::quadrature::gauss_legendre_01;
use num_complex::Complex64;

/// Largest model dimension for which the Lindblad map is exponentiated as a
/// dense superoperator (dimension N²); larger models integrate the master
/// equation with a fixed-step fourth-order scheme instead.
pub(crate) const SUPEROP_MAX_DIM: usize = 32;

/// Fixed step count of the fourth-order integrator used above
/// [`SUPEROP_MAX_DIM`].
const RK4_STEPS: usize = 1000;

/// Zeroth-order (diffusive) approximation of the averaged propagator:
/// `expm(itH₀ − (γ²t²/2)ΣᵢDᵢ²)`.
pub fn diffusive_propagator(model: &DisorderedHamiltonian, t: f64) -> Result<OperatorMatrix> {
    expm(&diffusive_generator(model, t))
}

/// Writes `acc += w · (d ∘ p·qᵀ)` entrywise, i.e. the interaction-picture
/// conjugation `e^{sΛ} d e^{−sΛ}` with `p[a] = e^{s·λ_a}`, `q[b] = e^{−s·λ_b}`.
fn accumulate_phased(
    acc: &mut OperatorMatrix,
    d: &OperatorMatrix,
    p: &[Complex64],
    q: &[Complex64],
    w: f64,
) {
    let n = d.dim();
    let dst = acc.as_mut_slice();
    let src = d.as_slice();
    for a in 0..n {
        let wp = p[a] * w;
        for b in 0..n {
            dst[a * n + b] += src[a * n + b] * wp * q[b];
        }
    }
}

fn phase_vectors(lams: &[Complex64], s: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let p: Vec<Complex64> = lams.iter().map(|&l| (l * s).exp()).collect();
    let q: Vec<Complex64> = lams.iter().map(|&l| (-l * s).exp()).collect();
    (p, q)
}

/// Second-order correction factor `C` (in the eigenbasis of `K`) such that
/// the corrected propagator is `e^K · V C V†`.
fn correction_eigenbasis(
    model: &DisorderedHamiltonian,
    t: f64,
    lams: &[Complex64],
    vectors: &OperatorMatrix,
    quad_nodes: usize,
) -> OperatorMatrix {
    let dim = model.dim();
    let rule = gauss_legendre_01(quad_nodes);
    let vd = vectors.dagger();
    let d_tilde: Vec<OperatorMatrix> = model
        .disorder_ops()
        .iter()
        .map(|d| vd.matmul(d).matmul(vectors))
        .collect();

    let mut double_acc = OperatorMatrix::zeros(dim);
    let mut single_acc = OperatorMatrix::zeros(dim);
    for a in 0..quad_nodes {
        let sa = rule.nodes[a];
        let wa = rule.weights[a];
        let (pa, qa) = phase_vectors(lams, sa);
        // D̃ᵢ(s_a) for every term, reused by both integrals
        let dta: Vec<OperatorMatrix> = d_tilde
            .iter()
            .map(|d| {
                let mut m = OperatorMatrix::zeros(dim);
                accumulate_phased(&mut m, d, &pa, &qa, 1.0);
                m
            })
            .collect();
        // inner integral ∫₀¹ D̃ᵢ(s_a·u) du per term
        let mut inner: Vec<OperatorMatrix> = vec![OperatorMatrix::zeros(dim); d_tilde.len()];
        for b in 0..quad_nodes {
            let s = sa * rule.nodes[b];
            let wb = rule.weights[b];
            let (p, q) = phase_vectors(lams, s);
            for (acc, d) in inner.iter_mut().zip(&d_tilde) {
                accumulate_phased(acc, d, &p, &q, wb);
            }
        }
        for (i, dt) in dta.iter().enumerate() {
            // triangle ∬_{s₂<s₁}: outer node s₁ = s_a, Jacobian s_a, with
            // D̃ᵢ(s₂) applied to the left of D̃ᵢ(s₁)
            double_acc.add_scaled(Complex64::new(wa * sa, 0.0), &inner[i].matmul(dt));
            single_acc.add_scaled(Complex64::new(wa, 0.0), &dt.matmul(dt));
        }
    }

    let g2t2 = (model.gamma() * t).powi(2);
    assemble_correction(dim, &double_acc, &single_acc, g2t2)
}

fn assemble_correction(
    dim: usize,
    double_acc: &OperatorMatrix,
    single_acc: &OperatorMatrix,
    g2t2: f64,
) -> OperatorMatrix {
    let mut corr = OperatorMatrix::identity(dim);
    corr.add_scaled(Complex64::new(-g2t2, 0.0), double_acc);
    corr.add_scaled(Complex64::new(g2t2 / 2.0, 0.0), single_acc);
    corr
}

/// Correction factor in the original basis, evaluating `e^{±sK}` at every
/// quadrature node; used when `K` is not normal.
fn correction_nodes(
    model: &DisorderedHamiltonian,
    k: &OperatorMatrix,
    t: f64,
    quad_nodes: usize,
) -> Result<OperatorMatrix> {
    let dim = model.dim();
    let rule = gauss_legendre_01(quad_nodes);
    let conjugated = |s: f64| -> Result<Vec<OperatorMatrix>> {
        let fwd = expm(&k.scaled(Complex64::new(s, 0.0)))?;
        let bwd = expm(&k.scaled(Complex64::new(-s, 0.0)))?;
        Ok(model
            .disorder_ops()
            .iter()
            .map(|d| fwd.matmul(d).matmul(&bwd))
            .collect())
    };

    let mut double_acc = OperatorMatrix::zeros(dim);
    let mut single_acc = OperatorMatrix::zeros(dim);
    for a in 0..quad_nodes {
        let sa = rule.nodes[a];
        let wa = rule.weights[a];
        let dta = conjugated(sa)?;
        let mut inner: Vec<OperatorMatrix> = vec![OperatorMatrix::zeros(dim); dta.len()];
        for b in 0..quad_nodes {
            let ds = conjugated(sa * rule.nodes[b])?;
            for (acc, d) in inner.iter_mut().zip(&ds) {
                acc.add_scaled(Complex64::new(rule.weights[b], 0.0), d);
            }
        }
        for (i, dt) in dta.iter().enumerate() {
            double_acc.add_scaled(Complex64::new(wa * sa, 0.0), &inner[i].matmul(dt));
            single_acc.add_scaled(Complex64::new(wa, 0.0), &dt.matmul(dt));
        }
    }

    let g2t2 = (model.gamma() * t).powi(2);
    Ok(assemble_correction(dim, &double_acc, &single_acc, g2t2))
}

pub(crate) fn second_order_with_route(
    model: &DisorderedHamiltonian,
    t: f64,
    quad_nodes: usize,
    force_node_route: bool,
) -> Result<OperatorMatrix> {
    assert!(quad_nodes >= 2, "need at least two quadrature nodes");
    let k = diffusive_generator(model, t);
    let ek = expm(&k)?;
    if !force_node_route {
        if let Some((lams, vectors)) = eig_normal(&k) {
            let corr = correction_eigenbasis(model, t, &lams, &vectors, quad_nodes);
            return Ok(ek.matmul(&vectors.matmul(&corr).matmul(&vectors.dagger())));
        }
    }
    let corr = correction_nodes(model, &k, t, quad_nodes)?;
    Ok(ek.matmul(&corr))
}

/// Averaged propagator through second order in the disorder strength:
/// `e^K·[I − γ²t² Σᵢ ∬_{s₂<s₁} Dᵢ(s₂)Dᵢ(s₁) ds + (γ²t²/2) Σᵢ ∫ Dᵢ(s)² ds]`
/// with `Dᵢ(s) = e^{sK}Dᵢe^{−sK}`, integrals by Gauss–Legendre quadrature
/// (the triangle via the substitution `s₂ = s₁·u`).
///
/// When `K` is normal the interaction-picture operators are formed in its
/// eigenbasis; otherwise `e^{±sK}` is evaluated at every node. Quadrature
/// error is below `1e−8` at 64 nodes for `‖K‖ ≲ 20`.
///
/// # Panics
/// If `quad_nodes < 2`.
pub fn second_order_propagator(
    model: &DisorderedHamiltonian,
    t: f64,
    quad_nodes: usize,
) -> Result<OperatorMatrix> {
    second_order_with_route(model, t, quad_nodes, false)
}

/// Applies the Lindblad generator
/// `𝓛(X) = −it[H₀, X] + γ²t² Σᵢ (DᵢXDᵢ − ½{Dᵢ², X})`.
pub(crate) fn apply_lindblad(
    model: &DisorderedHamiltonian,
    t: f64,
    x: &OperatorMatrix,
) -> OperatorMatrix {
    let g2t2 = (model.gamma() * t).powi(2);
    let mut out = model.h0().matmul(x);
    out.add_scaled(Complex64::new(-1.0, 0.0), &x.matmul(model.h0()));
    let mut out = out.scaled(Complex64::new(0.0, -t));
    let dsq = model.sum_disorder_sq();
    out.add_scaled(Complex64::new(-g2t2 / 2.0, 0.0), &dsq.matmul(x));
    out.add_scaled(Complex64::new(-g2t2 / 2.0, 0.0), &x.matmul(&dsq));
    for d in model.disorder_ops() {
        out.add_scaled(Complex64::new(g2t2, 0.0), &d.matmul(x).matmul(d));
    }
    out
}

/// Dense superoperator matrix of the Lindblad generator acting on row-major
/// vectorized operators (`vec(AXB) = (A ⊗ Bᵀ)·vec(X)`).
pub(crate) fn lindblad_superoperator(
    model: &DisorderedHamiltonian,
    t: f64,
) -> Result<OperatorMatrix> {
    let dim = model.dim();
    let id = OperatorMatrix::identity(dim);
    let g2t2 = (model.gamma() * t).powi(2);

    let h0t = model.h0().transpose();
    let mut l = kron(&[model.h0(), &id])?.scaled(Complex64::new(0.0, -t));
    l.add_scaled(Complex64::new(0.0, t), &kron(&[&id, &h0t])?);
    for d in model.disorder_ops() {
        let dt = d.transpose();
        l.add_scaled(Complex64::new(g2t2, 0.0), &kron(&[d, &dt])?);
        let dsq = d.matmul(d);
        l.add_scaled(Complex64::new(-g2t2 / 2.0, 0.0), &kron(&[&dsq, &id])?);
        l.add_scaled(
            Complex64::new(-g2t2 / 2.0, 0.0),
            &kron(&[&id, &dsq.transpose()])?,
        );
    }
    Ok(l)
}

/// Integrates `dρ/du = 𝓛(ρ)` over `u ∈ [0, 1]` with the classical
/// fourth-order scheme in `steps` fixed steps.
pub(crate) fn lindblad_rk4(
    model: &DisorderedHamiltonian,
    t: f64,
    rho0: &OperatorMatrix,
    steps: usize,
) -> OperatorMatrix {
    assert!(steps >= 1);
    let h = 1.0 / steps as f64;
    let mut rho = rho0.clone();
    for _ in 0..steps {
        let k1 = apply_lindblad(model, t, &rho);
        let mut s = rho.clone();
        s.add_scaled(Complex64::new(h / 2.0, 0.0), &k1);
        let k2 = apply_lindblad(model, t, &s);
        let mut s = rho.clone();
        s.add_scaled(Complex64::new(h / 2.0, 0.0), &k2);
        let k3 = apply_lindblad(model, t, &s);
        let mut s = rho.clone();
        s.add_scaled(Complex64::new(h, 0.0), &k3);
        let k4 = apply_lindblad(model, t, &s);
        rho.add_scaled(Complex64::new(h / 6.0, 0.0), &k1);
        rho.add_scaled(Complex64::new(h / 3.0, 0.0), &k2);
        rho.add_scaled(Complex64::new(h / 3.0, 0.0), &k3);
        rho.add_scaled(Complex64::new(h / 6.0, 0.0), &k4);
    }
    rho
}

fn validate_density(model: &DisorderedHamiltonian, rho0: &OperatorMatrix) -> Result<()> {
    if rho0.dim() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "density matrix dimension {} does not match model dimension {}",
            rho0.dim(),
            model.dim()
        )));
    }
    let herm = rho0.hermiticity_error();
    if herm > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "density matrix is not Hermitian (deviation {herm:.3e})"
        )));
    }
    let tr = rho0.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "density matrix trace is {tr}, expected 1"
        )));
    }
    // symmetrize before the spectral test so the 1e−10 Hermiticity slack
    // cannot trip the eigensolver's own (tighter) input check
    let mut sym = rho0.dagger();
    sym.add_scaled(Complex64::new(1.0, 0.0), rho0);
    let sym = sym.scaled(Complex64::new(0.5, 0.0));
    let min_eig = eigh_values(&sym)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 {
        return Err(Error::InvalidInput(format!(
            "density matrix has negative eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(())
}

/// Evolves a density matrix with the completely positive map `e^𝓛`,
/// `𝓛(X) = −it[H₀, X] + γ²t² Σᵢ (DᵢXDᵢ − ½{Dᵢ², X})`.
///
/// The superoperator is exponentiated densely for model dimension ≤ 32;
/// larger models integrate the master equation with a fixed-step
/// fourth-order scheme. The output is symmetrized, preserves the trace to
/// `1e−10`, and is positive semidefinite to `−1e−8`.
///
/// # Errors
/// `InvalidInput` if `rho0` is not Hermitian within `1e−10`, unit-trace
/// within `1e−10`, and positive semidefinite within `−1e−10`.
pub fn lindblad_evolve(
    model: &DisorderedHamiltonian,
    t: f64,
    rho0: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    validate_density(model, rho0)?;
    let dim = model.dim();
    let rho = if dim <= SUPEROP_MAX_DIM {
        let l = lindblad_superoperator(model, t)?;
        let el = expm(&l)?;
        let out = el.apply(rho0.as_slice());
        OperatorMatrix::from_buffer(dim, out)?
    } else {
        lindblad_rk4(model, t, rho0, RK4_STEPS)
    };
    // e^𝓛 preserves Hermiticity analytically; symmetrizing removes the
    // roundoff asymmetry so downstream spectral tests see an exact input
    let mut sym = rho.dagger();
    sym.add_scaled(Complex64::new(1.0, 0.0), &rho);
    Ok(sym.scaled(Complex64::new(0.5, 0.0)))
}
