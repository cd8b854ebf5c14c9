//! Closed-form results for the 1-D tight-binding chain with Gaussian
//! on-site disorder, plus the spectral observables built on them: Bessel
//! trace formulas, density of states via FFT, the diffusive spectral form
//! factor, and the diffusive OTOC amplitude.
//!
//! These are the cross-validation targets for the general machinery: the
//! chain's translation invariance collapses the diffusive and second-order
//! propagators to scalar formulas (`x0_closed`, `x2_closed`,
//! `x_second_order`), so the quadrature engine, the Monte Carlo samplers,
//! and the copy-space constructions can all be checked against explicit
//! functions of `t` and γ.

use crate::algebra::{expm, kron, outer_product, OperatorMatrix, SparseOperator};
use crate::error::{Error, Result};
use crate::model::{
    build_anderson, build_copies, diffusive_generator, sparse_copies_generator,
    swap_cycle_operator,
};
use crate::quadrature::gauss_legendre_01;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Chain length selector for the closed-form trace observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sites {
    Finite(usize),
    /// Thermodynamic limit; lattice sums become Bessel functions.
    Infinite,
}

/// Taper applied before the Fourier transform in [`dos_from_timeseries`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    /// `exp(−(width·t)²/2)`: convolves the spectrum with a Gaussian of
    /// frequency width `width`.
    Gaussian,
    /// `½(1 + cos(πt/T))` on `[−T, T]`.
    Hann,
    /// No taper (truncation ringing reaches the spectrum unfiltered).
    None,
}

/// Complex time series on a uniform grid starting anywhere, with optional
/// per-point standard errors.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    t_grid: Vec<f64>,
    values: Vec<Complex64>,
    stderr: Option<Vec<f64>>,
}

impl TimeSeries {
    /// Validates grid uniformity (spacing deviations ≤ 1e−12), strict
    /// monotonicity, matching lengths, and finiteness.
    pub fn new(
        t_grid: Vec<f64>,
        values: Vec<Complex64>,
        stderr: Option<Vec<f64>>,
    ) -> Result<Self> {
        if t_grid.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid has {} points but {} values",
                t_grid.len(),
                values.len()
            )));
        }
        if let Some(se) = &stderr {
            if se.len() != t_grid.len() {
                return Err(Error::InvalidInput(format!(
                    "grid has {} points but {} standard errors",
                    t_grid.len(),
                    se.len()
                )));
            }
            if se.iter().any(|s| !s.is_finite() || *s < 0.0) {
                return Err(Error::InvalidInput(
                    "standard errors must be finite and non-negative".into(),
                ));
            }
        }
        if t_grid.len() < 2 {
            return Err(Error::InvalidInput("need at least two grid points".into()));
        }
        if t_grid.iter().any(|t| !t.is_finite())
            || values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidInput("grid and values must be finite".into()));
        }
        let dt = t_grid[1] - t_grid[0];
        if dt <= 0.0 {
            return Err(Error::InvalidInput(
                "grid must be strictly increasing".into(),
            ));
        }
        for w in t_grid.windows(2) {
            let step = w[1] - w[0];
            if step <= 0.0 || (step - dt).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "grid spacing varies: {step} vs {dt}"
                )));
            }
        }
        Ok(TimeSeries {
            t_grid,
            values,
            stderr,
        })
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    /// Grid spacing.
    pub fn dt(&self) -> f64 {
        self.t_grid[1] - self.t_grid[0]
    }
}

/// Density of states on a uniform, ascending energy grid, normalized to
/// unit mass.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    omega_grid: Vec<f64>,
    dos: Vec<f64>,
}

impl SpectrumResult {
    pub fn omega_grid(&self) -> &[f64] {
        &self.omega_grid
    }

    pub fn dos(&self) -> &[f64] {
        &self.dos
    }

    pub fn domega(&self) -> f64 {
        self.omega_grid[1] - self.omega_grid[0]
    }

    /// `Σ dos·Δω`.
    pub fn mass(&self) -> f64 {
        self.dos.iter().sum::<f64>() * self.domega()
    }

    /// Largest DOS value.
    pub fn peak(&self) -> f64 {
        self.dos.iter().fold(0.0f64, |a, &b| a.max(b))
    }

    /// Most negative DOS value (0 if none are negative).
    pub fn min_value(&self) -> f64 {
        self.dos.iter().fold(0.0f64, |a, &b| a.min(b))
    }

    /// Fraction of the total |mass| lying outside `[lo, hi]`.
    pub fn mass_outside(&self, lo: f64, hi: f64) -> f64 {
        let outside: f64 = self
            .omega_grid
            .iter()
            .zip(&self.dos)
            .filter(|(&w, _)| w < lo || w > hi)
            .map(|(_, &d)| d.abs())
            .sum();
        let total: f64 = self.dos.iter().map(|d| d.abs()).sum();
        outside / total
    }
}

const BESSEL_SERIES_CUTOFF: f64 = 12.0;
const BESSEL_MAX_ARG: f64 = 1e4;

fn j0_series(x: f64) -> f64 {
    // Σ_l (−1)^l (x/2)^{2l} / (l!)², accumulated through the recurrence
    // term_{l+1} = −term_l · (x/2)² / (l+1)²
    let q = 0.25 * x * x;
    let mut term = 1.0f64;
    let mut acc = 1.0f64;
    for l in 1..=64 {
        term *= -q / ((l * l) as f64);
        acc += term;
        if term.abs() <= 1e-17 * acc.abs().max(1.0) {
            break;
        }
    }
    acc
}

fn j0_integral(x: f64) -> f64 {
    // (1/π)∫₀^π cos(x·sinθ)dθ by the midpoint rule; the integrand extends
    // to a smooth periodic function, so the rule converges spectrally once
    // the node count resolves the oscillation.
    let nodes = 256 + 4 * (x.abs().ceil() as usize);
    let h = std::f64::consts::PI / nodes as f64;
    let mut acc = 0.0f64;
    for k in 0..nodes {
        let theta = (k as f64 + 0.5) * h;
        acc += (x * theta.sin()).cos();
    }
    acc / nodes as f64
}

/// Bessel function of the first kind, order zero, to absolute error
/// ≤ `1e−12`: power series for `|x| ≤ 12`, oscillatory-integral evaluation
/// beyond.
///
/// # Panics
/// If `|x| > 1e4` or `x` is not finite.
pub fn bessel_j0(x: f64) -> f64 {
    assert!(x.is_finite(), "argument must be finite");
    assert!(
        x.abs() <= BESSEL_MAX_ARG,
        "argument {x} outside supported range ±{BESSEL_MAX_ARG}"
    );
    if x.abs() <= BESSEL_SERIES_CUTOFF {
        j0_series(x)
    } else {
        j0_integral(x)
    }
}

/// `e^{2it − γ²t²/2}` — the free phase and diffusive damping common to all
/// the closed-form trace observables.
fn phase_damping(t: f64, gamma: f64) -> Complex64 {
    Complex64::new(-gamma * gamma * t * t / 2.0, 2.0 * t).exp()
}

/// Diffusive-order normalized trace `X₀(t) = (1/N)·tr e^K` for the chain:
/// `e^{2it−γ²t²/2}·(1/N)Σₖ e^{−2it·cos(2πk/N)}`, with the lattice sum
/// becoming `J₀(2t)` at `Sites::Infinite`.
pub fn x0_closed(t: f64, gamma: f64, sites: Sites) -> Complex64 {
    let pd = phase_damping(t, gamma);
    match sites {
        Sites::Infinite => pd * bessel_j0(2.0 * t),
        Sites::Finite(n) => {
            assert!(n >= 1, "need at least one site");
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let c = (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos();
                acc += Complex64::new(0.0, -2.0 * t * c).exp();
            }
            pd * acc / n as f64
        }
    }
}

/// Second-order correction to the normalized trace in the thermodynamic
/// limit: `(γ²t²/2)·X₀(t,∞) − γ²t·e^{2it−γ²t²/2}·sin(2t)/4`.
pub fn x2_closed(t: f64, gamma: f64) -> Complex64 {
    let g2 = gamma * gamma;
    let pd = phase_damping(t, gamma);
    x0_closed(t, gamma, Sites::Infinite) * (g2 * t * t / 2.0)
        - pd * (g2 * t * (2.0 * t).sin() / 4.0)
}

/// Normalized trace through second order in γ:
/// `e^{2it−γ²t²/2}·[(1 + γ²t²/2)·J₀(2t) − (γ²t/4)·sin(2t)]`.
pub fn x_second_order(t: f64, gamma: f64) -> Complex64 {
    let g2 = gamma * gamma;
    let bracket = (1.0 + g2 * t * t / 2.0) * bessel_j0(2.0 * t)
        - (g2 * t / 4.0) * (2.0 * t).sin();
    phase_damping(t, gamma) * bracket
}

/// `∫₀¹ds₁∫₀^{s₁}ds₂ J₀(2t(1−s₁+s₂))·J₀(2t(s₁−s₂))` by Gauss–Legendre
/// quadrature, mapping the triangle through `s₂ = s₁·u`. Equals
/// `sin(2t)/(4t)` analytically.
///
/// # Panics
/// If `quad_nodes < 8`.
pub fn double_bessel_integral(t: f64, quad_nodes: usize) -> f64 {
    assert!(quad_nodes >= 8, "need at least eight quadrature nodes");
    let rule = gauss_legendre_01(quad_nodes);
    let mut acc = 0.0f64;
    for (&s1, &w1) in rule.nodes.iter().zip(&rule.weights) {
        let mut inner = 0.0f64;
        for (&u, &w2) in rule.nodes.iter().zip(&rule.weights) {
            let gap = s1 * (1.0 - u);
            inner += w2 * bessel_j0(2.0 * t * (1.0 - gap)) * bessel_j0(2.0 * t * gap);
        }
        acc += w1 * s1 * inner;
    }
    acc
}

/// Density of states from a propagator trace on `t ∈ [0, T]`:
/// `DOS(ω) = (1/2π)∫X(t)e^{−iωt}dt` by FFT, after extending to negative
/// times with `X(−t) = conj(X(t))` (valid for real symmetric Hamiltonians),
/// applying the chosen taper, and zero-padding eightfold. The result is
/// normalized to unit mass; `band_edge` names the largest |ω| the spectrum
/// must resolve (4 + 5γ for the disordered chain).
///
/// # Errors
/// `InvalidInput` if the series has fewer than 256 points, does not start
/// at `t = 0`, the Nyquist frequency `π/Δt` is below `band_edge`, or a
/// Gaussian window is requested with a non-positive width.
pub fn dos_from_timeseries(
    series: &TimeSeries,
    window: Window,
    width: f64,
    band_edge: f64,
) -> Result<SpectrumResult> {
    if series.len() < 256 {
        return Err(Error::InvalidInput(format!(
            "need at least 256 grid points, got {}",
            series.len()
        )));
    }
    if series.t_grid()[0].abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "series must start at t = 0, got {}",
            series.t_grid()[0]
        )));
    }
    let dt = series.dt();
    let nyquist = std::f64::consts::PI / dt;
    if nyquist < band_edge {
        return Err(Error::InvalidInput(format!(
            "grid too coarse: Nyquist frequency {nyquist:.3} below band edge {band_edge:.3}"
        )));
    }
    if window == Window::Gaussian && !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Gaussian window needs a positive width, got {width}"
        )));
    }

    let p = series.len();
    let t_max = series.t_grid()[p - 1];
    let taper = |t: f64| -> f64 {
        match window {
            Window::Gaussian => (-(width * t).powi(2) / 2.0).exp(),
            Window::Hann => 0.5 * (1.0 + (std::f64::consts::PI * t / t_max).cos()),
            Window::None => 1.0,
        }
    };

    // t = 0 at slot 0, positive times ascending, negative times wrapped to
    // the top of the buffer; pad to a power of two at least eight times the
    // two-sided length so the discrete transform resolves narrow features
    let two_sided = 2 * (p - 1);
    let padded = (8 * two_sided).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); padded];
    for (k, (&t, &v)) in series.t_grid().iter().zip(series.values()).enumerate() {
        let tapered = v * taper(t);
        buf[k] = tapered;
        if k > 0 {
            buf[padded - k] = tapered.conj();
        }
    }

    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);

    // assemble the two-sided spectrum in ascending ω; forward FFT index k
    // carries ω = 2πk/(L·Δt) with the upper half aliased to negative ω
    let half = padded / 2;
    let domega = 2.0 * std::f64::consts::PI / (padded as f64 * dt);
    let scale = dt / (2.0 * std::f64::consts::PI);
    let mut omega_grid = Vec::with_capacity(padded);
    let mut dos = Vec::with_capacity(padded);
    for signed in -(half as i64)..half as i64 {
        let k = signed.rem_euclid(padded as i64) as usize;
        omega_grid.push(signed as f64 * domega);
        dos.push(scale * buf[k].re);
    }

    let mass: f64 = dos.iter().sum::<f64>() * domega;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidInput(format!(
            "spectrum mass {mass} is not positive; input is not a valid trace series"
        )));
    }
    for d in &mut dos {
        *d /= mass;
    }
    Ok(SpectrumResult { omega_grid, dos })
}

/// Largest chain length for which the two-copy diffusive generator (an
/// `N²`-dimensional matrix) is exponentiated densely.
const SFF_MAX_SITES: usize = 40;

/// Largest chain length accepted by the sparse OTOC evaluation (the
/// four-copy space has dimension `N⁴`).
const OTOC_MAX_SITES: usize = 12;

/// Diffusive spectral form factor
/// `(1/N²)·tr exp{itH₀⁽²⁾ − (γ²t²/2)Σⱼ(Dⱼ⁽²⁾)²}` on the doubled chain.
///
/// # Errors
/// `Unsupported` for `N > 40` (the dense `N² × N²` exponential); invalid
/// chain lengths propagate as `InvalidInput`.
pub fn sff_diffusive(n: usize, t: f64, gamma: f64) -> Result<f64> {
    if n > SFF_MAX_SITES {
        return Err(Error::Unsupported(format!(
            "chain length {n} exceeds the dense two-copy limit {SFF_MAX_SITES}"
        )));
    }
    let model = build_anderson(n, gamma)?;
    let doubled = build_copies(&model, 2)?;
    let propagator = expm(&diffusive_generator(&doubled, t))?;
    let tr = propagator.trace();
    let value = tr.re / (n * n) as f64;
    debug_assert!(
        tr.im.abs() <= 1e-10 * tr.re.abs().max(1.0),
        "two-copy trace should be real, got imaginary part {}",
        tr.im
    );
    Ok(value)
}

fn four_copy_index(n: usize, sites: [usize; 4]) -> usize {
    sites.iter().fold(0, |acc, &s| acc * n + s)
}

/// Diffusive out-of-time-order amplitude `⟨1,ℓ,1,ℓ|S₍₄₎(t)|ℓ,1,ℓ,1⟩` on
/// the four-copy chain (sites 1-based; site 1 is the perturbation site),
/// evaluated sparsely: the four-copy generator is assembled in compressed
/// row form and applied to the single basis vector through a scaled Taylor
/// expansion, so the `N⁴`-dimensional propagator is never densified.
///
/// # Errors
/// `InvalidInput` if `ell` is outside `[1, N]`; `Unsupported` for `N > 12`.
pub fn otoc_diffusive(n: usize, t: f64, gamma: f64, ell: usize) -> Result<Complex64> {
    if n > OTOC_MAX_SITES {
        return Err(Error::Unsupported(format!(
            "chain length {n} exceeds the four-copy limit {OTOC_MAX_SITES}"
        )));
    }
    let model = build_anderson(n, gamma)?;
    if ell < 1 || ell > n {
        return Err(Error::InvalidInput(format!(
            "site index {ell} outside 1..={n}"
        )));
    }
    let generator: SparseOperator = sparse_copies_generator(&model, 4, t)?;
    let dim = generator.dim();
    let l = ell - 1;
    let mut ket = vec![Complex64::new(0.0, 0.0); dim];
    ket[four_copy_index(n, [l, 0, l, 0])] = Complex64::new(1.0, 0.0);
    let evolved = crate::algebra::apply_expm(&generator, &ket, 1e-10)?;
    Ok(evolved[four_copy_index(n, [0, l, 0, l])])
}

/// Dense oracle for [`otoc_diffusive`]: evaluates the trace formula
/// `tr[(A⊗B⊗C⊗D)·S₍₄₎(t)·P]` with `A = C = |1⟩⟨1|`, `B = D = |ℓ⟩⟨ℓ|` and
/// `P` the cyclic copy-shift, exponentiating the full `N⁴`-dimensional
/// generator. Exponential in memory — intended for cross-validation at
/// small `N`.
///
/// # Errors
/// `InvalidInput` if `ell` is outside `[1, N]`; `Unsupported` for `N > 6`.
pub fn otoc_diffusive_dense(n: usize, t: f64, gamma: f64, ell: usize) -> Result<Complex64> {
    if n > 6 {
        return Err(Error::Unsupported(format!(
            "dense four-copy oracle limited to 6 sites, got {n}"
        )));
    }
    let model = build_anderson(n, gamma)?;
    if ell < 1 || ell > n {
        return Err(Error::InvalidInput(format!(
            "site index {ell} outside 1..={n}"
        )));
    }
    let quadrupled = build_copies(&model, 4)?;
    let s4 = expm(&diffusive_generator(&quadrupled, t))?;

    let basis_projector = |site: usize| -> OperatorMatrix {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[site] = Complex64::new(1.0, 0.0);
        outer_product(&e)
    };
    let a = basis_projector(0);
    let b = basis_projector(ell - 1);
    let observable = kron(&[&a, &b, &a, &b])?;
    let shift = swap_cycle_operator(n, 4);
    Ok(observable.matmul(&s4).matmul(&shift).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::estimate_sff;
    use crate::testutil::{assert_close, c};

    #[test]
    fn bessel_matches_reference_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert_close(bessel_j0(2.0), 0.223_890_779_141_235_7, 1e-13);
        // first zero
        assert!(bessel_j0(2.404_825_557_695_773).abs() <= 1e-10);
        // symmetry
        assert_eq!(bessel_j0(3.7), bessel_j0(-3.7));
    }

    #[test]
    fn bessel_branches_agree_where_they_meet() {
        for x in [8.0, 10.0, 11.9, 12.0] {
            let series = j0_series(x);
            let integral = j0_integral(x);
            assert!(
                (series - integral).abs() <= 1e-12,
                "x = {x}: series {series} vs integral {integral}"
            );
        }
        // large-argument sanity: |J₀| envelope decays like √(2/πx)
        let x = 1e4;
        let bound = (2.0 / (std::f64::consts::PI * x)).sqrt();
        assert!(bessel_j0(x).abs() <= bound * 1.01);
    }

    #[test]
    #[should_panic(expected = "outside supported range")]
    fn bessel_rejects_huge_arguments() {
        bessel_j0(2e4);
    }

    #[test]
    fn trace_formulas_boundary_values() {
        assert!((x0_closed(0.0, 1.0, Sites::Finite(30)) - c(1.0, 0.0)).norm() <= 1e-14);
        assert!((x0_closed(0.0, 0.3, Sites::Infinite) - c(1.0, 0.0)).norm() <= 1e-14);
        assert!(x2_closed(0.0, 1.0).norm() <= 1e-14);
        assert!(x2_closed(1.7, 0.0).norm() <= 1e-14);
        assert!((x_second_order(0.0, 1.0) - c(1.0, 0.0)).norm() <= 1e-14);

        // γ = 0, t = 1: modulus is |J₀(2)|
        let free = x0_closed(1.0, 0.0, Sites::Infinite);
        assert_close(free.norm(), 0.223_890_779_141_235_7, 1e-13);
        let want = c(0.0, 2.0).exp() * bessel_j0(2.0);
        assert!((free - want).norm() <= 1e-15);
    }

    #[test]
    fn thirty_sites_is_near_thermodynamic_limit() {
        for k in 0..=100 {
            let t = 0.1 * k as f64;
            let finite = x0_closed(t, 1.0, Sites::Finite(30));
            let infinite = x0_closed(t, 1.0, Sites::Infinite);
            assert!(
                (finite - infinite).norm() <= 1e-3,
                "t = {t}: gap {}",
                (finite - infinite).norm()
            );
        }
    }

    #[test]
    fn second_order_formula_is_sum_of_its_pieces() {
        for (t, gamma) in [(2.0, 1.0), (0.7, 0.4), (5.5, 1.3)] {
            let composed = x0_closed(t, gamma, Sites::Infinite) + x2_closed(t, gamma);
            let direct = x_second_order(t, gamma);
            assert!(
                (composed - direct).norm() <= 1e-14,
                "t = {t}, γ = {gamma}: {composed} vs {direct}"
            );
        }
    }

    #[test]
    fn second_order_modulus_respects_damping_bound() {
        let gamma = 1.0;
        for k in 0..=200 {
            let t = 0.05 * k as f64;
            let x = x_second_order(t, gamma).norm();
            let bound = (1.0 + gamma * gamma * t * t / 2.0 + gamma * gamma * t / 4.0)
                * (-gamma * gamma * t * t / 2.0).exp();
            assert!(x <= bound * (1.0 + 1e-12), "t = {t}: {x} > {bound}");
        }
    }

    #[test]
    fn double_bessel_integral_matches_identity() {
        // analytic value sin(2t)/(4t)
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let got = double_bessel_integral(t, 64);
            let want = (2.0 * t).sin() / (4.0 * t);
            assert!(
                (got - want).abs() <= 1e-8,
                "t = {t}: {got} vs {want}"
            );
        }
        // removable singularity endpoints
        assert!((double_bessel_integral(1e-6, 32) - 0.5).abs() <= 1e-6);
        let at_half_pi = double_bessel_integral(std::f64::consts::FRAC_PI_2, 64);
        assert!(at_half_pi.abs() <= 1e-8);
    }

    #[test]
    fn time_series_validation() {
        let grid: Vec<f64> = (0..4).map(|k| k as f64).collect();
        let vals = vec![c(1.0, 0.0); 4];
        assert!(TimeSeries::new(grid.clone(), vals.clone(), None).is_ok());
        assert!(TimeSeries::new(grid.clone(), vals[..3].to_vec(), None).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0, 2.0, 1.5], vals.clone(), None).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0, 2.0, 3.1], vals.clone(), None).is_err());
        assert!(TimeSeries::new(grid.clone(), vals.clone(), Some(vec![0.1; 3])).is_err());
        assert!(TimeSeries::new(grid, vals, Some(vec![-0.1; 4])).is_ok_and(|_| false) == false);
    }

    fn free_chain_series(n_sites: usize, t_max: f64, points: usize) -> TimeSeries {
        let grid: Vec<f64> = (0..points)
            .map(|k| t_max * k as f64 / (points - 1) as f64)
            .collect();
        let values: Vec<Complex64> = grid
            .iter()
            .map(|&t| x0_closed(t, 0.0, Sites::Finite(n_sites)))
            .collect();
        TimeSeries::new(grid, values, None).unwrap()
    }

    #[test]
    fn free_chain_dos_sits_on_the_band() {
        let series = free_chain_series(64, 40.0, 1024);
        let spectrum =
            dos_from_timeseries(&series, Window::Gaussian, 6.0 / 40.0, 4.0).unwrap();
        assert!((spectrum.mass() - 1.0).abs() <= 1e-12);
        assert!(spectrum.mass_outside(-0.2, 4.2) <= 0.02);
        assert!(spectrum.min_value().abs() <= 1e-3 * spectrum.peak());
        // grid is ascending and uniform
        let dw = spectrum.domega();
        for w in spectrum.omega_grid().windows(2) {
            assert!((w[1] - w[0] - dw).abs() <= 1e-12);
        }
    }

    #[test]
    fn diffusive_dos_is_gaussian_convolution_of_free_dos() {
        let gamma = 0.5;
        let (t_max, points, sites) = (40.0, 1024, 64);
        let grid: Vec<f64> = (0..points)
            .map(|k| t_max * k as f64 / (points - 1) as f64)
            .collect();
        let damped: Vec<Complex64> = grid
            .iter()
            .map(|&t| x0_closed(t, gamma, Sites::Finite(sites)))
            .collect();
        let series = TimeSeries::new(grid, damped, None).unwrap();
        let width = 6.0 / t_max;
        let spectrum =
            dos_from_timeseries(&series, Window::Gaussian, width, 4.0 + 5.0 * gamma).unwrap();
        let free = dos_from_timeseries(
            &free_chain_series(sites, t_max, points),
            Window::Gaussian,
            width,
            4.0,
        )
        .unwrap();

        // numerically convolve the free DOS with a Gaussian of width γ and
        // compare in L¹ over a window holding all the mass
        let dw = free.domega();
        let lo = -6.0;
        let hi = 10.0;
        let mut l1 = 0.0f64;
        for (i, &w) in spectrum.omega_grid().iter().enumerate() {
            if w < lo || w > hi {
                continue;
            }
            let mut conv = 0.0f64;
            for (j, &wj) in free.omega_grid().iter().enumerate() {
                if free.dos()[j] == 0.0 {
                    continue;
                }
                let arg = (w - wj) / gamma;
                if arg.abs() > 10.0 {
                    continue;
                }
                conv += free.dos()[j]
                    * (-arg * arg / 2.0).exp()
                    * (dw / (gamma * (2.0 * std::f64::consts::PI).sqrt()));
            }
            l1 += (spectrum.dos()[i] - conv).abs() * dw;
        }
        assert!(l1 <= 1e-2, "L¹ distance {l1}");
    }

    #[test]
    fn dos_rejects_invalid_series() {
        // too few points
        let short = free_chain_series(16, 10.0, 128);
        assert!(dos_from_timeseries(&short, Window::None, 0.0, 4.0).is_err());
        // not starting at zero
        let grid: Vec<f64> = (0..512).map(|k| 1.0 + 0.05 * k as f64).collect();
        let vals = vec![c(1.0, 0.0); 512];
        let shifted = TimeSeries::new(grid, vals, None).unwrap();
        assert!(dos_from_timeseries(&shifted, Window::None, 0.0, 4.0).is_err());
        // Nyquist below band edge: dt = 1 → π/dt ≈ 3.14 < 9
        let coarse_grid: Vec<f64> = (0..512).map(|k| k as f64).collect();
        let coarse =
            TimeSeries::new(coarse_grid, vec![c(1.0, 0.0); 512], None).unwrap();
        assert!(dos_from_timeseries(&coarse, Window::None, 0.0, 9.0).is_err());
        // bad Gaussian width
        let fine = free_chain_series(16, 40.0, 1024);
        assert!(dos_from_timeseries(&fine, Window::Gaussian, 0.0, 4.0).is_err());
    }

    #[test]
    fn form_factor_boundary_values() {
        assert_close(sff_diffusive(5, 0.0, 1.0).unwrap(), 1.0, 1e-12);
        // γ = 0: squared modulus of the free trace
        for t in [0.4, 1.1, 2.7] {
            let got = sff_diffusive(6, t, 0.0).unwrap();
            let want = x0_closed(t, 0.0, Sites::Finite(6)).norm_sqr();
            assert_close(got, want, 1e-10);
        }
        assert!(sff_diffusive(41, 1.0, 1.0).is_err());
        assert!(sff_diffusive(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn form_factor_gap_closes_at_second_order_in_gamma() {
        // e^K resums only the damping part of the disorder average, so its
        // distance from the sampled form factor is O(γ²) at fixed t; halving
        // γ should quarter the gap (up to γ⁴ contamination and shot noise)
        let (n, t) = (6, 0.6);
        let gap = |gamma: f64| -> (f64, f64) {
            let model = build_anderson(n, gamma).unwrap();
            let oracle = estimate_sff(&model, t, 30_000, 9);
            let got = sff_diffusive(n, t, gamma).unwrap();
            ((got - oracle.value.re).abs(), oracle.stderr_re)
        };
        let (coarse, se_coarse) = gap(0.8);
        let (fine, se_fine) = gap(0.4);
        assert!(coarse <= 0.05, "diffusive form factor badly off: {coarse}");
        assert!(
            fine <= 0.35 * coarse + 3.0 * (se_coarse + se_fine),
            "gap {fine} at γ = 0.4 vs {coarse} at γ = 0.8"
        );
    }

    #[test]
    fn lattice_second_order_trace_matches_closed_form() {
        // the quadrature-corrected propagator on a 30-site ring reproduces
        // the thermodynamic-limit formula once finite-size echoes are
        // below the damping envelope
        let model = build_anderson(30, 1.0).unwrap();
        for t in [0.5, 1.5, 3.0] {
            let s2 = crate::dyson::second_order_propagator(&model, t, 64).unwrap();
            let lattice = s2.trace() / 30.0;
            let closed = x_second_order(t, 1.0);
            assert!(
                (lattice - closed).norm() <= 1e-3,
                "t = {t}: lattice {lattice} vs closed {closed}"
            );
        }
    }

    #[test]
    fn otoc_boundary_values() {
        assert!((otoc_diffusive(4, 0.0, 0.7, 1).unwrap() - c(1.0, 0.0)).norm() <= 1e-12);
        for ell in 2..=4 {
            assert!(otoc_diffusive(4, 0.0, 0.7, ell).unwrap().norm() <= 1e-12);
        }
        assert!(otoc_diffusive(4, 1.0, 0.7, 0).is_err());
        assert!(otoc_diffusive(4, 1.0, 0.7, 5).is_err());
        assert!(otoc_diffusive(13, 1.0, 0.7, 1).is_err());
    }

    #[test]
    fn sparse_and_dense_otoc_agree() {
        let (n, gamma, t) = (4, 0.5, 1.0);
        for ell in 1..=n {
            let sparse = otoc_diffusive(n, t, gamma, ell).unwrap();
            let dense = otoc_diffusive_dense(n, t, gamma, ell).unwrap();
            assert!(
                (sparse - dense).norm() <= 1e-8,
                "ℓ = {ell}: sparse {sparse} vs dense {dense}"
            );
        }
    }
}
