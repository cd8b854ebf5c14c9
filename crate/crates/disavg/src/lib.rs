//! Disorder-averaged quantum dynamics.
//!
//! Models of the form `H(x) = H₀ + Σⱼ xⱼ Dⱼ` with i.i.d. Gaussian couplings
//! `xⱼ` (standard deviation γ) admit three complementary routes to the
//! disorder-averaged propagator `S(t) = E[e^{itH(x)}]` and its derived
//! observables:
//!
//! * brute-force Monte Carlo over disorder realizations ([`sampling`]) — the
//!   ground-truth oracle;
//! * Brownian-bridge path averages of time-ordered operator products
//!   ([`bridge`], [`stochastic`]) — an exact stochastic representation whose
//!   discretization bias is O(1/√n) in the number of time steps;
//! * a diffusive approximation `e^K`, `K = itH₀ − (γ²t²/2)ΣⱼDⱼ²`, with its
//!   second-order fluctuation correction and a completely positive Lindblad
//!   form for density matrices ([`dyson`]).
//!
//! The [`anderson`] module adds closed forms for the 1-D tight-binding model
//! with site disorder (Bessel-function trace formulas, density of states via
//! FFT, spectral form factor, OTOC amplitudes), which cross-validate the
//! general machinery. All estimators are deterministic functions of their
//! seed, independent of thread count.

pub mod algebra;
pub mod anderson;
pub mod bridge;
pub mod cli;
pub mod dyson;
pub mod error;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub(crate) mod stats;
pub mod stochastic;

pub use algebra::{apply_expm, eigh, eigh_values, expm, kron, outer_product};
pub use algebra::{HermitianEig, OperatorMatrix, SparseOperator};
pub use anderson::{
    bessel_j0, dos_from_timeseries, double_bessel_integral, otoc_diffusive, otoc_diffusive_dense,
    sff_diffusive, x0_closed, x2_closed, x_second_order, Sites, SpectrumResult, TimeSeries,
    Window,
};
pub use bridge::{
    bridge_covariance, empirical_covariance_check, path_matrix_checks, sample_bridge, BridgePath,
    CovarianceCheck, PathMatrixReport,
};
pub use dyson::{diffusive_propagator, lindblad_evolve, second_order_propagator};
pub use error::{Error, Result};
pub use model::{
    build_anderson, build_copies, diffusive_generator, sample_hamiltonian, swap_cycle_operator,
    DisorderedHamiltonian,
};
pub use sampling::{
    estimate_density, estimate_propagator, estimate_sff, estimate_sff_series, estimate_trace_x,
    estimate_trace_x_series, propagator_gauss_hermite, sample_disorder, EstimatorResult,
    ScalarEstimate,
};
pub use cli::run_cli;
pub use stochastic::{estimate_s_sde, estimate_s_stochastic, path_propagator};
