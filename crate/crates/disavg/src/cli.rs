//! Command-line front end: grid construction, method dispatch, CSV/JSON
//! emission, and exit-code mapping.
//!
//! Output contract: CSV goes to stdout, or to the `--out` path together
//! with a JSON sidecar (same stem, `.json` extension) holding the full
//! configuration, the seed, and a SHA-256 hash of the CSV bytes. All
//! numeric output uses `{:.16e}` (17 significant digits), '.' decimals,
//! and LF line endings. Identical invocations are bit-identical except for
//! the sidecar timestamp, which `--deterministic` suppresses.
//!
//! Exit codes: 0 success, 2 invalid flags or parameters, 3 numerical
//! failure (the message names the operation that failed).

use crate::anderson::{
    dos_from_timeseries, otoc_diffusive, sff_diffusive, x0_closed, x_second_order, Sites,
    TimeSeries, Window,
};
use crate::bridge::{empirical_covariance_check, path_matrix_checks};
use crate::dyson::{diffusive_propagator, second_order_propagator};
use crate::error::Error;
use crate::model::{build_anderson, DisorderedHamiltonian};
use crate::sampling::{
    estimate_propagator, estimate_sff_series, estimate_trace_x_series, propagator_gauss_hermite,
    EstimatorResult,
};
use crate::stochastic::{estimate_s_sde, estimate_s_stochastic};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "disavg",
    version,
    about = "Disorder-averaged quantum dynamics: sampling, stochastic products, and closed forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disorder-averaged normalized trace X(t) on a uniform time grid
    #[command(name = "trace-x")]
    TraceX(TraceXArgs),
    /// Density of states from the Fourier transform of X(t)
    Dos(DosArgs),
    /// Spectral form factor on a uniform time grid
    Sff(SffArgs),
    /// Diffusive out-of-time-order amplitude for one probe site
    Otoc(OtocArgs),
    /// Disorder-averaged propagator matrix at a single time
    Propagator(PropagatorArgs),
    /// Self-test of the Brownian-bridge sampler against its exact covariance
    #[command(name = "bridge-check")]
    BridgeCheck(BridgeCheckArgs),
    /// Discretization-bias convergence study for the stochastic product
    Convergence(ConvergenceArgs),
}

/// Flags shared by the chain-model subcommands.
#[derive(Args)]
struct ModelArgs {
    /// Number of lattice sites
    #[arg(long = "N", default_value_t = 30)]
    sites: usize,
    /// Disorder strength (standard deviation of the couplings)
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// RNG seed; every estimator is a deterministic function of it
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Flags shared by the time-grid subcommands.
#[derive(Args)]
struct GridArgs {
    /// Largest time on the grid
    #[arg(long = "t-max", default_value_t = 10.0)]
    t_max: f64,
    /// Number of grid points (including both endpoints)
    #[arg(long = "t-points", default_value_t = 512)]
    t_points: usize,
}

/// Flags shared by everything that writes output.
#[derive(Args)]
struct OutputArgs {
    /// Write CSV here (plus a .json sidecar) instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the sidecar timestamp so repeated runs are byte-identical
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct TraceXArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Disorder samples per grid point
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Comma-separated methods to tabulate
    #[arg(long, value_delimiter = ',', default_value = "sample,closed2")]
    method: Vec<TraceMethod>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceMethod {
    /// Monte Carlo over disorder realizations
    Sample,
    /// Closed form through second order in the disorder strength
    Closed2,
}

impl TraceMethod {
    fn name(self) -> &'static str {
        match self {
            TraceMethod::Sample => "sample",
            TraceMethod::Closed2 => "closed2",
        }
    }
}

#[derive(Args)]
struct DosArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Disorder samples per grid point (method=sample)
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Source of the time series to transform
    #[arg(long, value_enum, default_value_t = DosMethod::Closed0)]
    method: DosMethod,
    /// Taper applied before the transform
    #[arg(long, value_enum, default_value_t = WindowArg::Gaussian)]
    window: WindowArg,
    /// Frequency width of the Gaussian taper (default 6/t-max)
    #[arg(long = "window-width")]
    window_width: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DosMethod {
    /// Diffusive-order closed form for the finite chain
    Closed0,
    /// Monte Carlo over disorder realizations
    Sample,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WindowArg {
    Gaussian,
    Hann,
    None,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Window {
        match w {
            WindowArg::Gaussian => Window::Gaussian,
            WindowArg::Hann => Window::Hann,
            WindowArg::None => Window::None,
        }
    }
}

#[derive(Args)]
struct SffArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Disorder samples per grid point (method=sample)
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Comma-separated methods to tabulate
    #[arg(long, value_delimiter = ',', default_value = "sample,diffusive,unperturbed")]
    method: Vec<SffMethod>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SffMethod {
    /// Monte Carlo over disorder realizations
    Sample,
    /// Dense exponential of the two-copy diffusive generator
    Diffusive,
    /// Clean-chain (γ = 0) reference curve
    Unperturbed,
}

impl SffMethod {
    fn name(self) -> &'static str {
        match self {
            SffMethod::Sample => "sample",
            SffMethod::Diffusive => "diffusive",
            SffMethod::Unperturbed => "unperturbed",
        }
    }
}

#[derive(Args)]
struct OtocArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Probe site (1-based; site 1 carries the initial perturbation)
    #[arg(long, default_value_t = 1)]
    ell: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PropagatorArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Evolution time
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Disorder samples or stochastic paths
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Time steps for the stochastic methods
    #[arg(long = "n-steps", default_value_t = 256)]
    n_steps: usize,
    /// Quadrature nodes for the second-order method
    #[arg(long = "quad-nodes", default_value_t = 64)]
    quad_nodes: usize,
    #[arg(long, value_enum, default_value_t = PropagatorMethod::Sample)]
    method: PropagatorMethod,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropagatorMethod {
    /// Monte Carlo over disorder realizations
    Sample,
    /// Brownian-bridge product of exponential factors
    Product,
    /// Euler–Maruyama integration of the interpolating process
    Sde,
    /// Diffusive approximation e^K
    Diffusive,
    /// Diffusive approximation with the second-order fluctuation correction
    Second2,
}

#[derive(Args)]
struct BridgeCheckArgs {
    /// Number of bridge increments
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Sampled paths for the empirical covariance
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Comma-separated step counts to profile
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
    steps: Vec<usize>,
    /// Stochastic paths per step count
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Evolution time
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Disorder strength
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Quadrature nodes for the reference propagator
    #[arg(long = "quad-nodes", default_value_t = 64)]
    quad_nodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Entry point behind `main`; returns the process exit code.
pub fn run_cli() -> i32 {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::TraceX(args) => run_trace_x(args),
        Command::Dos(args) => run_dos(args),
        Command::Sff(args) => run_sff(args),
        Command::Otoc(args) => run_otoc(args),
        Command::Propagator(args) => run_propagator(args),
        Command::BridgeCheck(args) => run_bridge_check(args),
        Command::Convergence(args) => run_convergence(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// `DISAVG_THREADS` caps the worker pool; results are identical at any
/// setting, so a malformed value only costs a warning.
fn configure_threads() {
    if let Ok(raw) = std::env::var("DISAVG_THREADS") {
        match raw.parse::<usize>() {
            Ok(k) if k >= 1 => {
                // a pool may already exist (e.g. under test harnesses);
                // keeping it is fine since thread count never changes results
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
            _ => eprintln!("warning: ignoring DISAVG_THREADS={raw:?} (want a positive integer)"),
        }
    }
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Lib(Error::Convergence { .. }) => 3,
        CliError::Lib(_) => 2,
        CliError::Check(_) => 3,
        CliError::Io(_) => 1,
    }
}

enum CliError {
    Lib(Error),
    /// A statistical or accuracy self-test failed; the message names it.
    Check(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Check(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult = std::result::Result<(), CliError>;

fn build_grid(grid: &GridArgs) -> std::result::Result<Vec<f64>, CliError> {
    if grid.t_points < 2 {
        return Err(CliError::Lib(Error::InvalidInput(format!(
            "need at least two grid points, got {}",
            grid.t_points
        ))));
    }
    if !(grid.t_max > 0.0 && grid.t_max.is_finite()) {
        return Err(CliError::Lib(Error::InvalidInput(format!(
            "t-max must be positive and finite, got {}",
            grid.t_max
        ))));
    }
    let p = grid.t_points;
    Ok((0..p)
        .map(|k| grid.t_max * k as f64 / (p - 1) as f64)
        .collect())
}

fn build_model(model: &ModelArgs) -> std::result::Result<DisorderedHamiltonian, CliError> {
    Ok(build_anderson(model.sites, model.gamma)?)
}

/// One `re,im,stderr_re,stderr_im` column group.
struct ScalarColumns {
    name: &'static str,
    rows: Vec<[f64; 4]>,
}

/// Single group → bare column names; several groups → method-prefixed.
fn scalar_csv(label: &str, grid: &[f64], groups: &[ScalarColumns]) -> String {
    let mut csv = String::from(label);
    for g in groups {
        if groups.len() == 1 {
            csv.push_str(",re,im,stderr_re,stderr_im");
        } else {
            let n = g.name;
            let _ = write!(csv, ",{n}_re,{n}_im,{n}_stderr_re,{n}_stderr_im");
        }
    }
    csv.push('\n');
    for (i, &t) in grid.iter().enumerate() {
        let _ = write!(csv, "{t:.16e}");
        for g in groups {
            let [re, im, se_re, se_im] = g.rows[i];
            let _ = write!(csv, ",{re:.16e},{im:.16e},{se_re:.16e},{se_im:.16e}");
        }
        csv.push('\n');
    }
    csv
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes text to stdout, treating a closed pipe as a normal early exit
/// (`disavg ... | head` must not fail).
fn write_stdout(text: &str) -> CliResult {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::Io(e)),
    }
}

/// Writes the CSV to stdout, or to `--out` plus a JSON sidecar carrying the
/// configuration, seed, and content hash.
fn emit(csv: &str, command: &str, config: Value, seed: u64, output: &OutputArgs) -> CliResult {
    match &output.out {
        None => write_stdout(csv),
        Some(path) => {
            std::fs::write(path, csv)?;
            let mut sidecar = json!({
                "command": command,
                "config": config,
                "seed": seed,
                "content_sha256": sha256_hex(csv.as_bytes()),
            });
            if !output.deterministic {
                let now = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                sidecar["timestamp_unix"] = json!(now);
            }
            let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
            std::fs::write(sidecar_path(path), text + "\n")?;
            Ok(())
        }
    }
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn run_trace_x(args: TraceXArgs) -> CliResult {
    let model = build_model(&args.model)?;
    let grid = build_grid(&args.grid)?;
    let mut groups = Vec::new();
    for &method in &args.method {
        let rows = match method {
            TraceMethod::Sample => {
                estimate_trace_x_series(&model, &grid, args.samples, args.model.seed)
                    .into_iter()
                    .map(|e| [e.value.re, e.value.im, e.stderr_re, e.stderr_im])
                    .collect()
            }
            TraceMethod::Closed2 => grid
                .iter()
                .map(|&t| {
                    let x = x_second_order(t, args.model.gamma);
                    [x.re, x.im, 0.0, 0.0]
                })
                .collect(),
        };
        groups.push(ScalarColumns {
            name: method.name(),
            rows,
        });
    }
    let csv = scalar_csv("t", &grid, &groups);
    let config = json!({
        "N": args.model.sites,
        "gamma": args.model.gamma,
        "t_max": args.grid.t_max,
        "t_points": args.grid.t_points,
        "samples": args.samples,
        "method": args.method.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    emit(&csv, "trace-x", config, args.model.seed, &args.output)
}

fn run_dos(args: DosArgs) -> CliResult {
    let model = build_model(&args.model)?;
    let grid = build_grid(&args.grid)?;
    let width = args.window_width.unwrap_or(6.0 / args.grid.t_max);
    let series = match args.method {
        DosMethod::Closed0 => {
            let values: Vec<Complex64> = grid
                .iter()
                .map(|&t| x0_closed(t, args.model.gamma, Sites::Finite(args.model.sites)))
                .collect();
            TimeSeries::new(grid.clone(), values, None)?
        }
        DosMethod::Sample => {
            let estimates = estimate_trace_x_series(&model, &grid, args.samples, args.model.seed);
            let values = estimates.iter().map(|e| e.value).collect();
            let stderr = estimates
                .iter()
                .map(|e| e.stderr_re.hypot(e.stderr_im))
                .collect();
            TimeSeries::new(grid.clone(), values, Some(stderr))?
        }
    };
    let band_edge = 4.0 + 5.0 * args.model.gamma;
    let spectrum = dos_from_timeseries(&series, args.window.into(), width, band_edge)?;

    let mut csv = String::from("omega,dos\n");
    for (w, d) in spectrum.omega_grid().iter().zip(spectrum.dos()) {
        let _ = writeln!(csv, "{w:.16e},{d:.16e}");
    }
    let config = json!({
        "N": args.model.sites,
        "gamma": args.model.gamma,
        "t_max": args.grid.t_max,
        "t_points": args.grid.t_points,
        "samples": args.samples,
        "method": match args.method { DosMethod::Closed0 => "closed0", DosMethod::Sample => "sample" },
        "window": match args.window { WindowArg::Gaussian => "gaussian", WindowArg::Hann => "hann", WindowArg::None => "none" },
        "window_width": width,
        "band_edge": band_edge,
    });
    emit(&csv, "dos", config, args.model.seed, &args.output)
}

fn run_sff(args: SffArgs) -> CliResult {
    let model = build_model(&args.model)?;
    let grid = build_grid(&args.grid)?;
    let mut groups = Vec::new();
    for &method in &args.method {
        let rows = match method {
            SffMethod::Sample => {
                estimate_sff_series(&model, &grid, args.samples, args.model.seed)
                    .into_iter()
                    .map(|e| [e.value.re, e.value.im, e.stderr_re, e.stderr_im])
                    .collect()
            }
            SffMethod::Diffusive => {
                let mut rows = Vec::with_capacity(grid.len());
                for &t in &grid {
                    let v = sff_diffusive(args.model.sites, t, args.model.gamma)?;
                    rows.push([v, 0.0, 0.0, 0.0]);
                }
                rows
            }
            SffMethod::Unperturbed => grid
                .iter()
                .map(|&t| {
                    let v = x0_closed(t, 0.0, Sites::Finite(args.model.sites)).norm_sqr();
                    [v, 0.0, 0.0, 0.0]
                })
                .collect(),
        };
        groups.push(ScalarColumns {
            name: method.name(),
            rows,
        });
    }
    let csv = scalar_csv("t", &grid, &groups);
    let config = json!({
        "N": args.model.sites,
        "gamma": args.model.gamma,
        "t_max": args.grid.t_max,
        "t_points": args.grid.t_points,
        "samples": args.samples,
        "method": args.method.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    emit(&csv, "sff", config, args.model.seed, &args.output)
}

fn run_otoc(args: OtocArgs) -> CliResult {
    let grid = build_grid(&args.grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &t in &grid {
        let v = otoc_diffusive(args.model.sites, t, args.model.gamma, args.ell)?;
        rows.push([v.re, v.im, 0.0, 0.0]);
    }
    let groups = [ScalarColumns {
        name: "diffusive",
        rows,
    }];
    let csv = scalar_csv("t", &grid, &groups);
    let config = json!({
        "N": args.model.sites,
        "gamma": args.model.gamma,
        "t_max": args.grid.t_max,
        "t_points": args.grid.t_points,
        "ell": args.ell,
    });
    emit(&csv, "otoc", config, args.model.seed, &args.output)
}

fn run_propagator(args: PropagatorArgs) -> CliResult {
    let model = build_model(&args.model)?;
    let seed = args.model.seed;
    let t = args.t;

    let exact = |m: crate::algebra::OperatorMatrix| EstimatorResult::exact(m, seed);
    let result = match args.method {
        PropagatorMethod::Sample => estimate_propagator(&model, t, args.samples, seed),
        PropagatorMethod::Product => {
            estimate_s_stochastic(&model, t, args.n_steps, args.samples, seed)
        }
        PropagatorMethod::Sde => estimate_s_sde(&model, t, args.n_steps, args.samples, seed),
        PropagatorMethod::Diffusive => exact(diffusive_propagator(&model, t)?),
        PropagatorMethod::Second2 => exact(second_order_propagator(&model, t, args.quad_nodes)?),
    };

    let dim = result.dim();
    let mut csv = String::from("i,j,re,im,stderr_re,stderr_im\n");
    for i in 0..dim {
        for j in 0..dim {
            let v = result.mean[(i, j)];
            let _ = writeln!(
                csv,
                "{i},{j},{:.16e},{:.16e},{:.16e},{:.16e}",
                v.re,
                v.im,
                result.stderr_re_at(i, j),
                result.stderr_im_at(i, j)
            );
        }
    }
    let config = json!({
        "N": args.model.sites,
        "gamma": args.model.gamma,
        "t": t,
        "samples": args.samples,
        "n_steps": args.n_steps,
        "quad_nodes": args.quad_nodes,
        "method": match args.method {
            PropagatorMethod::Sample => "sample",
            PropagatorMethod::Product => "product",
            PropagatorMethod::Sde => "sde",
            PropagatorMethod::Diffusive => "diffusive",
            PropagatorMethod::Second2 => "second2",
        },
    });
    emit(&csv, "propagator", config, seed, &args.output)
}

fn run_bridge_check(args: BridgeCheckArgs) -> CliResult {
    let matrix = path_matrix_checks(args.n)?;

    // ten roughly evenly spaced interior pin points
    let mut indices: Vec<usize> = (1..=10)
        .map(|k| (k * args.n / 11).clamp(1, args.n.saturating_sub(1).max(1)))
        .collect();
    indices.dedup();
    let covariance = empirical_covariance_check(args.n, &indices, args.paths, args.seed)?;

    let report = json!({
        "path_matrix": matrix,
        "covariance": covariance,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.output.out {
        None => write_stdout(&text)?,
        Some(path) => std::fs::write(path, &text)?,
    }

    if matrix.max_deviation() > 1e-10 {
        return Err(CliError::Check(format!(
            "path_matrix_checks: deviation {:.3e} exceeds 1e-10 at n = {}",
            matrix.max_deviation(),
            args.n
        )));
    }
    if !covariance.within_four_sigma {
        return Err(CliError::Check(format!(
            "empirical_covariance_check: worst deviation {:.2}σ exceeds 4σ at n = {}",
            covariance.max_sigma_deviation, args.n
        )));
    }
    Ok(())
}

/// 2×2 noncommuting probe: nearest-neighbor hop plus a sign-split on-site
/// term, the smallest model where the time-ordering error is visible.
fn convergence_model(gamma: f64) -> std::result::Result<DisorderedHamiltonian, CliError> {
    let h0 = crate::algebra::OperatorMatrix::from_fn(2, |i, j| {
        Complex64::new(if i != j { 1.0 } else { 0.0 }, 0.0)
    });
    let d = crate::algebra::OperatorMatrix::from_diagonal(&[
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]);
    Ok(DisorderedHamiltonian::new(h0, vec![d], gamma)?)
}

fn run_convergence(args: ConvergenceArgs) -> CliResult {
    if args.steps.is_empty() {
        return Err(CliError::Lib(Error::InvalidInput(
            "need at least one step count".into(),
        )));
    }
    let model = convergence_model(args.gamma)?;
    let oracle = propagator_gauss_hermite(&model, args.t, args.quad_nodes)?;

    let mut csv = String::from("n,bias\n");
    let mut points = Vec::new();
    for &n in &args.steps {
        let estimate = estimate_s_stochastic(&model, args.t, n, args.samples, args.seed);
        let bias = estimate.debiased_distance(&oracle);
        let _ = writeln!(csv, "{n},{bias:.16e}");
        // a zero means the bias fell below the shot-noise floor; such
        // points carry no slope information
        if bias > 0.0 {
            points.push((n as f64, bias));
        }
    }

    // least-squares slope of log bias against log n
    let fitted_exponent = if points.len() >= 2 {
        let logs: Vec<(f64, f64)> = points.iter().map(|&(n, b)| (n.ln(), b.ln())).collect();
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / logs.len() as f64;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / logs.len() as f64;
        let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    if let Some(p) = fitted_exponent {
        eprintln!("fitted decay exponent: {p:.3}");
    }

    let config = json!({
        "steps": args.steps,
        "samples": args.samples,
        "t": args.t,
        "gamma": args.gamma,
        "quad_nodes": args.quad_nodes,
        "fitted_exponent": fitted_exponent,
    });
    emit(&csv, "convergence", config, args.seed, &args.output)
}
