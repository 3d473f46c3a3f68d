//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lorenzlab_core::sde::{Scheme, System, DEFAULT_DT0};
use lorenzlab_core::fokker_planck::{DEFAULT_N_THETA, DEFAULT_N_Z};

use crate::output::AlphaUnits;

#[derive(Debug, Parser)]
#[command(
    name = "lorenzlab",
    version,
    about = "Numerical laboratory for the Lorenz system with noise on the z equation",
    after_help = "Any long flag may also come from a `--config FILE` of `key = value` lines; \
                  flags on the command line take precedence. LORENZLAB_SEED supplies the seed \
                  when --seed is absent."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write its samples as CSV.
    Simulate(SimulateArgs),
    /// Estimate the stability exponent lambda at one noise level.
    Lambda(LambdaArgs),
    /// Locate the noise level where lambda changes sign.
    Threshold(ThresholdArgs),
    /// Stationary measure and Poisson corrector on a grid.
    Poisson(PoissonArgs),
    /// Sample the drift inequalities of the Lyapunov function.
    VerifyLyapunov(VerifyArgs),
    /// Split a (theta, z) trajectory into excursions.
    Excursions(ExcursionArgs),
    /// Numerical checks of the auxiliary growth, tracking, crossing and stop-time estimates.
    Check(CheckArgs),
    /// lambda over a range of noise levels.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 8.0 / 3.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Noise amplitude, read in --alpha-units.
    #[arg(long = "alpha-hat", visible_alias = "alpha")]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = AlphaUnits::Hat)]
    pub alpha_units: AlphaUnits,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Falls back to LORENZLAB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output path; stdout when absent or `-`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Original,
    Transformed,
    ThetaZ,
    PolarLinear,
}

impl From<SystemArg> for System {
    fn from(s: SystemArg) -> Self {
        match s {
            SystemArg::Original => System::OriginalFull,
            SystemArg::Transformed => System::TransformedFull,
            SystemArg::ThetaZ => System::ThetaZ,
            SystemArg::PolarLinear => System::PolarLinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Splitting,
    Em,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Splitting => Scheme::Splitting,
            SchemeArg::Em => Scheme::EulerMaruyama,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// End time, burn-in included.
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Discarded initial time.
    #[arg(long)]
    pub t_burn: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DT0)]
    pub dt0: f64,
    /// Fixed step dt0 instead of dt0 / (1 + |state|).
    #[arg(long)]
    pub no_adaptive: bool,
    #[arg(long, value_enum, default_value_t = SchemeArg::Splitting)]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 1)]
    pub thin: u64,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = DEFAULT_N_THETA)]
    pub n_theta: usize,
    #[arg(long, default_value_t = DEFAULT_N_Z)]
    pub n_z: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = SystemArg::Transformed)]
    pub system: SystemArg,
    /// Initial point in the chart of --system: x,y,z or, for theta-z, theta,z; r,theta,z for polar-linear.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Summary JSON; defaults to the sidecar of --output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LambdaMethod {
    Mc,
    Growth,
    Pde,
    Heuristic,
    AsymptoticSmall,
    AsymptoticLarge,
    Excursion,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = LambdaMethod::Mc)]
    pub method: LambdaMethod,
    #[arg(long, default_value_t = 8)]
    pub replicas: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdMethod {
    Heuristic,
    Pde,
    Mc,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = ThresholdMethod::Heuristic)]
    pub method: ThresholdMethod,
    /// Search interval lo,hi in --alpha-units.
    #[arg(long, value_delimiter = ',', num_args = 1, default_values_t = [20.0, 35.0])]
    pub bracket: Vec<f64>,
    /// Bracket width at which to stop, in --alpha-units.
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    #[arg(long, default_value_t = 16)]
    pub replicas: u64,
    #[arg(long, default_value_t = 200)]
    pub budget: u32,
    /// Each level doubles the averaging window of an undecided point.
    #[arg(long, default_value_t = 3)]
    pub max_level: u32,
    #[arg(long, default_value_t = 0)]
    pub scan_points: u32,
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
}

#[derive(Debug, Args)]
pub struct PoissonArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// CSV of the stationary density.
    #[arg(long)]
    pub measure: Option<PathBuf>,
    /// Grid metadata JSON; defaults to the sidecar of --output.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 129)]
    pub lattice_theta: usize,
    #[arg(long, default_value_t = 257)]
    pub lattice_z: usize,
    /// Only the near-axis check.
    #[arg(long)]
    pub no_full: bool,
}

#[derive(Debug, Args)]
pub struct ExcursionArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Full excursions, one JSON object per line.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
    /// Summary JSON; defaults to the sidecar of --output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(subcommand)]
    pub kind: CheckKind,
}

#[derive(Debug, Subcommand)]
pub enum CheckKind {
    /// Tail of the exit probabilities of a perturbed unstable linear SDE.
    ExpGrowth(ExpGrowthArgs),
    /// Tracking constant of x' = 1 - a(t) x for a(t) = a0 (2 + sin(a0 t)).
    Tracking(TrackingArgs),
    /// Crossing-time comparison on random instances.
    Crossing(CrossingArgs),
    /// Moments of excursion lengths by starting level.
    StopTime(StopTimeArgs),
}

#[derive(Debug, Args)]
pub struct ExpGrowthArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 4)]
    pub n_max: u32,
    /// Drop the adversarial perturbation.
    #[arg(long)]
    pub unperturbed: bool,
}

#[derive(Debug, Args)]
pub struct TrackingArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0, 16.0])]
    pub a0: Vec<f64>,
    /// Horizon in units of 1 / a0.
    #[arg(long, default_value_t = 40.0)]
    pub t_scale: f64,
}

#[derive(Debug, Args)]
pub struct CrossingArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
}

#[derive(Debug, Args)]
pub struct StopTimeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = LambdaMethod::Heuristic)]
    pub method: LambdaMethod,
    /// First noise level, in --alpha-units.
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    #[arg(long, default_value_t = 8)]
    pub replicas: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Also write `alpha_hat,alpha,lambda,ci` rows here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}
