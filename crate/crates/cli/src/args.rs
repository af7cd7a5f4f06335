//! Command-line surface. Every struct here is serializable so that a run's
//! configuration can be hashed and recorded next to its outputs.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "momentum-risk",
    version,
    about = "Risk-sensitive analysis and simulation of momentum methods",
    long_about = "Computes H-infinity gains, exact risk-sensitive indices and rate functions on \
                  quadratics, matrix-inequality risk bounds for strongly convex objectives, and \
                  Monte Carlo estimates of the risk-sensitive cost. Results are written as CSV \
                  files plus a meta.json record to the --out directory."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Per-mode gains and the H-infinity norm on a quadratic.
    Hinf(HinfArgs),
    /// Exact risk-sensitive index on a theta grid (Riccati and integral routes).
    RiskIndex(RiskIndexArgs),
    /// Large-deviation rate function I(s) on a quadratic.
    RateFunction(RateFunctionArgs),
    /// Finite-horizon and asymptotic risk and tail bounds from a certificate.
    Bound(BoundArgs),
    /// Monte Carlo paths and the empirical risk-sensitive cost.
    Simulate(SimulateArgs),
    /// (rate, risk) sweep over a parameter grid with its Pareto frontier.
    Pareto(ParetoArgs),
    /// Huber regression pipeline: minibatch and minibatch+adversarial noise
    /// for HB, RS-HB, GD-pop, NAG-beta-opt and TMM.
    #[command(name = "experiment-6")]
    #[serde(rename = "experiment-6")]
    Experiment6(ExperimentArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Hinf(_) => "hinf",
            Command::RiskIndex(_) => "risk-index",
            Command::RateFunction(_) => "rate-function",
            Command::Bound(_) => "bound",
            Command::Simulate(_) => "simulate",
            Command::Pareto(_) => "pareto",
            Command::Experiment6(_) => "experiment-6",
        }
    }

    pub fn output(&self) -> &OutputArgs {
        match self {
            Command::Hinf(a) => &a.output,
            Command::RiskIndex(a) => &a.output,
            Command::RateFunction(a) => &a.output,
            Command::Bound(a) => &a.output,
            Command::Simulate(a) => &a.output,
            Command::Pareto(a) => &a.output,
            Command::Experiment6(a) => &a.output,
        }
    }
}

/// Method parameters: a named preset, explicit values, or a preset with
/// individual overrides.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ParamArgs {
    /// Named parameterization (GD-pop, GD-fastest, RS-GD, NAG-pop,
    /// NAG-fastest, NAG-beta-opt, TMM, HB, RS-HB). Defaults to GD-pop when
    /// no --alpha is given.
    #[arg(long)]
    pub preset: Option<String>,
    /// Step size. With NAG-beta-opt this selects the preset's step size and
    /// the momentum follows from it; otherwise it overrides the preset.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Momentum parameter (overrides the preset).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gradient extrapolation parameter (overrides the preset).
    #[arg(long)]
    pub nu: Option<f64>,
    /// The constant a of RS-HB (default sqrt 2).
    #[arg(long = "rs-hb-a")]
    pub rs_hb_a: Option<f64>,
}

/// Objective: a diagonal quadratic from `--mu/--L` or `--eigenvalues`, or a
/// problem specification file.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Strong convexity constant of the two-mode quadratic diag(mu, L).
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Smoothness constant of the two-mode quadratic diag(mu, L).
    #[arg(long = "L", default_value_t = 3.0)]
    pub l: f64,
    /// Comma-separated Hessian eigenvalues; replaces --mu/--L.
    #[arg(long, conflicts_with_all = ["mu", "l", "problem"])]
    pub eigenvalues: Option<String>,
    /// Problem specification file (quadratic.* or huber.* keys).
    #[arg(long, conflicts_with_all = ["mu", "l"])]
    pub problem: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThetaArgs {
    /// Comma-separated risk-sensitivity parameters.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Log-spaced grid `lo:hi:n`, or just `n` points on (0, 0.98 theta*].
    /// The default is 50 points on (0, 0.98 theta*].
    #[arg(long = "theta-grid", conflicts_with = "theta")]
    pub theta_grid: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Full-resolution grids instead of desk-scale ones.
    #[arg(long = "paper-scale")]
    pub paper_scale: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct HinfArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RiskIndexArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Gradient noise model; its variance proxy scales the index.
    #[arg(long, default_value = "gaussian:sigma2=1")]
    pub noise: String,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct RateFunctionArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "gaussian:sigma2=1")]
    pub noise: String,
    /// Grid of levels `lo:hi:n` (linear). The default spans 0.25 to 20
    /// times the long-run mean suboptimality with 50 points.
    #[arg(long = "s-grid")]
    pub s_grid: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "gaussian:sigma2=1")]
    pub noise: String,
    #[command(flatten)]
    pub theta: ThetaArgs,
    /// Horizon K.
    #[arg(long = "K", default_value_t = 1000)]
    pub k: usize,
    /// Level t of the tail bounds; defaults to twice the asymptotic bias
    /// bound 4 sigma^2 H_bar^2.
    #[arg(long)]
    pub t: Option<f64>,
    /// Certificate: auto, gd-distance, gd-function, nag, or a file path.
    #[arg(long, default_value = "auto")]
    pub certificate: String,
    /// Starting point (comma-separated); the origin by default.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Seed for the variance-proxy estimate of minibatch noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "gaussian:sigma2=1")]
    pub noise: String,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[arg(long = "K", default_value_t = 1000)]
    pub k: usize,
    /// Number of sample paths.
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Record every stride-th iterate in the CSV outputs (K is always kept).
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value = "gaussian:sigma2=1")]
    pub noise: String,
    /// Risk-sensitivity parameter of the sweep.
    #[arg(long, default_value_t = 0.2)]
    pub theta: f64,
    /// Comma-separated method families: gd, hb, nag.
    #[arg(long, default_value = "gd,hb,nag")]
    pub methods: String,
    /// Grid points per axis (overrides the desk/paper-scale defaults).
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    /// Problem specification file; defaults to the d=10, p=1000 Huber
    /// regression instance with mu=0.005, L=20, lambda=0.1.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    /// Comma-separated risk-sensitivity parameters.
    #[arg(long, default_value = "0.001,1000")]
    pub theta: String,
    #[arg(long = "K", default_value_t = 1000)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Minibatch size.
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    /// Radius of the adversarial ball.
    #[arg(long, default_value_t = 2.5)]
    pub delta: f64,
    /// Candidates drawn from the ball per step.
    #[arg(long, default_value_t = 50)]
    pub candidates: usize,
    /// Record every stride-th iterate (K is always kept).
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}
