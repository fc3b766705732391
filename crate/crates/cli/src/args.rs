use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dppo::algo::Algorithm;
use dppo::distribution::MetricKind;
use dppo::envs::EnvKind;

fn parse<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.parse().map_err(|e: T::Err| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "dppo", version, about = "Distributional PPO laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and write metrics and checkpoints.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a grid of risk parameters.
    Eval(EvalArgs),
    /// Exact return distribution of a deterministic policy.
    Oracle(OracleArgs),
    /// Render evaluation reports as SVG charts.
    Plot(PlotArgs),
    /// Serve a live steering session over WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON config; every field is optional and unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse::<EnvKind>)]
    pub env: EnvKind,
    #[arg(long, value_parser = parse::<Algorithm>)]
    pub algo: Algorithm,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config risk metric.
    #[arg(long, value_parser = parse::<MetricKind>)]
    pub metric: Option<MetricKind>,
    /// Overrides the config iteration count.
    #[arg(long)]
    pub iterations: Option<u64>,
    /// Fix the gap-step obstacle height instead of sampling it.
    #[arg(long)]
    pub gap_height: Option<f64>,
    /// Leave wall-clock time out of the metrics so reruns are identical.
    #[arg(long)]
    pub no_wall_clock: bool,
    /// Suppress progress lines on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_parser = parse::<EnvKind>)]
    pub env: EnvKind,
    /// `lo:hi:n`, n evenly spaced values including both ends.
    #[arg(long, default_value = "-1.5:1.5:5", allow_hyphen_values = true)]
    pub beta_grid: String,
    #[arg(long, default_value_t = 200)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub gap_height: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_parser = parse::<EnvKind>)]
    pub env: EnvKind,
    /// `ckpt:<file>`, `scripted:{safe,risky,refuse,attempt}`, or
    /// `sample:<file>` (stochastic, rejected).
    #[arg(long)]
    pub policy: String,
    /// Risk parameter fed to a checkpoint policy.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    /// Discount applied to returns.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub gap_height: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub atoms: usize,
    #[arg(long, default_value_t = 1 << 20)]
    pub max_branches: usize,
    /// Seed of the Monte Carlo fallback.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// One or more reports written by `eval`.
    #[arg(long = "eval", required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_parser = parse::<EnvKind>)]
    pub env: EnvKind,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 10.0)]
    pub tick_hz: f64,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of UI assets to serve instead of the built-in page.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
