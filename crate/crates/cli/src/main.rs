use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

mod commands;
mod output;

/// Similarity caching experiments: scenario generation, offline and online
/// solvers, baselines and parameter sweeps. Results are written as CSV with a
/// JSON manifest next to them.
#[derive(Debug, Parser)]
#[command(name = "simcache", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic grid scenario and write it as JSON.
    #[command(allow_negative_numbers = true)]
    Generate(GenerateArgs),
    /// Check a scenario file and list every violated invariant.
    Validate(ValidateArgs),
    /// Run the offline solver (or adaptive caching) on one scenario.
    #[command(allow_negative_numbers = true)]
    Solve(SolveArgs),
    /// Solve a grid of (rho, capacity, alpha, seed) points for both schemes.
    #[command(allow_negative_numbers = true)]
    Sweep(SweepArgs),
    /// Simulate the online scheme or the per-cache baseline slot by slot.
    #[command(allow_negative_numbers = true)]
    Online(OnlineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyArg {
    Grid,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineArg {
    Adaptive,
    PerCache,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualRuleArg {
    Damped,
    Amplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Rows,
    Delivered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServeRuleArg {
    MostSimilar,
    CostAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Similarity,
    Adaptive,
}

/// Shape of the synthetic network and workload.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TopoArgs {
    /// Grid side length; the network has side^2 nodes.
    #[arg(long, default_value_t = 5)]
    pub nodes_side: usize,
    #[arg(long, value_enum, default_value_t = TopologyArg::Grid)]
    pub topology: TopologyArg,
    #[arg(long, default_value_t = 10)]
    pub contents: usize,
    #[arg(long, default_value_t = 40)]
    pub requests: usize,
    /// Number of nodes that originate requests.
    #[arg(long, default_value_t = 12)]
    pub origins: usize,
    /// Exponent of the dissimilarity |f - f'|^beta.
    #[arg(long, default_value_t = 3.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_delay: f64,
    #[arg(long, default_value_t = 10.0)]
    pub max_delay: f64,
}

/// Generator parameters that also override a loaded scenario.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub topo: TopoArgs,
    /// Zipf exponent of content popularity.
    #[arg(long, default_value_t = 1.2)]
    pub rho: f64,
    /// Cache slots per node [default: 2, or the scenario file's value].
    #[arg(long)]
    pub capacity: Option<usize>,
    /// Weight of the dissimilarity cost [default: 10, or the scenario file's value].
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SourceArgs {
    /// Scenario file; when absent a scenario is generated.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Generator seed when no file is given [default: --seed].
    #[arg(long)]
    pub scenario_seed: Option<u64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub eta_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_mu: f64,
    /// Stop once |L(n+1) - L(n)| <= delta.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, value_enum, default_value_t = DualRuleArg::Damped)]
    pub dual_rule: DualRuleArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solve adaptive caching (delivery fixed to the requested content) instead.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub topo: TopoArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_delimiter = ',', default_value = "1.2")]
    pub rhos: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub capacities: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100,1000")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "similarity,adaptive")]
    pub schemes: Vec<SchemeArg>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Seed of the request arrival streams (and of the generator unless
    /// --scenario-seed is given).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5_000)]
    pub slots: usize,
    #[arg(long, default_value_t = 1.0)]
    pub slot_length: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eta_x: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eta_q: f64,
    /// Trailing slots in the windowed averages.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Rows)]
    pub estimator: EstimatorArg,
    /// Simulate the per-cache baseline instead of the online scheme.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Admission probability of the per-cache baseline.
    #[arg(long, default_value_t = 0.5)]
    pub insert_prob: f64,
    #[arg(long, value_enum, default_value_t = ServeRuleArg::MostSimilar)]
    pub serve_rule: ServeRuleArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Solve(a) => commands::solve(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Online(a) => commands::online(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
