use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Moderate-deviation bounds for Rademacher functionals, with exact and
/// Monte Carlo checks.
#[derive(Debug, Parser)]
#[command(name = "rstein", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    None,
    NegateOuInverse,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Top-level seed; every output row carries it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo replicates per estimate.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub samples: u64,

    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "RSTEIN_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,

    /// Prefactor in the 2-runs gamma envelope; no known value.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub big_o: f64,

    /// Rate in the exponential factor of the 2-runs gamma envelope.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub c_exp: f64,

    /// Range constant of the bounded-domain subgraph bound.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub c1: f64,

    /// Growth constant of the bounded-domain subgraph bound.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub c2: f64,

    /// Constant of the comparison bound; no known value.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub zhang_c: f64,

    /// Largest copy catalog to enumerate.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub cap: u64,

    /// Random cases per property in the verification suites.
    #[arg(long, global = true, default_value_t = 1000)]
    pub cases: u64,

    /// Mutation for testing the verification suites.
    #[arg(long, global = true, value_enum, default_value_t = FaultArg::None)]
    pub inject_fault: FaultArg,
}

#[derive(Debug, Args)]
pub struct TwoRunsArgs {
    /// JSON file `{"coeffs": {"offset": i, "values": [..]}, "big_o": .., "c_exp": ..}`;
    /// without it the indicator weights `1_{1..n}` are used for every `--n`.
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long, value_delimiter = ',', default_values_t = vec![64usize, 256, 1024])]
    pub n: Vec<usize>,

    /// Thresholds; default is a 0.25 grid on `[0, n^{1/10}]`.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SubgraphArgs {
    /// `K<k>`, `P<k>`, `C<k>` or a JSON file `{"vertices": v, "edges": [[u, w], ..]}`.
    #[arg(long, default_value = "K3")]
    pub pattern: String,

    #[arg(long, default_value_t = 36)]
    pub n: usize,

    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3])]
    pub p: Vec<f64>,

    /// Thresholds; default is a 0.25 grid on `[0, 2]`.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Operator identities, Gaussian kernel bounds and the subgraph lemma
    /// checks on randomized instances.
    VerifyCore,
    /// Bound table for weighted 2-runs.
    TworunsBound(TwoRunsArgs),
    /// Bound table plus Monte Carlo tail ratios for weighted 2-runs.
    TworunsSimulate(TwoRunsArgs),
    /// Theorem, corollary and comparison bounds for subgraph counts.
    SubgraphBound(SubgraphArgs),
    /// Monte Carlo tail ratios of standardized subgraph counts.
    SubgraphSimulate(SubgraphArgs),
    /// Subgraph lemma checks only.
    LemmasCheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
