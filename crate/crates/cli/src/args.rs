use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "phieq", version, about = "Build, reduce, solve and verify constrained Phi-equilibria")]
pub struct Cli {
    /// Write the run manifest to this file instead of stderr
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random polymatrix game
    Generate(GenerateArgs),
    /// Compile a polymatrix game into a constrained CCE instance
    Reduce(ReduceArgs),
    /// Check a correlated strategy against a game with safe-deviation LPs
    Verify(VerifyArgs),
    /// Solve the quasi-variational inequality of a game for a product equilibrium
    SolveQvi(SolveQviArgs),
    /// Reduce, solve, verify and extract a Nash profile in one pipeline
    Roundtrip(RoundtripArgs),
    /// Sample Lipschitz ratios of the QVI operator and correspondence
    ProbeLipschitz(ProbeArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Reduce(_) => "reduce",
            Command::Verify(_) => "verify",
            Command::SolveQvi(_) => "solve-qvi",
            Command::Roundtrip(_) => "roundtrip",
            Command::ProbeLipschitz(_) => "probe-lipschitz",
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of nodes
    #[arg(long)]
    pub n: usize,
    /// Actions per node
    #[arg(long)]
    pub k: usize,
    /// Maximum degree of the interaction graph
    #[arg(long)]
    pub deg: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; the game is printed to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Polymatrix game JSON
    pub input: PathBuf,
    /// Target Nash approximation of the source game
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Deviations {
    Ce,
    Cce,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Game JSON: a factored game or a reduced instance
    pub game: PathBuf,
    /// Strategy JSON: a mixture object or a list of marginals
    pub strategy: PathBuf,
    /// Regret budget; defaults to the instance's eps_prime
    #[arg(long)]
    pub eps: Option<f64>,
    /// Cost budget; defaults to the instance's nu, else 0
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = phieq::tol::LP)]
    pub tol: f64,
    /// Cost budget allowed to deviations
    #[arg(long, default_value_t = 0.0)]
    pub safety_slack: f64,
    /// Deviation set; defaults to the instance's, else cce
    #[arg(long, value_enum)]
    pub deviations: Option<Deviations>,
    /// Report JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-player regrets as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Initial step size; defaults to 1/(2G)
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SolveQviArgs {
    /// Game JSON: a factored game or a reduced instance
    pub input: PathBuf,
    /// Defaults to the instance's eps_prime
    #[arg(long)]
    pub eps: Option<f64>,
    /// Defaults to the instance's nu
    #[arg(long)]
    pub nu: Option<f64>,
    /// Slack added to the regret budget when the renormalized point is verified
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Gap trace as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RoundtripArgs {
    /// Polymatrix game JSON
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Slack added to every certified bound
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Gap trace as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Game JSON: a factored game or a reduced instance
    pub input: PathBuf,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    /// Random pairs to sample
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
