//! `plcnet`: generate, analyze and simulate power-line deployments.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::Config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "plcnet",
    version,
    about = "HomePlug AV tonemap analysis and spectrum-sharing simulation"
)]
struct Cli {
    /// key=value file supplying any flag; command-line flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic deployment as a PLCTM trace
    Generate(GenerateArgs),
    /// Per-link PHY rates, expected throughput and asymmetry
    Analyze(AnalyzeArgs),
    /// Run the CSMA/CA simulation, optionally with spectrum sharing
    Simulate(SimulateArgs),
    /// Compare sharing against plain CSMA/CA over a list of beta values
    Sweep(SweepArgs),
    /// Best multi-hop route between two nodes
    Route(RouteArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GeneratorArgs {
    #[arg(long)]
    pub nodes: Option<usize>,
    /// uniform, complementary, interference-notched or asymmetric
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub base_quality: Option<f64>,
    #[arg(long)]
    pub notch_count: Option<usize>,
    #[arg(long)]
    pub notch_width: Option<usize>,
    #[arg(long)]
    pub asymmetry_noise: Option<u8>,
    /// Seeds both the generator and the simulation
    #[arg(long)]
    pub seed: Option<u64>,
    /// AC line cycle slots per tonemap
    #[arg(long)]
    pub slots: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Read the deployment from a trace instead of generating it
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    /// Output trace; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Output CSV; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub top_m: Option<usize>,
    #[arg(long)]
    pub max_share_fraction: Option<f64>,
    #[arg(long)]
    pub duration_us: Option<u64>,
    /// `all` or a comma-separated list of tx:rx links
    #[arg(long)]
    pub flows: Option<String>,
    #[arg(long)]
    pub reeval_period_us: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// on or off
    #[arg(long)]
    pub ss: Option<String>,
    #[arg(long)]
    pub beta: Option<u8>,
    /// Also write the event log (needs --out)
    #[arg(long)]
    pub events: bool,
    /// Output directory; CSVs go to stdout when omitted
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated beta values, one row each
    #[arg(long)]
    pub beta: Option<String>,
    /// Output CSV; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RouteArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub src: Option<String>,
    #[arg(long)]
    pub dst: Option<String>,
    /// Drop links whose expected throughput is below this, in b/s
    #[arg(long)]
    pub min_rate: Option<f64>,
    /// Output CSV; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Generate(a) => commands::generate(&a, &cfg),
        Command::Analyze(a) => commands::analyze(&a, &cfg),
        Command::Simulate(a) => commands::simulate(&a, &cfg),
        Command::Sweep(a) => commands::sweep(&a, &cfg),
        Command::Route(a) => commands::route(&a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plcnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
