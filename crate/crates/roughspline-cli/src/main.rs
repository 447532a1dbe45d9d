//! Command-line driver for the roughspline library: convergence studies,
//! rate predictions, point-set diagnostics, one-off interpolation, and the
//! derivative-free smoothness probe. Batch inputs are JSON documents; tables
//! come and go as CSV with shortest round-trip floats.

mod commands;
mod config;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// A command failure tagged with its exit code. Code 2 covers anything wrong
/// with the invocation or the files it names, 3 a numerical failure inside an
/// otherwise valid run, 4 a failed `--check` gate. Success is 0.
#[derive(Debug)]
pub enum CliFailure {
    Config(String),
    Numeric(String),
    Check(String),
}

impl CliFailure {
    fn code(&self) -> u8 {
        match self {
            CliFailure::Config(_) => 2,
            CliFailure::Numeric(_) => 3,
            CliFailure::Check(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliFailure::Config(m) | CliFailure::Numeric(m) | CliFailure::Check(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "roughspline",
    version,
    about = "Scattered-data interpolation by polyharmonic kernels"
)]
struct Cli {
    /// Override the seed of any seeded node generator in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence studies and rate predictions.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Point-set diagnostics.
    #[command(subcommand)]
    Nodes(NodesCommand),
    /// Fit one interpolant and evaluate it.
    #[command(subcommand)]
    Interp(InterpCommand),
    /// Smoothing-surrogate demonstrations.
    #[command(subcommand)]
    Surrogate(SurrogateCommand),
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Run the convergence study described by a JSON config.
    Run(StudyRunArgs),
    /// Print the rate the theory predicts for a kernel and data order.
    Predict(PredictArgs),
}

#[derive(Args)]
pub struct StudyRunArgs {
    /// JSON study document (see configs/ for examples).
    pub config: PathBuf,
    /// Exit 4 unless the fitted rate reaches the predicted rate.
    #[arg(long)]
    pub check: bool,
    /// Write the per-level CSV table here (overrides the config).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the full JSON report here (overrides the config).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write a log-log rate plot here (overrides the config).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Ambient dimension.
    #[arg(long)]
    pub d: u32,
    /// Kernel smoothness index.
    #[arg(long)]
    pub m: u32,
    /// Fractional smoothness offset in [0, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    /// Data smoothness order the prediction is for.
    #[arg(long)]
    pub k: u32,
    /// Polynomial tail degree; defaults to the kernel's minimal admissible one.
    #[arg(long)]
    pub poly_degree: Option<usize>,
}

#[derive(Subcommand)]
enum NodesCommand {
    /// Geometry and unisolvency diagnostics for a points CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Points CSV with header x1,...,xd, one point per row.
    pub points: PathBuf,
    /// Domain lower corner, comma separated. With --hi it overrides the
    /// default unit-box domain.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<f64>>,
    /// Domain upper corner, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<f64>>,
    /// Scan candidates per axis for the fill-distance estimate. The default
    /// puts candidates on a 1/256 lattice, so dyadic examples land exactly.
    #[arg(long, default_value_t = 257)]
    pub resolution: usize,
}

#[derive(Subcommand)]
enum InterpCommand {
    /// Solve on CSV data and evaluate at CSV points.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ambient dimension.
    #[arg(long)]
    pub d: u32,
    /// Kernel smoothness index.
    #[arg(long)]
    pub m: u32,
    /// Fractional smoothness offset in [0, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: f64,
    /// Polynomial tail degree; defaults to the kernel's minimal admissible one.
    #[arg(long)]
    pub poly_degree: Option<usize>,
    /// CSV with header x1,...,xd,value: interpolation nodes and data.
    #[arg(long)]
    pub data: PathBuf,
    /// CSV of evaluation points with header x1,...,xd.
    #[arg(long)]
    pub points: PathBuf,
    /// Domain lower corner; with --hi it overrides the default bounding box
    /// of the nodes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lo: Option<Vec<f64>>,
    /// Domain upper corner.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub hi: Option<Vec<f64>>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SurrogateCommand {
    /// Probe how the surrogate's seminorm scales with node separation.
    Demo(DemoArgs),
}

#[derive(Args)]
pub struct DemoArgs {
    /// JSON probe document (see configs/ for an example).
    pub config: PathBuf,
    /// Write the (q, seminorm) CSV table here (overrides the config).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Honors ROUGHSPLINE_THREADS as a cap on rayon's pool. Must run before any
/// parallel work touches the global pool.
fn init_threads() {
    if let Ok(v) = std::env::var("ROUGHSPLINE_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring ROUGHSPLINE_THREADS={v:?} (want a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Study(StudyCommand::Run(args)) => commands::study_run(cli.seed, args),
        Command::Study(StudyCommand::Predict(args)) => commands::study_predict(args),
        Command::Nodes(NodesCommand::Analyze(args)) => commands::nodes_analyze(args),
        Command::Interp(InterpCommand::Eval(args)) => commands::interp_eval(args),
        Command::Surrogate(SurrogateCommand::Demo(args)) => commands::surrogate_demo(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
