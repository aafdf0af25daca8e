//! `imh`: exact convergence analysis, simulation and validation for
//! independent Metropolis-Hastings chains.

mod analyze;
mod output;
mod reproduce;
mod simulate;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "imh",
    version,
    about = "Exact convergence rates for independent Metropolis-Hastings chains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "IMH_OUTPUT_DIR", default_value = "imh-out")]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct ModelArg {
    /// A JSON model spec path or a `registry:<name>?k=v&...` address.
    #[arg(long)]
    pub model: String,
}

#[derive(Subcommand)]
enum Command {
    /// Exact rate, steps to each tolerance and TV tables.
    Analyze(AnalyzeArgs),
    /// Closed-form eigenvalues and eigenvectors of a discrete IMH kernel.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run one chain.
    Simulate(SimulateArgs),
    /// Simulate meeting times of the minorization coupling.
    Couple(CoupleArgs),
    /// Regenerate plot data as CSV.
    Reproduce(ReproduceArgs),
    /// Run a validation suite; the exit code is the number of failed checks.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Tolerances for the steps table (repeatable). Defaults to 0.1, 0.05, 0.01, 0.001.
    #[arg(long = "epsilon")]
    pub epsilon: Vec<f64>,
    /// Horizon for discrete TV tables.
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    /// Start points for continuous TV tables, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub points: Vec<f64>,
    /// Number of steps in continuous TV tables.
    #[arg(long, default_value_t = 60)]
    pub n_max: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Start state: an input index for finite models, a point otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    /// Also write trajectory.csv.
    #[arg(long)]
    pub trajectory: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long)]
    pub seed: u64,
    /// Start state of the first chain for finite models.
    #[arg(long)]
    pub x0: Option<usize>,
    /// Largest n in the survival table.
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Figure {
    #[value(name = "steps_vs_theta")]
    StepsVsTheta,
    #[value(name = "steps_vs_n", alias = "steps_vs_N")]
    StepsVsN,
}

#[derive(Args)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Discrete,
    General,
    Coupling,
    All,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    /// Replicas for the coupling suite.
    #[arg(long, default_value_t = 100_000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Why a command stopped, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Model(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Model(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Model(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<imh_core::Error> for Failure {
    fn from(e: imh_core::Error) -> Self {
        if e.is_model_error() {
            Failure::Model(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze::analyze(&a),
        Command::Spectrum { model, out } => analyze::spectrum(&model, &out),
        Command::Simulate(a) => simulate::simulate(&a),
        Command::Couple(a) => simulate::couple(&a),
        Command::Reproduce(a) => reproduce::reproduce(&a),
        Command::Validate(a) => return ExitCode::from(validate::validate(&a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
