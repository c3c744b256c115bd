//! `inn` command-line driver.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod plot;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Constructive and trained invertible networks: construction, rate studies
/// and the PCA + coupling-INN PDE pipeline.
#[derive(Parser, Debug)]
#[command(name = "inn", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base seed for every random quantity.
    #[arg(long, global = true, env = "INN_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every logical core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build an interpolating invertible map from grid data.
    Construct(commands::ConstructArgs),
    /// Empirical error of F_nn against a built-in map over a list of n.
    RateStudy(commands::RateArgs),
    /// Generate the elliptic PDE dataset.
    PdeGen(commands::PdeGenArgs),
    /// Fit input/output PCA bases on a dataset split.
    Pca(commands::PcaArgs),
    /// Train a coupling INN on the reduced dataset.
    Train(commands::TrainArgs),
    /// Tabulate e_a/e_g for trained runs, optionally with an FNN baseline.
    Eval(commands::EvalArgs),
    /// Check a serialized model against its invariants.
    Verify(commands::VerifyArgs),
}

/// Failures split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unreadable inputs (exit 2).
    Usage(anyhow::Error),
    /// Work failed after inputs were accepted (exit 1).
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(e: impl Into<anyhow::Error>) -> CliResult<T> {
    Err(CliError::Usage(e.into()))
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.global.threads).build_global().map_err(|e| CliError::Runtime(e.into()))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Construct(a) => commands::construct(g, a),
        Command::RateStudy(a) => commands::rate_study_cmd(g, a),
        Command::PdeGen(a) => commands::pde_gen(g, a),
        Command::Pca(a) => commands::pca(g, a),
        Command::Train(a) => commands::train_cmd(g, a),
        Command::Eval(a) => commands::eval(g, a),
        Command::Verify(a) => commands::verify(g, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
