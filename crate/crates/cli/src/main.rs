//! `liou`: command-line driver for the ensemble oracle, phase-space solvers
//! and resource estimates.

mod commands;
mod config;
mod error;
mod estimate;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Invocation;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "liou", version = commands::VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// `--config FILE`, `--threads K` and any `--key value` overrides.
#[derive(Args, Debug)]
struct RawArgs {
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    args: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo ensemble of Burgers runs and its empirical distribution.
    Ensemble(RawArgs),
    /// Evolve a density under the full phase-space transport equation.
    Liouville(RawArgs),
    /// Evolve a 3-point marginal under a closure.
    Marginal(RawArgs),
    /// Compare a solver field with an oracle histogram.
    Compare(RawArgs),
    /// Qubit counts and cost models.
    Estimate(estimate::EstimateArgs),
    /// Build the space-time linear system and check it against time stepping.
    Causal(RawArgs),
}

fn with_threads(raw: &RawArgs, run: fn(&Invocation) -> CliResult<()>) -> CliResult<()> {
    let inv = Invocation::parse(&raw.args)?;
    if let Some(k) = inv.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::config("bad_threads", e.to_string()))?;
    }
    run(&inv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ensemble(a) => with_threads(a, commands::ensemble),
        Command::Liouville(a) => with_threads(a, commands::liouville),
        Command::Marginal(a) => with_threads(a, commands::marginal),
        Command::Compare(a) => with_threads(a, commands::compare),
        Command::Causal(a) => with_threads(a, commands::causal),
        Command::Estimate(a) => estimate::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit as u8)
        }
    }
}
