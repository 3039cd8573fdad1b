use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

/// Distributed rate allocation: simulation and chain analysis.
#[derive(Parser, Debug)]
#[command(name = "ratealloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the queueing simulation and write a trace and summary.
    Simulate(Common),
    /// Stationary law of the allocation chain at `analysis.v`.
    Stationary(Common),
    /// Solve for the non-adaptive parameter and its stationary law.
    SolveVstar(Common),
    /// Mixing-time estimate at `analysis.v` and `analysis.rho`.
    Mixing(Common),
    /// Feasible schedules and stationary law of a white-space network.
    Whitespace(Common),
    /// Parse and check a scenario without running it.
    Validate(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Errors in the scenario itself, as opposed to failures while running it.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => commands::simulate(&c),
        Command::Stationary(c) => commands::stationary(&c),
        Command::SolveVstar(c) => commands::solve_vstar(&c),
        Command::Mixing(c) => commands::mixing(&c),
        Command::Whitespace(c) => commands::whitespace(&c),
        Command::Validate(c) => commands::validate(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
