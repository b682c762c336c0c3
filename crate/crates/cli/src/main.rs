//! `parinv`: forward solves, measurement synthesis, coefficient recovery,
//! and refinement studies for parabolic problems with time-dependent
//! unknown coefficients observed through weighted boundary integrals.

mod artifacts;
mod commands;
mod config;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(name = "parinv", version, about = "Recover time-dependent coefficients of a parabolic equation from weighted boundary measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a problem file and report solvability diagnostics
    Check(Overrides),
    /// Solve the forward problem with known coefficients
    Forward(Overrides),
    /// Generate boundary measurements from a known coefficient trajectory
    Synth(Overrides),
    /// Recover coefficient trajectories from boundary measurements
    Invert(Overrides),
    /// Grid refinement study of forward and reconstruction errors
    Study(Overrides),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(ov) => commands::run_check(ov),
        Command::Forward(ov) => commands::run_forward(ov),
        Command::Synth(ov) => commands::run_synth(ov),
        Command::Invert(ov) => commands::run_invert(ov),
        Command::Study(ov) => commands::run_study(ov),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
