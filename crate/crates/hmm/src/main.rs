use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmm::commands;
use hmm::config::RunConfig;
use hmm::CliError;

#[derive(Parser)]
#[command(name = "hmm", version, about = "Hybrid mimetic mixed finite-volume solver for miscible displacement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a config file and write its artifacts.
    Run {
        /// Path to a flat `key = value` config file.
        config: PathBuf,
    },
    /// Run a mesh-refinement convergence study on a manufactured scenario.
    Converge {
        /// Path to a flat `key = value` config file.
        config: PathBuf,
        /// Number of refinement levels (h and dt halve per level).
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Parse a mesh file and report its admissibility metrics.
    CheckMesh {
        /// Path to a mesh text file.
        path: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let _workers = hmm::thread_cap()?;
    match cli.command {
        Command::Run { config } => commands::cmd_run(&RunConfig::load(&config)?),
        Command::Converge { config, levels } => {
            commands::cmd_converge(&RunConfig::load(&config)?, levels)
        }
        Command::CheckMesh { path } => commands::cmd_check_mesh(&path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
