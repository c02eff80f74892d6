//! `magtomo`: simulate homodyne data, reconstruct magnon states, and tabulate
//! the waveguide signal model.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magtomo::ErrorClass;
use serde_json::json;

use commands::{Failure, Overrides};

#[derive(Parser)]
#[command(
    name = "magtomo",
    version,
    about = "Magnon state tomography from noisy homodyne data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a target state; writes dataset.csv and its side-car.
    Simulate(Common),
    /// Reconstruct a state from a dataset; writes report.json and Wigner grids.
    Reconstruct(Common),
    /// Tabulate mixing angle and output noise over magnet lengths.
    Snr(Common),
    /// Simulate, reconstruct and score in one go.
    Evaluate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config for this command.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config Fock cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Numerical => EXIT_NUMERICAL,
        ErrorClass::Io => EXIT_IO,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (run, common): (
        fn(&std::path::Path, &std::path::Path, &Overrides) -> Result<(), Failure>,
        Common,
    ) = match cli.command {
        Command::Simulate(c) => (commands::simulate, c),
        Command::Reconstruct(c) => (commands::reconstruct_cmd, c),
        Command::Snr(c) => (commands::snr, c),
        Command::Evaluate(c) => (commands::evaluate, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        cutoff: common.cutoff,
    };
    match run(&common.config, &common.out, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { error, stage }) => {
            let code = exit_code(error.class());
            let mut body = json!({
                "error": error.kind(),
                "message": error.to_string(),
                "exit_code": code,
            });
            if let Some(stage) = stage {
                body["stage"] = json!(stage);
            }
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
