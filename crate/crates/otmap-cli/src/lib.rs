//! Command-line front end for the transport-map library: fitting, applying
//! and persisting maps, fairness audits (in-process or two-phase), data
//! repair, and convergence benchmarks against synthetic ground truth.
//!
//! Everything is configured through flags; given identical flags and seeds,
//! every command writes byte-identical output files.

pub mod bench;
mod commands;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod synthetic;

pub use commands::Cli;
pub use error::{CliError, Result};

/// Parses the process arguments, runs the selected command, and reports any
/// failure as a single JSON record on stderr.
pub fn run() -> std::process::ExitCode {
    use clap::Parser;
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_record());
            std::process::ExitCode::FAILURE
        }
    }
}
