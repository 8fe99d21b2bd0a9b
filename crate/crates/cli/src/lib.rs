//! Command-line front end: single fits from files, simulation studies and
//! the scalar threshold curve, all written as plot-ready CSV with a JSON
//! manifest per run.

pub mod args;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod summary;

use std::sync::atomic::AtomicBool;

pub use args::Cli;
pub use commands::Outcome;
pub use error::{CliError, Result};

/// Exit status for an interrupted benchmark.
pub const EXIT_INTERRUPTED: i32 = 130;

pub fn run(cli: &Cli, cancel: &AtomicBool) -> Result<Outcome> {
    use args::Command;
    match &cli.command {
        Command::FitGls(a) => commands::cmd_fit_gls(a),
        Command::FitPpca(a) => commands::cmd_fit_ppca(a),
        Command::BenchGls(a) => commands::cmd_bench_gls(a, cancel),
        Command::BenchPpca(a) => commands::cmd_bench_ppca(a, cancel),
        Command::ThresholdCurve(a) => commands::cmd_threshold_curve(a),
    }
}
