use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::Parser;
use nomix_cli::{run, Cli, Outcome, EXIT_INTERRUPTED};

static CANCEL: AtomicBool = AtomicBool::new(false);

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = ctrlc::set_handler(|| CANCEL.store(true, Ordering::Relaxed)) {
        eprintln!("warning: interrupt handler not installed: {e}");
    }
    match run(&cli, &CANCEL) {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Truncated) => {
            eprintln!("interrupted: partial results written");
            ExitCode::from(EXIT_INTERRUPTED as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
