//! Thin wrapper around [`ordercsp::cli::run`]: domain errors print to stderr
//! and exit 1; clap handles usage errors with exit 2.

use std::process::ExitCode;

fn main() -> ExitCode {
    match ordercsp::cli::run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
