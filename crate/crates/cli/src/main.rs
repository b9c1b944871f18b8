use std::process::ExitCode;

use clap::Parser;
use polvote_cli::args::Cli;
use polvote_core::Error;

fn main() -> ExitCode {
    match polvote_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::InvalidConfig { .. })) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
