//! `smf`: command-line front end for stochastic matrix factorization.
//!
//! Exit codes: 0 success, 1 replay produced different outputs, 2 usage or
//! input error, 3 numerical failure.

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use smf_core::SmfError;

use args::Cli;
use commands::ReplayMismatch;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ReplayMismatch>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<SmfError>() {
            return if e.is_numerical() { 3 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::execute(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
