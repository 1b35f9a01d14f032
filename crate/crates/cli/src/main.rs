//! `slrr` command-line tool.
//!
//! Exit codes: 0 on success, 1 when the numbers fail (non-convergence,
//! degenerate affinity, ...), 2 for usage and I/O errors.

mod args;
mod commands;
mod config;
mod plot;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<slrr::Error>() {
            return if e.is_numerical() { 1 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
