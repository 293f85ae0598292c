mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Cli;
use crate::error::EXIT_USAGE;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("SKELMAP_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: SKELMAP_THREADS must be a positive integer, got {v:?} [precondition: threads]");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
