use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

mod args;
mod commands;

use args::Cli;

/// A failure tied to a specific flag or path. Exit code 2.
#[derive(Debug)]
pub struct DataError(pub String);

impl DataError {
    pub fn at(what: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        Self(format!("{what}: {err}"))
    }
}

/// Usage line of the named subcommand, or of the whole program.
fn usage_for(sub: Option<&str>) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let found = sub.and_then(|name| cmd.find_subcommand_mut(name).map(|c| c.render_usage().to_string()));
    found.unwrap_or_else(|| cmd.render_usage().to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => {
                    if !e.to_string().contains("Usage:") {
                        eprintln!("\n{}", usage_for(std::env::args().nth(1).as_deref()));
                    }
                    ExitCode::from(1)
                }
            };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(DataError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
