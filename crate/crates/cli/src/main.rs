mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Run(gpnet::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Run(gpnet::Error::Input(_)) => 1,
            Failure::Run(gpnet::Error::Data(_) | gpnet::Error::Io { .. }) => 2,
            Failure::Run(gpnet::Error::Numeric(_)) => 3,
            Failure::Run(gpnet::Error::Resource(_)) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage: {msg}"),
            Failure::Run(gpnet::Error::Data(e)) => write!(f, "{e} [{}]", e.code()),
            Failure::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<gpnet::Error> for Failure {
    fn from(e: gpnet::Error) -> Self {
        Failure::Run(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
