use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod bench;
mod commands;
mod error;

use args::{Cli, Command};
use error::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(mlwm::error::Error::InvalidParameter(_)) => 1,
            CliError::NotConverged { .. } => 3,
            _ => 2,
        }
    }
}
