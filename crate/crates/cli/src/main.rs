mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use spectrastat_core::Error;

use args::{Cli, Command};
use commands::Output;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Configuration and input problems exit with 2; failures of the numerical
/// procedures on otherwise valid input exit with 3.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::UnstableBranch { .. } | Error::Rank(_) | Error::Degenerate(_) => {
            EXIT_NUMERICAL
        }
        _ => EXIT_CONFIG,
    }
}

fn emit(out: Output, cli: &Cli) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(&out.json).map_err(|e| Error::Parse(e.to_string()))?;
    if let (Some(path), Some(csv)) = (&cli.global.csv_out, &out.csv) {
        std::fs::write(path, csv)?;
    }
    match &cli.global.json_out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = cli.global.seed;
    let out = match &cli.command {
        Command::Esd(a) => commands::esd(a)?,
        Command::Law(a) => commands::law(a)?,
        Command::Twtable { action } => commands::twtable(action)?,
        Command::Test { test } => commands::test(test)?,
        Command::Spiked(a) => commands::spiked(a, seed)?,
        Command::Signals(a) => commands::signals(a)?,
        Command::Changepoint(a) => commands::changepoint(a)?,
        Command::Experiment { experiment } => commands::experiment(experiment, seed)?,
    };
    emit(out, cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
