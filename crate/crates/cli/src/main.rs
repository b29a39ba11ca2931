mod args;
mod commands;
mod error;
mod settings;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;
use settings::{pick, FileConfig};

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let threads = pick(cli.threads, file.threads, 0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::invalid(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => commands::synth(a, &file),
        Command::Stack(a) => commands::stack(a),
        Command::Optimize(a) => commands::optimize(a, &file),
        Command::Fuse(a) => commands::fuse(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Oracle(a) => commands::oracle(a, &file),
        Command::BenchClpso(a) => commands::bench_clpso(a, &file),
    })
}

fn main() -> ExitCode {
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
