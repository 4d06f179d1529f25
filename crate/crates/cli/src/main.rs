mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::error::CliResult;

fn setup(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = setup(&cli).and_then(|()| commands::run(&cli));
    match result {
        Ok(out) => {
            println!("{} -> {}", out.summary, out.dir.display());
            match out.failure {
                None => ExitCode::SUCCESS,
                Some(msg) => {
                    eprintln!("partreg: {}", error::CliError::Check(msg));
                    ExitCode::from(2)
                }
            }
        }
        Err(e) => {
            eprintln!("partreg: {e}");
            ExitCode::FAILURE
        }
    }
}
