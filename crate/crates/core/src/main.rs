use std::process::ExitCode;

use clap::Parser;
use herald::cli::{error_json, run, Cli, ExperimentConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::reference()),
    }
    .and_then(|cfg| run(cli.command, &cfg, &cli.out, cli.seed, cli.grid_scale));
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
