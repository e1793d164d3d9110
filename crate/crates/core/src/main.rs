use std::process::ExitCode;

use aloha_noma::cli::{Cli, ExperimentSpec, SEED_ENV};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env_seed = std::env::var(SEED_ENV).ok();
    let result = ExperimentSpec::resolve(cli, env_seed.as_deref()).and_then(|spec| spec.run());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aloha-noma: {e}");
            ExitCode::FAILURE
        }
    }
}
