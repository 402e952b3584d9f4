//! `batchq` command-line tool.
//!
//! Exit status: 0 on success, 1 when a verification fails, 2 on invalid
//! input or any other error.

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::{RunContext, Status};
use config::RunConfig;

fn run(cli: &Cli) -> anyhow::Result<Status> {
    let cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(threads) = cli.global.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let ctx = RunContext::new(&cli.global, cfg);
    match &cli.command {
        Command::Dist { action } => commands::dist(&ctx, action),
        Command::Queue(a) => commands::queue(&ctx, a),
        Command::Tandem(a) => commands::tandem(&ctx, a),
        Command::Perc { action } => commands::perc(&ctx, action),
        Command::Tc(a) => commands::tc(&ctx, a),
        Command::Verify(a) => commands::verify(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(&cli) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
