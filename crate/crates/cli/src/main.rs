//! `streambench`: command-line runner for the benchmark pipeline.
//!
//! Subcommands cover the pipeline stages individually (`generate`,
//! `detect`, `optimize`, `score`, `normalize`, `plotdata`) plus a one-shot
//! `run` that chains detect, optimize, score and report. Every stage works
//! off artifacts on disk, so stages can be rerun, mixed with third-party
//! results, or audited after the fact.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 corpus validation
//! failure, 3 partial detector failure (some files scored, some did not).

mod commands;
mod common;

use clap::error::ErrorKind;
use clap::Parser;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "streambench",
    version,
    about = "Benchmark pipeline for streaming anomaly detectors",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: commands::Command,
    /// Worker threads for per-file parallelism (defaults to the CPU count).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Err(e) = common::init_workers(cli.workers) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match cli.command.execute() {
        Ok(commands::Outcome::Complete) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_corpus_validation() { 2 } else { 1 })
        }
    }
}
