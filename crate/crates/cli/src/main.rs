//! `lssboost` command-line driver.

mod common;
mod gxe;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "lssboost", version, about = "Sparse location-scale polygenic scores by batch-wise boosting")]
struct Cli {
    /// Output directory
    #[arg(long, global = true, env = "LSSBOOST_OUT", default_value = "lssboost-out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, env = "LSSBOOST_THREADS", default_value_t = 0)]
    threads: usize,
    /// More log output on stderr (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit mu and sigma models with early stopping on a validation set
    Fit(pipeline::FitArgs),
    /// Compute mPRS and vPRS for a genotype file
    Score(pipeline::ScoreArgs),
    /// Simulate cohorts over an h2 x sparsity grid
    Simulate(pipeline::SimulateArgs),
    /// Evaluate a model against a simulated cohort
    Evaluate(pipeline::EvaluateArgs),
    /// Gene-by-environment analyses
    #[command(subcommand)]
    Gxe(gxe::GxeCommand),
}

fn run(cli: Cli) -> CliResult<()> {
    common::ensure_dir(&cli.out)?;
    match cli.command {
        Command::Fit(a) => pipeline::cmd_fit(&a, &cli.out),
        Command::Score(a) => pipeline::cmd_score(&a, &cli.out),
        Command::Simulate(a) => pipeline::cmd_simulate(&a, &cli.out),
        Command::Evaluate(a) => pipeline::cmd_evaluate(&a, &cli.out),
        Command::Gxe(c) => gxe::cmd_gxe(&c, &cli.out),
    }
}

fn fail(err: &CliError) -> ExitCode {
    let msg = err.to_string().replace(['\n', '\t'], " ");
    eprintln!("error\t{}\t{msg}", err.class());
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let msg: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            return fail(&CliError::Usage(msg.join(" ").trim_start_matches("error: ").to_string()));
        }
    };
    let level = match cli.verbose {
        0 => "off",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let threads = cli.threads;
    match lssboost::par::with_threads(threads, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
