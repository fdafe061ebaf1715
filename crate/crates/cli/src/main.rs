//! `hiseq` command-line entry point.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.

mod cli;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use commands::{Ctx, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ctx = Ctx::from_cli(&cli);
    let result = match &cli.command {
        Command::Synth(args) => commands::synth(&ctx, args),
        Command::Sample(args) => commands::sample(&ctx, args),
        Command::Decompose(args) => commands::decompose(&ctx, args),
        Command::Validate(args) => commands::validate(&ctx, args),
        Command::Score(args) => commands::score(&ctx, args),
        Command::OracleCheck(args) => commands::oracle_check(&ctx, args),
        Command::Perturb(args) => commands::perturb_cmd(&ctx, args),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
