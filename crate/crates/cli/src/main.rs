//! `outbreak`: generate contact networks, simulate stochastic SIR spreading,
//! build labeled datasets, train and evaluate take-off predictors, run
//! pretrain-finetune transfer, and plot the results.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 runtime.

mod commands;
mod error;
mod manifest;
mod svg;

use clap::Parser;

use commands::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
