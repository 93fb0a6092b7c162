// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use drayage_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command.into_config().and_then(|c| drayage_cli::execute(&c)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
