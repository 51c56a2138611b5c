use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    spaghetto_cli::run(spaghetto_cli::Cli::parse())
}
