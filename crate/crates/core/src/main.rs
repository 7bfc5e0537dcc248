use std::process::ExitCode;

use clap::Parser;
use edgeplace::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
