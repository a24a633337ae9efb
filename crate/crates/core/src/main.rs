use std::process::ExitCode;

use clap::Parser;
use cloudopt_core::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
