//! The `fovnoise` command-line tool.
//!
//! Every command prints a one-line JSON summary on success. On failure it
//! prints a JSON error line to stderr and exits with 2 for configuration
//! errors or 3 for I/O errors.

use std::ffi::OsString;

use clap::Parser;

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;

use args::{Cli, Command};
use error::{CliError, CliResult};

pub fn execute(cli: &Cli) -> CliResult<serde_json::Value> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        // Fails only if the pool already exists, e.g. when called twice in
        // one process; the existing pool is then used.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Foveate(a) => commands::foveate(a),
        Command::Enhance(a) => commands::enhance(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Sequence(a) => commands::sequence(a),
        Command::Bench(a) => commands::bench(a),
        Command::Impulses(a) => commands::impulses(a),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", CliError::config(e.to_string().trim()).to_json_line());
            return 2;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            println!("{report}");
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.kind.exit_code()
        }
    }
}
