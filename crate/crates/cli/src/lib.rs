//! File formats and the `dikin` command-line tool on top of `dikin-core`.
//!
//! Exit codes: 0 success, 1 `diagnose` found violations, 2 usage, file or
//! parse errors, 3 infeasible initial point, 4 numeric failure.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
pub mod formats;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::{Cli, CliError, Command};

/// Parse `args` (including the program name), run the command and return the
/// process exit code. Results go to stdout, diagnostics to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match commands::execute(&cli.command, &mut out) {
        Ok(code) => {
            let _ = out.flush();
            code
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("dikin: {e}");
            e.exit_code()
        }
    }
}
