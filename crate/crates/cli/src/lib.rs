//! Command-line and HTTP front ends for `hallway-loc`.
//!
//! Exit statuses: 0 when the pipeline produced a pose (or a stage command
//! succeeded), 2 when localisation degraded to the WLAN estimate, 1 for
//! bad input, bad configuration or usage errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod service;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::{Cli, Command};
pub use config::Config;
pub use error::CliError;

/// Environment variable holding the log filter, e.g. `info` or
/// `hallway_loc_cli=debug`.
pub const LOG_ENV: &str = "HALLWAY_LOC_LOG";

pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env(LOG_ENV).unwrap_or_else(|_| "warn".into());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match commands::execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
