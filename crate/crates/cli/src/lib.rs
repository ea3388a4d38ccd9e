//! Command-line front end for `dpconverse`: channel ingestion, converse and
//! baseline sweeps, CSV output, plot data and a result cache.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when some rows
//! failed (the rest are still written, with the message in an `error`
//! column), 1 for I/O failures.

pub mod args;
pub mod cache;
pub mod commands;
pub mod error;
pub mod spec;
pub mod table;

pub use args::{execute, Cli};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, EXIT_RUNTIME};
pub use spec::{parse_n_range, ChannelSpec, QSelector};
pub use table::parse_results_csv;

/// Parses `args` and runs the command; returns the exit status, having
/// printed any message to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
