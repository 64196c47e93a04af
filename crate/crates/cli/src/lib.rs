//! Library behind the `wow` command-line tool.
//!
//! Every command produces a JSON report that is byte-deterministic for fixed
//! inputs, seed and tolerance, independent of the thread count.

pub mod args;
pub mod commands;
pub mod error;
pub mod suites;

pub use args::{Cli, Command};
pub use error::{CliError, ExitStatus};

use std::io::Write;

/// Runs a parsed command line, writing the report to `--out` or `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::input("--threads must be at least 1"));
        }
        builder = builder.num_threads(t);
    }
    if let Some(tol) = cli.tol {
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(CliError::input("--tol must be finite and nonnegative"));
        }
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::solver(format!("thread pool: {e}")))?;
    let (report, status) = pool.install(|| commands::dispatch(cli))?;
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::solver(e.to_string()))?;
    text.push('\n');
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::input(format!("stdout: {e}")))?,
    }
    Ok(status)
}
