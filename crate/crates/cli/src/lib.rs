//! Command-line front end: argument parsing, verb execution and report
//! emission for the `covlab` binary.

pub mod args;
pub mod commands;
pub mod report;
pub mod verify;

use std::io;
use std::process::ExitCode;
use std::time::Instant;

pub use args::{config_file_text, parse_invocation, Format, Invocation, Verb};
pub use commands::execute;
pub use report::{emit_report, Field, Report, Row};
pub use verify::{verify_battery, verify_battery_with, Check};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// The error as a single line.
    pub fn one_line(&self) -> String {
        let text = self.to_string();
        let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        line.trim_start_matches("error: ").to_string()
    }
}

/// Exit status for failed verdicts.
pub const EXIT_FAIL: u8 = 1;
/// Exit status for invalid invocations and runtime errors.
pub const EXIT_USAGE: u8 = 2;

/// Runs a full invocation; 0 only when every verdict passes.
pub fn run(argv: &[String]) -> ExitCode {
    let inv = match parse_invocation(argv, None) {
        Ok(inv) => inv,
        Err(CliError::Clap(e)) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("covlab: {}", e.one_line());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run_invocation(&inv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("covlab: {}", e.one_line());
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Executes a parsed invocation, emitting its report; returns whether every
/// verdict passed.
pub fn run_invocation(inv: &Invocation) -> Result<bool, CliError> {
    if inv.verb == Verb::Verify {
        let ok = verify_battery(inv.config.seed, &mut io::stdout().lock())
            .map_err(|e| CliError::Io(e.to_string()))?;
        return Ok(ok);
    }
    let start = Instant::now();
    let mut report = execute(inv)?;
    if inv.timing {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    emit_report(&report, inv.format, inv.out.as_deref())?;
    Ok(report.passed())
}
