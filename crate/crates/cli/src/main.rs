mod args;
mod commands;
mod io;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<automodel::AmError> for CliError {
    fn from(e: automodel::AmError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// `AM_THREADS` caps the worker pool; unset means one per core.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("AM_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("AM_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (text, out) = match &cli.command {
        Command::SimulateMnm(a) => (commands::simulate(a)?, &a.common.out),
        Command::FitMnm(a) => (commands::fit_mnm(a)?, &a.common.out),
        Command::FitReg(a) => (commands::fit_reg(a)?, &a.common.out),
        Command::OracleSimple(a) => (commands::oracle_simple(a)?, &a.common.out),
        Command::BaselineJs(a) => (commands::baseline_js(a)?, &a.common.out),
    };
    io::write_output(out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
