mod cli;
mod commands;
mod config;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};

/// Exit status and message for a failed command.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<qst_core::Error> for Failure {
    fn from(e: qst_core::Error) -> Self {
        use qst_core::Error::*;
        let code = match e {
            Numerical(_) => 4,
            PhotonMismatch { .. }
            | NotNormalized(_)
            | DimensionMismatch(_)
            | NegativeEntry { .. }
            | NotSquare { .. }
            | Format(_)
            | Io(_)
            | Json(_) => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("QST_THREADS") else {
        return Ok(());
    };
    let n: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::usage(format!(
            "QST_THREADS must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::usage(format!("cannot size the worker pool: {e}")))
}

fn run() -> Result<(), Failure> {
    let args = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_threads()?;
    match cli.command {
        Command::BuildMatrix(a) => commands::build_matrix(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Recover(a) => commands::recover(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Impulse(a) => commands::impulse(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
