//! `qif-lab <divergence|flow|train|oracle-check> --config <path> [--out <dir>] [--force]`
//!
//! Exit codes: `0` success, `2` bad input (config, data, paths, refused
//! overwrite), `3` numerical failure or a failed oracle check.

mod commands;
pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{CommandName, ExperimentConfig};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Caps the worker threads used inside a run.
pub const THREADS_ENV: &str = "QIF_LAB_THREADS";

/// Schema version written into every `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "qif-lab", version, about = "QIF divergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Divergences between two discrete distributions.
    Divergence(RunArgs),
    /// Particle gradient flow toward a target cloud.
    Flow(RunArgs),
    /// Two-pass dropout training with a consistency penalty.
    Train(RunArgs),
    /// Classical vs density-matrix fidelity on random pairs.
    OracleCheck(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

/// A command failure with the exit code it maps to.
#[derive(Debug)]
pub(crate) struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INPUT },
            message: e.to_string(),
        }
    }
}

fn thread_count() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::input(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn execute(name: CommandName, args: RunArgs) -> Result<i32, Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.command != name {
        return Err(Failure::input(format!(
            "config is for `{}` but `{}` was invoked",
            cfg.command.as_str(),
            name.as_str()
        )));
    }
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    cfg.resolve_paths(&base);
    let out_dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Failure::input("no output directory: set `output_dir` or pass --out"))?;

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_count()? {
            b = b.num_threads(n);
        }
        b.build()
            .map_err(|e| Failure::input(format!("cannot start worker threads: {e}")))?
    };
    pool.install(|| commands::dispatch(&cfg, &out_dir, args.force))
}

/// Parses `args` (including the program name) and runs one command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (name, args) = match cli.command {
        Command::Divergence(a) => (CommandName::Divergence, a),
        Command::Flow(a) => (CommandName::Flow, a),
        Command::Train(a) => (CommandName::Train, a),
        Command::OracleCheck(a) => (CommandName::OracleCheck, a),
    };
    match execute(name, args) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("qif-lab {}: {}", name.as_str(), f.message);
            f.code
        }
    }
}
