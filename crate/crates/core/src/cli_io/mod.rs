//! Command-line front end: JSON config in, JSON record and frontier CSV out.

pub mod commands;
pub mod config;
pub mod csv;
pub mod record;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::{run_command, Outcome, RunOptions};
pub use config::{CommandName, RunConfig};
pub use record::ResultRecord;

use crate::error::ModelError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const BAD_INPUT: i32 = 2;
    pub const EMPTY: i32 = 3;
}

/// Only consulted for the worker count, which never changes results.
pub const WORKERS_ENV: &str = "SEQATTACK_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Model(ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    EmptyResult(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::EmptyResult(_) | CliError::Model(ModelError::EmptyFrontier) => exit::EMPTY,
            _ => exit::BAD_INPUT,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "seqattack", version, about = "Sequential intercept-resend attacks on DPS QKD")]
pub struct Cli {
    /// Command to run; defaults to the config's "command" field.
    #[arg(value_enum)]
    pub command: Option<CommandName>,
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path: the CSV for `frontier`, the JSON record otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (also read from SEQATTACK_WORKERS).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record the wall-clock time in the output record.
    #[arg(long)]
    pub timestamp: bool,
}

fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::config(format!("{WORKERS_ENV}: expected a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let (cfg, base_dir) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let cfg = RunConfig::from_json(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, dir)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    let command = cli
        .command
        .or(cfg.command)
        .ok_or_else(|| CliError::config("no command given on the command line or in the config"))?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::config("--workers must be at least 1")),
        Some(n) => Some(n),
        None => workers_from_env()?,
    };
    let opts = RunOptions {
        seed: cli.seed,
        workers,
        base_dir: base_dir.clone(),
    };
    let in_config = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base_dir.join(p) };

    let Outcome {
        mut record,
        csv,
        exit_code,
    } = run_command(command, &cfg, &opts)?;
    if cli.timestamp {
        record.stamp_now();
    }
    let json = record.to_json();
    let json_path = cfg.output_json().map(in_config);

    match csv {
        Some(csv) => {
            let csv_path = cli.out.clone().or_else(|| cfg.output_csv().map(in_config));
            match &csv_path {
                Some(p) => write_file(p, &csv)?,
                None => print!("{csv}"),
            }
            match (&json_path, &csv_path) {
                (Some(p), _) => write_file(p, &json)?,
                (None, Some(_)) => print!("{json}"),
                (None, None) => {}
            }
        }
        None => match cli.out.clone().or(json_path) {
            Some(p) => write_file(&p, &json)?,
            None => print!("{json}"),
        },
    }
    if exit_code == exit::EMPTY {
        eprintln!("{}: empty result", command.as_str());
    }
    Ok(exit_code)
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
