//! Command-line front end for the `qrecover` engine.
//!
//! Commands: `run`, `compare`, `paramcount`, `gen-data`, `noise-eval`.
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod report;
pub mod tools;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("ProtocolMismatch: {0}")]
    ProtocolMismatch(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::ProtocolMismatch(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<qrecover::Error> for CliError {
    fn from(e: qrecover::Error) -> Self {
        use qrecover::Error as E;
        match e {
            E::Spec(_) | E::Split { .. } | E::MissingColumn(_) | E::Capacity(_) | E::Channel(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrecover", version, about = "Hybrid quantum-classical recovery-rate regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model under k-fold CV or LOOCV and write the run reports.
    Run(RunArgs),
    /// Diebold-Mariano significance grid between two runs.
    Compare(CompareArgs),
    /// Print the trainable parameter count of a model.
    Paramcount(ParamcountArgs),
    /// Write a synthetic recovery-rate CSV plus a provenance file.
    GenData(GenDataArgs),
    /// Evaluate a trained fold checkpoint under the noise model.
    NoiseEval(NoiseEvalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML configuration file; defaults are used for missing keys.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `run.output`).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Base seed (overrides the config and QRECOVER_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for gradient evaluation.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override any config key, e.g. `--set train.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
    /// Suppress progress messages.
    #[arg(short, long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Run directory or residual CSV of model A.
    pub a: PathBuf,
    /// Run directory or residual CSV of model B.
    pub b: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Critical value of |DM|.
    #[arg(long, default_value_t = qrecover::eval::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct ParamcountArgs {
    #[arg(long, default_value = "qml-amplitude")]
    pub kind: String,
    #[arg(long, default_value_t = 256)]
    pub input_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 8)]
    pub qubits: usize,
    #[arg(long, default_value_t = 8)]
    pub second_hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Print the published comparison rows as CSV instead.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Destination CSV; provenance goes to `<stem>.provenance.json` beside it.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1725)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 256)]
    pub n_features: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ",")]
    pub delimiter: String,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct NoiseEvalArgs {
    /// Directory written by `run` (needs config.toml and the fold checkpoint).
    pub run_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    /// Evaluate at most this many test rows.
    #[arg(long)]
    pub max_rows: Option<usize>,
    /// Comma-separated multipliers applied to every noise probability.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    pub scales: Vec<f64>,
    /// Output directory; defaults to `<run_dir>/noise_eval`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_with_env<I, T>(args: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, env_seed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: Cli, env_seed: Option<String>) -> Result<(), CliError> {
    match cli.command {
        Command::Run(a) => experiment::cmd_run(&a, env_seed.as_deref()),
        Command::Compare(a) => compare::cmd_compare(&a),
        Command::Paramcount(a) => tools::cmd_paramcount(&a, &mut std::io::stdout().lock()),
        Command::GenData(a) => tools::cmd_gen_data(&a, env_seed.as_deref()),
        Command::NoiseEval(a) => tools::cmd_noise_eval(&a),
    }
}
