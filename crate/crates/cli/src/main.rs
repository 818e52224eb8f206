//! `lexvote`: sweep, aggregate, report and validate from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 transport, 4 data.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexvote::experiment::ExperimentError;
use lexvote::label_models::LabelModelError;
use lexvote::prompting::PromptingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Transport(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let msg = e.to_string();
        match e {
            ExperimentError::Prompting(PromptingError::Transport { .. }) => CliError::Transport(msg),
            ExperimentError::Prompting(
                PromptingError::InvalidTemperature(_)
                | PromptingError::InvalidConfig(_)
                | PromptingError::UnknownPromptType(_),
            )
            | ExperimentError::LabelModel(LabelModelError::UnknownModel(_) | LabelModelError::InvalidConfig(_))
            | ExperimentError::InvalidSubsetSize { .. }
            | ExperimentError::TooManyCombinations { .. } => CliError::Usage(msg),
            _ => CliError::Data(msg),
        }
    }
}

/// Routes any library error through [`ExperimentError`] for classification.
pub(crate) fn lib_err<E: Into<ExperimentError>>(e: E) -> CliError {
    CliError::from(e.into())
}

#[derive(Parser)]
#[command(name = "lexvote", version, about = "Consolidate repeated LLM answers with label models")]
struct Cli {
    /// Optional key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prompt every example at every temperature and run, filling the store.
    Sweep(SweepArgs),
    /// Build vote matrices from the store and run the label models.
    Aggregate(AggregateArgs),
    /// Render report.md and table CSVs from aggregate outputs.
    Report(ReportArgs),
    /// Check a dataset and/or store and print diagnostics.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub struct SweepArgs {
    /// Dataset, JSON lines.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Run store, JSON lines; created if missing.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Endpoint base URL; `/v1/chat/completions` is appended.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub prompt_type: Option<String>,
    /// Comma-separated, e.g. `0.1,0.5,1.0`. Default 0.1 to 1.0 in steps of 0.1.
    #[arg(long)]
    pub temperatures: Option<String>,
    #[arg(long)]
    pub runs: Option<u32>,
    #[arg(long)]
    pub max_parallel: Option<usize>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    /// Serve only stored responses; fail on the first missing one.
    #[arg(long)]
    pub replay_only: bool,
}

#[derive(Args)]
pub struct AggregateArgs {
    /// Dataset with gold labels.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Required when the store holds more than one model.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub prompt_type: Option<String>,
    /// Restrict to these temperatures (comma-separated).
    #[arg(long)]
    pub temperatures: Option<String>,
    /// Comma-separated estimator names.
    #[arg(long)]
    pub estimators: Option<String>,
    /// Temperature whose matrix gets posterior files and the subset study.
    #[arg(long)]
    pub focus_temperature: Option<String>,
    #[arg(long)]
    pub combination_estimator: Option<String>,
    /// Subset sizes: `3-9`, `3,5,7` or `none`.
    #[arg(long)]
    pub combination_sizes: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Directory holding aggregate outputs.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Destination directory; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = config::Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Sweep(a) => commands::sweep(&settings, a),
        Command::Aggregate(a) => commands::aggregate(&settings, a),
        Command::Report(a) => commands::report(&settings, a),
        Command::Validate(a) => commands::validate(&settings, a),
    }
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
            ExitCode::from(e.exit_code())
        }
    }
}
