//! Sweeps over temperatures and runs, and the summary tables built from them.

mod artifacts;
mod combos;
mod grid;
mod report;
mod stats;
mod sweep;

use thiserror::Error;

use crate::label_models::LabelModelError;
use crate::prompting::PromptingError;
use crate::votes::io::DataError;
use crate::votes::VotesError;

pub use artifacts::{
    fit_with_params, read_combinations_csv, read_grid_csv, read_meta, read_run_accuracy_csv, write_combinations_csv, write_grid_csv,
    write_meta, write_params_csv, write_posteriors_csv, write_run_accuracy_csv, RunAccuracy,
    SubsetAccuracy,
};
pub use combos::{combination_count, subset_accuracies, subset_combinations, CombinationStats, DEFAULT_COMBINATION_CAP};
pub use grid::{cell_accuracy, label_model_grid, GridResult};
pub use report::{emit_report, Provenance, Report};
pub use stats::{run_stats, stats_row, RunStats, StatsRow};
pub use sweep::{plan_requests, sweep, SweepOutcome};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Prompting(#[from] PromptingError),
    #[error(transparent)]
    Votes(#[from] VotesError),
    #[error(transparent)]
    LabelModel(#[from] LabelModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no accuracies to summarize")]
    NoAccuracies,
    #[error("C({m}, {k}) = {count} subsets exceeds the cap of {cap}")]
    TooManyCombinations { m: usize, k: usize, count: u128, cap: u128 },
    #[error("subset size {k} outside 1..={m}")]
    InvalidSubsetSize { k: usize, m: usize },
    #[error("{0}")]
    Invalid(String),
}
