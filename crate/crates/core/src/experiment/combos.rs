use itertools::Itertools;
use serde::Serialize;

use super::grid::cell_accuracy;
use super::stats::{stats_row, StatsRow};
use super::ExperimentError;
use crate::label_models::LabelModel;
use crate::votes::{EvaluationResult, Fraction, Labels, VoteMatrix};

pub const DEFAULT_COMBINATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CombinationStats {
    pub k: usize,
    /// Number of subsets evaluated, `C(m, k)`.
    pub subsets: usize,
    pub stats: StatsRow,
}

/// `C(m, k)`, saturating at `u128::MAX`.
pub fn combination_count(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((m - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Accuracy of `model` on every `k`-column submatrix, in lexicographic order
/// of the column index sets.
pub fn subset_accuracies(
    matrix: &VoteMatrix,
    k: usize,
    model: &dyn LabelModel,
    gold: &Labels,
    cap: u128,
) -> Result<Vec<(Vec<usize>, EvaluationResult)>, ExperimentError> {
    let m = matrix.n_sources();
    if k == 0 || k > m {
        return Err(ExperimentError::InvalidSubsetSize { k, m });
    }
    let count = combination_count(m, k);
    if count > cap {
        return Err(ExperimentError::TooManyCombinations { m, k, count, cap });
    }
    let subsets: Vec<Vec<usize>> = (0..m).combinations(k).collect();
    let results = crate::par_map(&subsets, |cols| {
        let sub = matrix.select_sources(cols)?;
        cell_accuracy(model, &sub, gold)
    });
    subsets.into_iter().zip(results).map(|(s, r)| Ok((s, r?))).collect()
}

/// Summary of `model`'s accuracy over all `C(m, k)` source subsets.
pub fn subset_combinations(
    matrix: &VoteMatrix,
    k: usize,
    model: &dyn LabelModel,
    gold: &Labels,
    cap: u128,
) -> Result<CombinationStats, ExperimentError> {
    let accs: Vec<Fraction> =
        subset_accuracies(matrix, k, model, gold, cap)?.into_iter().map(|(_, a)| a.fraction()).collect();
    Ok(CombinationStats { k, subsets: accs.len(), stats: stats_row(&accs)? })
}
