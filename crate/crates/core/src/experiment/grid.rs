use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::ExperimentError;
use crate::label_models::LabelModel;
use crate::prompting::Temperature;
use crate::votes::{accuracy, EvaluationResult, Fraction, Labels, VoteMatrix};

/// Accuracy of `model`'s hardened posteriors on `matrix`.
pub fn cell_accuracy(
    model: &dyn LabelModel,
    matrix: &VoteMatrix,
    gold: &Labels,
) -> Result<EvaluationResult, ExperimentError> {
    let posteriors = model.predict(matrix)?;
    let predictions = matrix.label_map(&posteriors.harden());
    Ok(accuracy(&predictions, gold)?)
}

/// Model by temperature accuracies with row and column means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub models: Vec<String>,
    pub temperatures: Vec<Temperature>,
    /// `cells[model][temperature]`.
    pub cells: Vec<Vec<EvaluationResult>>,
    pub row_avg: Vec<Fraction>,
    pub col_avg: Vec<Fraction>,
}

impl GridResult {
    /// Builds the averages from the cells.
    pub fn from_cells(models: Vec<String>, temperatures: Vec<Temperature>, cells: Vec<Vec<EvaluationResult>>) -> Self {
        let mean = |xs: &mut dyn Iterator<Item = Fraction>| {
            let (sum, n) = xs.fold((Fraction::zero(), 0i64), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                Fraction::zero()
            } else {
                sum / n
            }
        };
        let row_avg = cells.iter().map(|row| mean(&mut row.iter().map(EvaluationResult::fraction))).collect();
        let col_avg = (0..temperatures.len()).map(|t| mean(&mut cells.iter().map(|row| row[t].fraction()))).collect();
        GridResult { models, temperatures, cells, row_avg, col_avg }
    }
}

/// Evaluates every model on every temperature's matrix.
pub fn label_model_grid(
    matrices: &BTreeMap<Temperature, VoteMatrix>,
    gold: &Labels,
    models: &[&dyn LabelModel],
) -> Result<GridResult, ExperimentError> {
    let temperatures: Vec<Temperature> = matrices.keys().copied().collect();
    let tasks: Vec<(usize, &VoteMatrix)> =
        (0..models.len()).flat_map(|m| matrices.values().map(move |mx| (m, mx))).collect();
    let flat = crate::par_map(&tasks, |(m, mx)| cell_accuracy(models[*m], mx, gold));
    let mut cells = Vec::with_capacity(models.len());
    let mut it = flat.into_iter();
    for _ in models {
        cells.push(it.by_ref().take(temperatures.len()).collect::<Result<Vec<_>, _>>()?);
    }
    let names = models.iter().map(|m| m.name().to_string()).collect();
    Ok(GridResult::from_cells(names, temperatures, cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_models::{Estimator, FitConfig};
    use crate::votes::Vote;

    #[test]
    fn single_source_cells_equal_source_accuracy() {
        let matrix = VoteMatrix::from_rows(&[vec![1], vec![-1], vec![1], vec![1], vec![-1]]).unwrap();
        let gold: Labels = matrix.label_map(&[Vote::Positive, Vote::Negative, Vote::Negative, Vote::Positive, Vote::Positive]);
        let source = accuracy(&matrix.source_labels(0), &gold).unwrap();
        let t = Temperature::new(0.5).unwrap();
        let matrices = BTreeMap::from([(t, matrix)]);
        let cfg = FitConfig::default();
        let estimators: Vec<Estimator> =
            crate::label_models::ESTIMATOR_NAMES.iter().map(|n| Estimator::from_name(n, &cfg).unwrap()).collect();
        let models: Vec<&dyn LabelModel> = estimators.iter().map(|e| e as &dyn LabelModel).collect();
        let grid = label_model_grid(&matrices, &gold, &models).unwrap();
        for row in &grid.cells {
            assert_eq!(row, &vec![source]);
        }
    }

    #[test]
    fn averages_are_exact() {
        let f = |n| Fraction::new(n, 109);
        let e = |n| EvaluationResult::new(n, 109);
        let t: Vec<Temperature> = Temperature::decile_grid().into_iter().take(2).collect();
        let g = GridResult::from_cells(vec!["a".into(), "b".into()], t, vec![vec![e(80), e(81)], vec![e(79), e(79)]]);
        assert_eq!(g.row_avg, vec![Fraction::new(161, 218), f(79)]);
        assert_eq!(g.col_avg, vec![Fraction::new(159, 218), f(80)]);
    }
}
