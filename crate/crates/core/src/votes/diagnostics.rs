use serde::Serialize;

use super::{Vote, VoteMatrix};

/// Sources with coverage strictly below this are flagged.
pub const LOW_COVERAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceDiagnostics {
    pub source_id: String,
    /// Fraction of non-abstain cells in the column.
    pub coverage: f64,
    pub positives: usize,
    pub negatives: usize,
    pub abstains: usize,
    /// Share of `+1` among non-abstain votes; `None` when the column is all abstain.
    pub positive_share: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixDiagnostics {
    pub n_items: usize,
    pub n_sources: usize,
    pub abstain_rate: f64,
    /// Items on which every source abstained.
    pub unlabeled_items: usize,
    pub sources: Vec<SourceDiagnostics>,
}

impl MatrixDiagnostics {
    pub fn flagged(&self) -> impl Iterator<Item = &SourceDiagnostics> {
        self.sources.iter().filter(|s| s.flagged)
    }
}

pub fn validate_matrix(matrix: &VoteMatrix) -> MatrixDiagnostics {
    let n = matrix.n_items();
    let sources: Vec<SourceDiagnostics> = matrix
        .source_ids()
        .iter()
        .enumerate()
        .map(|(s, id)| {
            let (mut positives, mut negatives, mut abstains) = (0, 0, 0);
            for v in matrix.column(s) {
                match v {
                    Vote::Positive => positives += 1,
                    Vote::Negative => negatives += 1,
                    Vote::Abstain => abstains += 1,
                }
            }
            let answered = positives + negatives;
            let coverage = answered as f64 / n as f64;
            SourceDiagnostics {
                source_id: id.clone(),
                coverage,
                positives,
                negatives,
                abstains,
                positive_share: (answered > 0).then(|| positives as f64 / answered as f64),
                flagged: coverage < LOW_COVERAGE,
            }
        })
        .collect();
    let total_abstains: usize = sources.iter().map(|s| s.abstains).sum();
    let unlabeled_items = matrix
        .rows()
        .filter(|row| row.iter().all(|v| v.is_abstain()))
        .count();
    MatrixDiagnostics {
        n_items: n,
        n_sources: matrix.n_sources(),
        abstain_rate: total_abstains as f64 / (n * matrix.n_sources()) as f64,
        unlabeled_items,
        sources,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_abstain_column_is_flagged() {
        let m = VoteMatrix::from_rows(&[vec![1, 0], vec![-1, 0], vec![1, 0]]).unwrap();
        let d = validate_matrix(&m);
        assert_eq!(d.sources[1].coverage, 0.0);
        assert!(d.sources[1].flagged);
        assert_eq!(d.sources[1].positive_share, None);
        assert!(!d.sources[0].flagged);
        assert_eq!(d.flagged().count(), 1);
    }

    #[test]
    fn full_coverage_has_no_flags() {
        let m = VoteMatrix::from_rows(&[vec![1, -1], vec![-1, -1]]).unwrap();
        let d = validate_matrix(&m);
        assert!(d.sources.iter().all(|s| s.coverage == 1.0));
        assert_eq!(d.flagged().count(), 0);
        assert_eq!(d.abstain_rate, 0.0);
    }

    #[test]
    fn one_abstain_in_four() {
        let m = VoteMatrix::from_rows(&[vec![1], vec![0], vec![-1], vec![1]]).unwrap();
        let d = validate_matrix(&m);
        assert_eq!(d.sources[0].coverage, 0.75);
        assert_eq!(d.sources[0].positive_share, Some(2.0 / 3.0));
        assert_eq!(d.unlabeled_items, 1);
    }
}
