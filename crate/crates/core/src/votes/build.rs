use std::collections::{BTreeMap, BTreeSet};

use super::{Vote, VoteMatrix, VotesError};
use crate::prompting::{RunRecord, Temperature};

/// Rule selecting which run records become source columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Every `(temperature, run_index)` pair is its own source.
    PerRun,
    /// Only records at one temperature; one source per run index.
    RunsAt(Temperature),
}

impl Grouping {
    fn source_key(&self, record: &RunRecord) -> Option<(Temperature, u32)> {
        match *self {
            Grouping::PerRun => Some((record.temperature, record.run_index)),
            Grouping::RunsAt(t) if record.temperature == t => Some((t, record.run_index)),
            Grouping::RunsAt(_) => None,
        }
    }
}

/// Column name for a `(temperature, run)` source, e.g. `t0.5-r3`.
pub fn source_name(temperature: Temperature, run_index: u32) -> String {
    format!("t{temperature}-r{run_index}")
}

/// Arranges parsed votes into an items × sources matrix.
///
/// Items are sorted by id and sources by `(temperature, run_index)`.
/// `(item, source)` pairs with no record become abstains. Two records for the
/// same pair must agree on the vote.
pub fn build_vote_matrix(records: &[RunRecord], grouping: Grouping) -> Result<VoteMatrix, VotesError> {
    let mut cells: BTreeMap<(&str, (Temperature, u32)), Vote> = BTreeMap::new();
    let mut items = BTreeSet::new();
    let mut sources = BTreeSet::new();
    for record in records {
        let Some(source) = grouping.source_key(record) else {
            continue;
        };
        let item = record.example_id.as_str();
        items.insert(item);
        sources.insert(source);
        match cells.insert((item, source), record.parsed_vote) {
            Some(prev) if prev != record.parsed_vote => {
                return Err(VotesError::ConflictingRecords {
                    item: item.to_string(),
                    source_id: source_name(source.0, source.1),
                });
            }
            _ => {}
        }
    }
    if sources.is_empty() {
        return Err(VotesError::NoSources);
    }
    let mut votes = Vec::with_capacity(items.len() * sources.len());
    for &item in &items {
        for &source in &sources {
            votes.push(cells.get(&(item, source)).copied().unwrap_or(Vote::Abstain));
        }
    }
    VoteMatrix::new(
        items.into_iter().map(str::to_string).collect(),
        sources.into_iter().map(|(t, r)| source_name(t, r)).collect(),
        votes,
    )
}

/// `(item_id, source_id, vote)` for every cell, row-major.
pub fn flatten_records(matrix: &VoteMatrix) -> Vec<(String, String, Vote)> {
    let mut out = Vec::with_capacity(matrix.n_items() * matrix.n_sources());
    for (i, item) in matrix.item_ids().iter().enumerate() {
        for (s, source) in matrix.source_ids().iter().enumerate() {
            out.push((item.clone(), source.clone(), matrix.get(i, s)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::RunRecord;
    use proptest::prelude::*;

    fn rec(item: &str, t: f64, run: u32, vote: i8) -> RunRecord {
        RunRecord::for_test(item, Temperature::new(t).unwrap(), run, Vote::try_from(vote).unwrap())
    }

    #[test]
    fn unanimous_two_by_two() {
        let recs = vec![rec("q1", 0.5, 0, 1), rec("q1", 0.5, 1, 1), rec("q2", 0.5, 0, 1), rec("q2", 0.5, 1, 1)];
        let m = build_vote_matrix(&recs, Grouping::PerRun).unwrap();
        assert_eq!((m.n_items(), m.n_sources()), (2, 2));
        assert!(m.rows().flatten().all(|v| *v == Vote::Positive));
        assert_eq!(m.source_ids(), ["t0.5-r0", "t0.5-r1"]);
    }

    #[test]
    fn missing_cell_becomes_abstain() {
        let mut recs = Vec::new();
        for run in 0..4 {
            recs.push(rec("q1", 0.5, run, -1));
            if run != 3 {
                recs.push(rec("q2", 0.5, run, 1));
            }
        }
        let m = build_vote_matrix(&recs, Grouping::PerRun).unwrap();
        assert_eq!(m.get(1, 3), Vote::Abstain);
        assert_eq!(m.get(1, 2), Vote::Positive);
    }

    #[test]
    fn conflicting_duplicate_names_the_pair() {
        let recs = vec![rec("q1", 0.5, 2, 1), rec("q1", 0.5, 2, -1)];
        assert_eq!(
            build_vote_matrix(&recs, Grouping::PerRun),
            Err(VotesError::ConflictingRecords { item: "q1".into(), source_id: "t0.5-r2".into() })
        );
        // identical duplicates are harmless
        let recs = vec![rec("q1", 0.5, 2, 1), rec("q1", 0.5, 2, 1)];
        assert!(build_vote_matrix(&recs, Grouping::PerRun).is_ok());
    }

    #[test]
    fn grouping_filters_by_temperature() {
        let recs = vec![rec("q1", 0.5, 0, 1), rec("q1", 0.6, 0, -1), rec("q1", 0.6, 1, 1)];
        let t = Temperature::new(0.6).unwrap();
        let m = build_vote_matrix(&recs, Grouping::RunsAt(t)).unwrap();
        assert_eq!(m.source_ids(), ["t0.6-r0", "t0.6-r1"]);
        let none = Grouping::RunsAt(Temperature::new(0.9).unwrap());
        assert_eq!(build_vote_matrix(&recs, none), Err(VotesError::NoSources));
    }

    proptest! {
        #[test]
        fn flatten_keeps_every_record(cells in proptest::collection::btree_map(
            (0u8..6, 0u32..5), prop_oneof![Just(1i8), Just(-1i8), Just(0i8)], 1..30)) {
            let recs: Vec<RunRecord> = cells
                .iter()
                .map(|(&(i, r), &v)| rec(&format!("q{i}"), 0.3, r, v))
                .collect();
            let m = build_vote_matrix(&recs, Grouping::PerRun).unwrap();
            let flat = flatten_records(&m);
            for r in &recs {
                let key = (r.example_id.clone(), source_name(r.temperature, r.run_index), r.parsed_vote);
                prop_assert!(flat.contains(&key));
            }
            // every extra cell is a filled-in abstain
            let extra = flat.len() - recs.len();
            prop_assert_eq!(flat.iter().filter(|c| c.2 == Vote::Abstain).count()
                - recs.iter().filter(|r| r.parsed_vote == Vote::Abstain).count(), extra);
        }
    }
}
