//! Vote-matrix data model shared by every estimator.
//!
//! A [`VoteMatrix`] is a dense items × sources grid. In the entailment
//! setting a source is one repeated run of the model (one temperature and
//! run index), an item is one query, and each cell holds `+1` ("Yes"),
//! `-1` ("No"), or `0` when the response had no parseable answer.

mod build;
mod diagnostics;
mod eval;
pub mod io;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use build::{build_vote_matrix, flatten_records, Grouping};
pub use diagnostics::{validate_matrix, MatrixDiagnostics, SourceDiagnostics, LOW_COVERAGE};
pub use eval::{accuracy, percent_hundredths, EvaluationResult, Fraction, Percent};

/// Hard labels keyed by item id.
pub type Labels = BTreeMap<String, Vote>;

#[derive(Debug, Error, PartialEq)]
pub enum VotesError {
    #[error("vote value {0} is not one of 1, -1, 0")]
    InvalidVote(i64),
    #[error("vote matrix needs at least one item and one source (got {items} x {sources})")]
    EmptyMatrix { items: usize, sources: usize },
    #[error("vote grid has {got} cells, expected {items} x {sources}")]
    ShapeMismatch { items: usize, sources: usize, got: usize },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("conflicting records for item {item:?} under source {source_id:?}")]
    ConflictingRecords { item: String, source_id: String },
    #[error("grouping produced no sources")]
    NoSources,
    #[error("item ids differ between predictions and gold: {0:?}")]
    KeyMismatch(Vec<String>),
    #[error("gold label for item {0:?} is an abstain")]
    AbstainInGold(String),
    #[error("source index {0} out of range")]
    SourceOutOfRange(usize),
}

/// One answer from one source. Abstain means no parseable Yes/No.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Vote {
    Negative,
    Abstain,
    Positive,
}

impl Vote {
    pub fn value(self) -> i8 {
        match self {
            Vote::Positive => 1,
            Vote::Negative => -1,
            Vote::Abstain => 0,
        }
    }

    /// `+1.0`, `-1.0` or `0.0`.
    #[inline]
    pub fn sign(self) -> f64 {
        f64::from(self.value())
    }

    pub fn is_abstain(self) -> bool {
        self == Vote::Abstain
    }

    pub fn negate(self) -> Vote {
        match self {
            Vote::Positive => Vote::Negative,
            Vote::Negative => Vote::Positive,
            Vote::Abstain => Vote::Abstain,
        }
    }

    pub fn from_bool(positive: bool) -> Vote {
        if positive {
            Vote::Positive
        } else {
            Vote::Negative
        }
    }
}

impl TryFrom<i8> for Vote {
    type Error = VotesError;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        Vote::try_from(i64::from(v))
    }
}

impl TryFrom<i64> for Vote {
    type Error = VotesError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Vote::Positive),
            -1 => Ok(Vote::Negative),
            0 => Ok(Vote::Abstain),
            other => Err(VotesError::InvalidVote(other)),
        }
    }
}

impl From<Vote> for i8 {
    fn from(v: Vote) -> i8 {
        v.value()
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// One entailment query with its related statute articles.
///
/// Serialized as `{"id", "query", "articles", "label"}` where `label` is
/// `"Y"`, `"N"` or `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::RawExample", into = "io::RawExample")]
pub struct EntailmentExample {
    pub id: String,
    pub query: String,
    pub articles: Vec<String>,
    pub gold: Option<Vote>,
}

/// Dense items × sources grid of votes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    item_ids: Vec<String>,
    source_ids: Vec<String>,
    votes: Vec<Vote>,
}

fn check_unique(kind: &'static str, ids: &[String]) -> Result<(), VotesError> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(VotesError::DuplicateId { kind, id: id.clone() });
        }
    }
    Ok(())
}

impl VoteMatrix {
    pub fn new(
        item_ids: Vec<String>,
        source_ids: Vec<String>,
        votes: Vec<Vote>,
    ) -> Result<Self, VotesError> {
        let (items, sources) = (item_ids.len(), source_ids.len());
        if items == 0 || sources == 0 {
            return Err(VotesError::EmptyMatrix { items, sources });
        }
        if votes.len() != items * sources {
            return Err(VotesError::ShapeMismatch { items, sources, got: votes.len() });
        }
        check_unique("item", &item_ids)?;
        check_unique("source", &source_ids)?;
        Ok(Self { item_ids, source_ids, votes })
    }

    /// Builds a matrix from integer rows, naming items `i0..` and sources `s0..`.
    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self, VotesError> {
        let sources = rows.first().map_or(0, Vec::len);
        let item_ids = (0..rows.len()).map(|i| format!("i{i}")).collect();
        let source_ids = (0..sources).map(|s| format!("s{s}")).collect();
        let mut votes = Vec::with_capacity(rows.len() * sources);
        for row in rows {
            if row.len() != sources {
                return Err(VotesError::ShapeMismatch {
                    items: rows.len(),
                    sources,
                    got: rows.iter().map(Vec::len).sum(),
                });
            }
            for &v in row {
                votes.push(Vote::try_from(v)?);
            }
        }
        Self::new(item_ids, source_ids, votes)
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn n_sources(&self) -> usize {
        self.source_ids.len()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    #[inline]
    pub fn get(&self, item: usize, source: usize) -> Vote {
        self.votes[item * self.source_ids.len() + source]
    }

    #[inline]
    pub fn row(&self, item: usize) -> &[Vote] {
        let m = self.source_ids.len();
        &self.votes[item * m..(item + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Vote]> {
        self.votes.chunks(self.source_ids.len())
    }

    pub fn column(&self, source: usize) -> impl Iterator<Item = Vote> + '_ {
        self.rows().map(move |r| r[source])
    }

    pub fn non_abstain_count(&self) -> usize {
        self.votes.iter().filter(|v| !v.is_abstain()).count()
    }

    /// Keeps only the given source columns, in the given order.
    pub fn select_sources(&self, sources: &[usize]) -> Result<VoteMatrix, VotesError> {
        if let Some(&bad) = sources.iter().find(|&&s| s >= self.n_sources()) {
            return Err(VotesError::SourceOutOfRange(bad));
        }
        let source_ids = sources.iter().map(|&s| self.source_ids[s].clone()).collect();
        let votes = self
            .rows()
            .flat_map(|row| sources.iter().map(move |&s| row[s]))
            .collect();
        VoteMatrix::new(self.item_ids.clone(), source_ids, votes)
    }

    /// Reorders items by `order[new] = old`.
    pub fn permute_items(&self, order: &[usize]) -> VoteMatrix {
        let item_ids = order.iter().map(|&i| self.item_ids[i].clone()).collect();
        let votes = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        VoteMatrix { item_ids, source_ids: self.source_ids.clone(), votes }
    }

    /// Every vote flipped; abstains stay abstains.
    pub fn negated(&self) -> VoteMatrix {
        VoteMatrix {
            item_ids: self.item_ids.clone(),
            source_ids: self.source_ids.clone(),
            votes: self.votes.iter().map(|v| v.negate()).collect(),
        }
    }

    /// Pairs per-item labels with this matrix's item ids.
    pub fn label_map(&self, labels: &[Vote]) -> Labels {
        self.item_ids.iter().cloned().zip(labels.iter().copied()).collect()
    }

    /// One source column as labels keyed by item id.
    pub fn source_labels(&self, source: usize) -> Labels {
        self.item_ids.iter().cloned().zip(self.column(source)).collect()
    }
}
