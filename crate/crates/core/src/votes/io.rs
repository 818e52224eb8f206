//! Dataset (JSON lines) and vote export (CSV) formats.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EntailmentExample, Labels, Vote, VoteMatrix, VotesError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Votes(#[from] VotesError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RawExample {
    id: String,
    query: String,
    articles: Vec<String>,
    #[serde(default)]
    label: Option<String>,
}

impl TryFrom<RawExample> for EntailmentExample {
    type Error = String;

    fn try_from(raw: RawExample) -> Result<Self, Self::Error> {
        if raw.id.is_empty() {
            return Err("example id is empty".into());
        }
        if raw.articles.is_empty() {
            return Err(format!("example {:?} has no related articles", raw.id));
        }
        let gold = match raw.label.as_deref() {
            None => None,
            Some("Y") => Some(Vote::Positive),
            Some("N") => Some(Vote::Negative),
            Some(other) => return Err(format!("label {other:?} is not \"Y\", \"N\" or null")),
        };
        Ok(EntailmentExample { id: raw.id, query: raw.query, articles: raw.articles, gold })
    }
}

impl From<EntailmentExample> for RawExample {
    fn from(ex: EntailmentExample) -> Self {
        let label = match ex.gold {
            Some(Vote::Positive) => Some("Y".to_string()),
            Some(Vote::Negative) => Some("N".to_string()),
            _ => None,
        };
        RawExample { id: ex.id, query: ex.query, articles: ex.articles, label }
    }
}

/// Reads one example per non-blank line. Ids must be unique.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Vec<EntailmentExample>, DataError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: EntailmentExample =
            serde_json::from_str(&line).map_err(|source| DataError::Json { line: n + 1, source })?;
        if !ids.insert(ex.id.clone()) {
            return Err(DataError::Invalid { line: n + 1, message: format!("duplicate id {:?}", ex.id) });
        }
        out.push(ex);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(mut writer: W, examples: &[EntailmentExample]) -> Result<(), DataError> {
    for ex in examples {
        serde_json::to_writer(&mut writer, ex).map_err(|source| DataError::Json { line: 0, source })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Gold labels of every labelled example.
pub fn gold_labels(examples: &[EntailmentExample]) -> Labels {
    examples
        .iter()
        .filter_map(|ex| ex.gold.map(|g| (ex.id.clone(), g)))
        .collect()
}

/// Writes `item_id,source_id,vote` rows, row-major.
pub fn write_votes_csv<W: Write>(writer: W, matrix: &VoteMatrix) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["item_id", "source_id", "vote"])?;
    for (i, item) in matrix.item_ids().iter().enumerate() {
        for (s, source) in matrix.source_ids().iter().enumerate() {
            w.write_record([item.as_str(), source.as_str(), &matrix.get(i, s).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct VoteRow {
    item_id: String,
    source_id: String,
    vote: i64,
}

/// Reads a vote export back into a matrix. Items and sources keep their
/// first-seen order; missing cells are abstains.
pub fn read_votes_csv<R: std::io::Read>(reader: R) -> Result<VoteMatrix, DataError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut items: Vec<String> = Vec::new();
    let mut sources: Vec<String> = Vec::new();
    let (mut item_idx, mut source_idx) = (BTreeMap::new(), BTreeMap::new());
    let mut cells = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, row) in r.deserialize::<VoteRow>().enumerate() {
        let row = row?;
        let vote = Vote::try_from(row.vote)?;
        let i = *item_idx.entry(row.item_id.clone()).or_insert_with(|| {
            items.push(row.item_id.clone());
            items.len() - 1
        });
        let s = *source_idx.entry(row.source_id.clone()).or_insert_with(|| {
            sources.push(row.source_id.clone());
            sources.len() - 1
        });
        if !seen.insert((i, s)) {
            return Err(DataError::Invalid {
                line: n + 2,
                message: format!("duplicate cell ({}, {})", row.item_id, row.source_id),
            });
        }
        cells.push((i, s, vote));
    }
    let mut votes = vec![Vote::Abstain; items.len() * sources.len()];
    for (i, s, v) in cells {
        votes[i * sources.len() + s] = v;
    }
    Ok(VoteMatrix::new(items, sources, votes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_line_format() {
        let line = r#"{"id":"q1","query":"Q","articles":["A1","A2"],"label":"Y"}
{"id":"q2","query":"Q2","articles":["B"],"label":null}
"#;
        let ds = read_dataset(line.as_bytes()).unwrap();
        assert_eq!(ds[0].gold, Some(Vote::Positive));
        assert_eq!(ds[1].gold, None);
        let mut out = Vec::new();
        write_dataset(&mut out, &ds).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), line);
        assert_eq!(gold_labels(&ds).len(), 1);
    }

    #[test]
    fn dataset_rejects_bad_rows() {
        let dup = "{\"id\":\"a\",\"query\":\"\",\"articles\":[\"x\"]}\n{\"id\":\"a\",\"query\":\"\",\"articles\":[\"x\"]}\n";
        assert!(matches!(read_dataset(dup.as_bytes()), Err(DataError::Invalid { line: 2, .. })));
        let no_articles = "{\"id\":\"a\",\"query\":\"\",\"articles\":[]}\n";
        assert!(matches!(read_dataset(no_articles.as_bytes()), Err(DataError::Json { line: 1, .. })));
        let bad_label = "{\"id\":\"a\",\"query\":\"\",\"articles\":[\"x\"],\"label\":\"maybe\"}\n";
        assert!(read_dataset(bad_label.as_bytes()).is_err());
    }

    #[test]
    fn votes_csv_round_trip() {
        let m = VoteMatrix::from_rows(&[vec![1, 0, -1], vec![-1, -1, 1]]).unwrap();
        let mut buf = Vec::new();
        write_votes_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("item_id,source_id,vote\ni0,s0,1\ni0,s1,0\n"));
        assert_eq!(read_votes_csv(buf.as_slice()).unwrap(), m);
    }
}
