use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{PromptType, PromptingError, RunRecord, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PutOutcome {
    Inserted,
    /// The same key was already stored with identical content.
    Unchanged,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreFilter {
    pub prompt_type: Option<PromptType>,
    pub temperature: Option<Temperature>,
    pub model_name: Option<String>,
}

impl StoreFilter {
    fn matches(&self, r: &RunRecord) -> bool {
        self.prompt_type.map_or(true, |p| r.prompt_type == p)
            && self.temperature.map_or(true, |t| r.temperature == t)
            && self.model_name.as_ref().map_or(true, |m| &r.model_name == m)
    }
}

#[derive(Default)]
struct Inner {
    records: Vec<RunRecord>,
    index: HashMap<String, usize>,
    file: Option<File>,
}

impl Inner {
    fn insert(&mut self, record: RunRecord) -> Result<PutOutcome, PromptingError> {
        if let Some(&i) = self.index.get(&record.run_key) {
            return if self.records[i].same_content(&record) {
                Ok(PutOutcome::Unchanged)
            } else {
                Err(PromptingError::KeyCollision(record.run_key))
            };
        }
        self.index.insert(record.run_key.clone(), self.records.len());
        self.records.push(record);
        Ok(PutOutcome::Inserted)
    }
}

/// Append-only JSON-lines store of [`RunRecord`]s keyed by run key.
///
/// Writes are serialized through an internal lock and flushed per record, so
/// an interrupted sweep keeps every completed response.
pub struct RunStore {
    path: Option<PathBuf>,
    inner: Mutex<Inner>,
}

impl RunStore {
    pub fn in_memory() -> Self {
        Self { path: None, inner: Mutex::new(Inner::default()) }
    }

    /// Loads `path` if it exists and appends new records to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PromptingError> {
        let path = path.as_ref().to_path_buf();
        let mut inner = Inner::default();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| PromptingError::CorruptStore {
                    path: path.display().to_string(),
                    line: n + 1,
                    message,
                };
                let record: RunRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                inner.insert(record).map_err(|e| corrupt(e.to_string()))?;
            }
        }
        inner.file = Some(OpenOptions::new().create(true).append(true).open(&path)?);
        Ok(Self { path: Some(path), inner: Mutex::new(inner) })
    }

    /// Opens an existing store without creating the file. Missing files are
    /// an error.
    pub fn open_existing(path: impl AsRef<Path>) -> Result<Self, PromptingError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(PromptingError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("store {} does not exist", path.display()),
            )));
        }
        Self::open(path)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn put(&self, record: RunRecord) -> Result<PutOutcome, PromptingError> {
        let mut inner = self.inner.lock().expect("store lock poisoned");
        let line = serde_json::to_string(&record).expect("run record serializes");
        let outcome = inner.insert(record)?;
        if outcome == PutOutcome::Inserted {
            if let Some(file) = inner.file.as_mut() {
                file.write_all(line.as_bytes())?;
                file.write_all(b"\n")?;
                file.flush()?;
            }
        }
        Ok(outcome)
    }

    pub fn get(&self, run_key: &str) -> Option<RunRecord> {
        let inner = self.inner.lock().expect("store lock poisoned");
        inner.index.get(run_key).map(|&i| inner.records[i].clone())
    }

    pub fn contains(&self, run_key: &str) -> bool {
        self.inner.lock().expect("store lock poisoned").index.contains_key(run_key)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("store lock poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Matching records sorted by model, prompt type, temperature, run index,
    /// then example id.
    pub fn list(&self, filter: &StoreFilter) -> Vec<RunRecord> {
        let inner = self.inner.lock().expect("store lock poisoned");
        let mut out: Vec<RunRecord> = inner.records.iter().filter(|r| filter.matches(r)).cloned().collect();
        out.sort_by(|a, b| {
            (&a.model_name, a.prompt_type, a.temperature, a.run_index, &a.example_id).cmp(&(
                &b.model_name,
                b.prompt_type,
                b.temperature,
                b.run_index,
                &b.example_id,
            ))
        });
        out
    }

    /// Hex SHA-256 of the records in canonical order, independent of the
    /// order they were appended in.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        let mut records = self.list(&StoreFilter::default());
        records.sort_by(|a, b| a.run_key.cmp(&b.run_key));
        for r in records {
            h.update(serde_json::to_vec(&r).expect("run record serializes"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}
