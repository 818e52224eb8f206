//! Prompt rendering, answer parsing, and a record/replay completion store.

mod client;
mod parse;
mod store;
pub mod stub;
mod template;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::votes::Vote;

pub use client::{ChatTransport, Completer, TransportFailure};
#[cfg(feature = "http")]
pub use client::HttpTransport;
pub use parse::parse_answer;
pub use store::{PutOutcome, RunStore, StoreFilter};
pub use template::{render_prompt, ANSWER_ONLY_INSTRUCTION, ANSWER_THEN_EXPLAIN_INSTRUCTION, PREAMBLE, REASON_THEN_ANSWER_INSTRUCTION};

/// Environment variable holding the endpoint credential.
pub const API_KEY_ENV: &str = "LEXVOTE_API_KEY";

#[derive(Debug, Error)]
pub enum PromptingError {
    #[error("no stored response for run key {0}")]
    CacheMiss(String),
    #[error("request {key} failed after {attempts} attempt(s): {message}")]
    Transport { key: String, attempts: u32, message: String },
    #[error("run key {0} already stored with different content")]
    KeyCollision(String),
    #[error("store {path}: line {line}: {message}")]
    CorruptStore { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid temperature {0} (must lie in [0, 2])")]
    InvalidTemperature(f64),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("unknown prompt type {0:?}")]
    UnknownPromptType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptType {
    AnswerOnly,
    AnswerThenExplain,
    ReasonThenAnswer,
}

impl PromptType {
    pub const ALL: [PromptType; 3] =
        [PromptType::AnswerOnly, PromptType::AnswerThenExplain, PromptType::ReasonThenAnswer];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptType::AnswerOnly => "answer_only",
            PromptType::AnswerThenExplain => "answer_then_explain",
            PromptType::ReasonThenAnswer => "reason_then_answer",
        }
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptType {
    type Err = PromptingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        PromptType::ALL
            .into_iter()
            .find(|p| p.as_str() == norm)
            .ok_or_else(|| PromptingError::UnknownPromptType(s.to_string()))
    }
}

/// Sampling temperature in `[0, 2]`, held in thousandths so it can key maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Temperature(u16);

impl Temperature {
    pub fn new(value: f64) -> Result<Self, PromptingError> {
        if !value.is_finite() || !(0.0..=2.0).contains(&value) {
            return Err(PromptingError::InvalidTemperature(value));
        }
        Ok(Temperature((value * 1000.0).round() as u16))
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 1000.0
    }

    pub fn millis(self) -> u16 {
        self.0
    }

    /// `0.1, 0.2, ..., 1.0`.
    pub fn decile_grid() -> Vec<Temperature> {
        (1..=10).map(|d| Temperature(d * 100)).collect()
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (whole, frac) = (self.0 / 1000, self.0 % 1000);
        if frac == 0 {
            write!(f, "{whole}.0")
        } else {
            let digits = format!("{frac:03}");
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Temperature {
    type Err = PromptingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: f64 = s.trim().parse().map_err(|_| PromptingError::InvalidTemperature(f64::NAN))?;
        Temperature::new(v)
    }
}

impl Serialize for Temperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Temperature::new(v).map_err(serde::de::Error::custom)
    }
}

/// One raw model response with its identity and parsed vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_key: String,
    pub example_id: String,
    pub prompt_type: PromptType,
    pub temperature: Temperature,
    pub run_index: u32,
    pub model_name: String,
    pub raw_response: String,
    pub parsed_vote: Vote,
    pub created_at: DateTime<Utc>,
}

impl RunRecord {
    /// Equal in everything but the timestamp.
    pub fn same_content(&self, other: &RunRecord) -> bool {
        self.run_key == other.run_key
            && self.example_id == other.example_id
            && self.prompt_type == other.prompt_type
            && self.temperature == other.temperature
            && self.run_index == other.run_index
            && self.model_name == other.model_name
            && self.raw_response == other.raw_response
            && self.parsed_vote == other.parsed_vote
    }

    #[cfg(test)]
    pub(crate) fn for_test(example_id: &str, temperature: Temperature, run_index: u32, vote: Vote) -> Self {
        RunRecord {
            run_key: format!("{example_id}/{temperature}/{run_index}"),
            example_id: example_id.to_string(),
            prompt_type: PromptType::ReasonThenAnswer,
            temperature,
            run_index,
            model_name: "test-model".into(),
            raw_response: format!("Answer: {}", if vote == Vote::Positive { "Yes" } else { "No" }),
            parsed_vote: vote,
            created_at: DateTime::<Utc>::UNIX_EPOCH,
        }
    }
}

/// Everything that identifies one completion.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub example_id: String,
    pub prompt_type: PromptType,
    pub temperature: Temperature,
    pub run_index: u32,
    pub model_name: String,
    pub prompt: String,
}

impl RunRequest {
    /// Hex SHA-256 over model, prompt type, temperature, run index, example id
    /// and the rendered prompt.
    pub fn run_key(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.model_name.as_str(),
            self.prompt_type.as_str(),
            &self.temperature.millis().to_string(),
            &self.run_index.to_string(),
            self.example_id.as_str(),
            self.prompt.as_str(),
        ] {
            h.update(part.as_bytes());
            h.update([0x1f]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, initial_backoff: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    /// No waiting between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        Self { max_attempts, initial_backoff: Duration::ZERO }
    }

    /// Delay after failed attempt number `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.initial_backoff.saturating_mul(1u32 << attempt.saturating_sub(1).min(16))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub temperatures: Vec<Temperature>,
    pub runs_per_temperature: u32,
    pub prompt_type: PromptType,
    pub model_name: String,
    pub max_parallel_requests: usize,
    pub retry: RetryPolicy,
}

impl RunConfig {
    pub fn new(temperatures: Vec<Temperature>, runs_per_temperature: u32, model_name: impl Into<String>) -> Self {
        Self {
            temperatures,
            runs_per_temperature,
            prompt_type: PromptType::ReasonThenAnswer,
            model_name: model_name.into(),
            max_parallel_requests: 4,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), PromptingError> {
        if self.temperatures.is_empty() {
            return Err(PromptingError::InvalidConfig("no temperatures".into()));
        }
        if self.runs_per_temperature == 0 {
            return Err(PromptingError::InvalidConfig("runs_per_temperature must be at least 1".into()));
        }
        if self.max_parallel_requests == 0 {
            return Err(PromptingError::InvalidConfig("max_parallel_requests must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(PromptingError::InvalidConfig("retry max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperature_display_and_parse() {
        let grid: Vec<String> = Temperature::decile_grid().iter().map(ToString::to_string).collect();
        assert_eq!(grid, ["0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9", "1.0"]);
        assert_eq!("0.25".parse::<Temperature>().unwrap().to_string(), "0.25");
        assert_eq!("0".parse::<Temperature>().unwrap().to_string(), "0.0");
        assert!(Temperature::new(2.5).is_err());
        assert!(Temperature::new(-0.1).is_err());
        assert_eq!(serde_json::to_string(&Temperature::new(0.5).unwrap()).unwrap(), "0.5");
    }

    #[test]
    fn prompt_type_names() {
        for p in PromptType::ALL {
            assert_eq!(p.as_str().parse::<PromptType>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
        assert_eq!("Reason-Then-Answer".parse::<PromptType>().unwrap(), PromptType::ReasonThenAnswer);
        assert!("cot".parse::<PromptType>().is_err());
    }

    #[test]
    fn run_key_depends_on_every_field() {
        let base = RunRequest {
            example_id: "q1".into(),
            prompt_type: PromptType::ReasonThenAnswer,
            temperature: Temperature::new(0.5).unwrap(),
            run_index: 0,
            model_name: "m".into(),
            prompt: "p".into(),
        };
        let key = base.run_key();
        assert_eq!(key.len(), 64);
        assert_eq!(key, base.clone().run_key());
        let variants = [
            RunRequest { example_id: "q2".into(), ..base.clone() },
            RunRequest { prompt_type: PromptType::AnswerOnly, ..base.clone() },
            RunRequest { temperature: Temperature::new(0.6).unwrap(), ..base.clone() },
            RunRequest { run_index: 1, ..base.clone() },
            RunRequest { model_name: "n".into(), ..base.clone() },
            RunRequest { prompt: "p ".into(), ..base.clone() },
        ];
        for v in variants {
            assert_ne!(v.run_key(), key);
        }
    }

    #[test]
    fn backoff_doubles() {
        let r = RetryPolicy::default();
        assert_eq!(r.backoff(1), Duration::from_secs(1));
        assert_eq!(r.backoff(2), Duration::from_secs(2));
        assert_eq!(r.backoff(4), Duration::from_secs(8));
    }
}
