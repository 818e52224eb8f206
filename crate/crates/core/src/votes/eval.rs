use std::fmt;

use num_rational::Ratio;
use num_traits::Zero;
use serde::Serialize;

use super::{Labels, VotesError};

/// Exact rational used for every accuracy computation. Rounding happens only
/// when a value is displayed.
pub type Fraction = Ratio<i64>;

/// `frac` as a percentage in hundredths, rounded half away from zero.
///
/// `77/109` is 70.6422...% and maps to `7064`.
pub fn percent_hundredths(frac: Fraction) -> i64 {
    (frac * Fraction::from_integer(10_000)).round().to_integer()
}

/// A proportion displayed as a percentage with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub Fraction);

impl Percent {
    pub fn hundredths(self) -> i64 {
        percent_hundredths(self.0)
    }

    pub fn rounded(self) -> f64 {
        self.hundredths() as f64 / 100.0
    }

    pub fn fraction(self) -> Fraction {
        self.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        let sign = if h < 0 { "-" } else { "" };
        let h = h.abs();
        write!(f, "{sign}{}.{:02}", h / 100, h % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvaluationResult {
    pub correct: usize,
    pub total: usize,
    /// `correct / total × 100`, rounded half away from zero to 2 decimals.
    pub accuracy_percent: f64,
}

impl EvaluationResult {
    pub fn new(correct: usize, total: usize) -> Self {
        assert!(correct <= total, "correct {correct} exceeds total {total}");
        let mut out = Self { correct, total, accuracy_percent: 0.0 };
        out.accuracy_percent = out.percent().rounded();
        out
    }

    /// Exact accuracy; `0` for an empty evaluation.
    pub fn fraction(&self) -> Fraction {
        if self.total == 0 {
            Fraction::zero()
        } else {
            Fraction::new(self.correct as i64, self.total as i64)
        }
    }

    pub fn percent(&self) -> Percent {
        Percent(self.fraction())
    }
}

impl fmt::Display for EvaluationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} ({}%)", self.correct, self.total, self.percent())
    }
}

/// Scores hard predictions against gold labels.
///
/// Both maps must cover the same item ids. An abstaining prediction is
/// counted as wrong.
pub fn accuracy(predictions: &Labels, gold: &Labels) -> Result<EvaluationResult, VotesError> {
    let mut diff: Vec<String> = predictions
        .keys()
        .filter(|k| !gold.contains_key(*k))
        .chain(gold.keys().filter(|k| !predictions.contains_key(*k)))
        .cloned()
        .collect();
    if !diff.is_empty() {
        diff.sort();
        return Err(VotesError::KeyMismatch(diff));
    }
    if let Some((id, _)) = gold.iter().find(|(_, v)| v.is_abstain()) {
        return Err(VotesError::AbstainInGold(id.clone()));
    }
    let correct = predictions
        .iter()
        .filter(|(id, pred)| !pred.is_abstain() && gold[*id] == **pred)
        .count();
    Ok(EvaluationResult::new(correct, gold.len()))
}
