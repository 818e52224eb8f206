use std::collections::BTreeMap;

use num_traits::Zero;
use serde::Serialize;

use super::ExperimentError;
use crate::prompting::Temperature;
use crate::votes::{Fraction, Percent};

/// Summary of a list of accuracies, kept as exact fractions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub max: Fraction,
    pub min: Fraction,
    pub max_minus_min: Fraction,
    pub avg: Fraction,
    pub median: Fraction,
    pub count: usize,
}

impl StatsRow {
    /// `[max, min, max-min, avg, median]` as 2-decimal percentages.
    pub fn percents(&self) -> [Percent; 5] {
        [self.max, self.min, self.max_minus_min, self.avg, self.median].map(Percent)
    }
}

pub type RunStats = BTreeMap<Temperature, StatsRow>;

/// Max, min, their difference, mean and median of `values`. The median of an
/// even count is the mean of the two middle values.
pub fn stats_row(values: &[Fraction]) -> Result<StatsRow, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::NoAccuracies);
    }
    let mut sorted = values.to_vec();
    sorted.sort();
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let sum = sorted.iter().fold(Fraction::zero(), |acc, v| acc + v);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2
    };
    Ok(StatsRow { max, min, max_minus_min: max - min, avg: sum / n as i64, median, count: n })
}

pub fn run_stats(per_temperature: &BTreeMap<Temperature, Vec<Fraction>>) -> Result<RunStats, ExperimentError> {
    per_temperature.iter().map(|(t, v)| Ok((*t, stats_row(v)?))).collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn f(n: i64, d: i64) -> Fraction {
        Fraction::new(n, d)
    }

    #[test]
    fn difference_before_rounding() {
        let row = stats_row(&[f(80, 109), f(75, 109), f(77, 109)]).unwrap();
        let [max, min, diff, _, _] = row.percents().map(|p| p.to_string());
        assert_eq!((max.as_str(), min.as_str(), diff.as_str()), ("73.39", "68.81", "4.59"));
    }

    #[test]
    fn single_and_even() {
        let one = stats_row(&[f(7, 10)]).unwrap();
        assert_eq!((one.max, one.min, one.avg, one.median), (f(7, 10), f(7, 10), f(7, 10), f(7, 10)));
        assert_eq!(Percent(one.max_minus_min).to_string(), "0.00");
        let two = stats_row(&[f(70, 100), f(80, 100)]).unwrap();
        assert_eq!(Percent(two.median).to_string(), "75.00");
        assert!(matches!(stats_row(&[]), Err(ExperimentError::NoAccuracies)));
    }

    proptest! {
        #[test]
        fn ordering_invariants(ks in prop::collection::vec(0i64..=109, 1..20)) {
            let vals: Vec<Fraction> = ks.iter().map(|&k| f(k, 109)).collect();
            let r = stats_row(&vals).unwrap();
            prop_assert!(r.min <= r.avg && r.avg <= r.max);
            prop_assert!(r.min <= r.median && r.median <= r.max);
            prop_assert_eq!(r.max_minus_min, r.max - r.min);
            prop_assert_eq!(r.count, vals.len());
        }
    }
}
