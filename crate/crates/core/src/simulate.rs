//! Seeded samplers for synthetic vote matrices with known source parameters.
//!
//! Used by tests, the acceptance suite, the browser demo and the fixture
//! generator. Every sampler is deterministic in its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::votes::{Labels, Vote, VoteMatrix};

/// Conditionally independent sources that are right with probability
/// `accuracy` regardless of the true class.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSources {
    pub accuracies: Vec<f64>,
    pub class_balance: f64,
    pub abstain_rate: f64,
}

impl SymmetricSources {
    pub fn from_accuracies(accuracies: &[f64], class_balance: f64) -> Self {
        Self { accuracies: accuracies.to_vec(), class_balance, abstain_rate: 0.0 }
    }

    /// From correlations `a = 2q - 1`.
    pub fn from_correlations(correlations: &[f64], class_balance: f64) -> Self {
        Self::from_accuracies(&correlations.iter().map(|a| (1.0 + a) / 2.0).collect::<Vec<_>>(), class_balance)
    }

    pub fn with_abstain_rate(mut self, rate: f64) -> Self {
        self.abstain_rate = rate;
        self
    }
}

/// Sources with separate sensitivity `P(+1 | +1)` and specificity `P(-1 | -1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionSources {
    pub sensitivities: Vec<f64>,
    pub specificities: Vec<f64>,
    pub prior: f64,
}

fn ids(prefix: char, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn sample<F>(n_items: usize, n_sources: usize, prior: f64, seed: u64, mut vote: F) -> (VoteMatrix, Labels)
where
    F: FnMut(&mut ChaCha8Rng, usize, bool) -> Vote,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let item_ids = ids('i', n_items);
    let mut votes = Vec::with_capacity(n_items * n_sources);
    let mut gold = Labels::new();
    for id in &item_ids {
        let positive = rng.random_bool(prior);
        gold.insert(id.clone(), Vote::from_bool(positive));
        for s in 0..n_sources {
            votes.push(vote(&mut rng, s, positive));
        }
    }
    let matrix = VoteMatrix::new(item_ids, ids('s', n_sources), votes).expect("sampler shape");
    (matrix, gold)
}

/// Draws `n_items` true labels and one vote per source per item.
pub fn sample_symmetric(n_items: usize, sources: &SymmetricSources, seed: u64) -> (VoteMatrix, Labels) {
    sample(n_items, sources.accuracies.len(), sources.class_balance, seed, |rng, s, positive| {
        if sources.abstain_rate > 0.0 && rng.random_bool(sources.abstain_rate) {
            return Vote::Abstain;
        }
        let correct = rng.random_bool(sources.accuracies[s]);
        Vote::from_bool(positive == correct)
    })
}

pub fn sample_confusion(n_items: usize, sources: &ConfusionSources, seed: u64) -> (VoteMatrix, Labels) {
    assert_eq!(sources.sensitivities.len(), sources.specificities.len());
    sample(n_items, sources.sensitivities.len(), sources.prior, seed, |rng, s, positive| {
        if positive {
            Vote::from_bool(rng.random_bool(sources.sensitivities[s]))
        } else {
            Vote::from_bool(!rng.random_bool(sources.specificities[s]))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let sources = SymmetricSources::from_accuracies(&[0.7, 0.8], 0.5).with_abstain_rate(0.2);
        assert_eq!(sample_symmetric(50, &sources, 3), sample_symmetric(50, &sources, 3));
        assert_ne!(sample_symmetric(50, &sources, 3).0, sample_symmetric(50, &sources, 4).0);
    }

    #[test]
    fn empirical_accuracy_near_target() {
        let sources = SymmetricSources::from_accuracies(&[0.7], 0.3);
        let (m, gold) = sample_symmetric(20_000, &sources, 1);
        let acc = crate::votes::accuracy(&m.source_labels(0), &gold).unwrap();
        assert!((acc.accuracy_percent - 70.0).abs() < 1.5);
        let pos = gold.values().filter(|v| **v == Vote::Positive).count() as f64 / 20_000.0;
        assert!((pos - 0.3).abs() < 0.015);
    }
}
