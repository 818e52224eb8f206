//! Triplet method of moments.
//!
//! Under conditional independence, `E[v_j v_k] = a_j a_k` where
//! `a_i = E[v_i y]`. For any triplet `(i, j, k)` the unknown label cancels:
//! `|a_i| = sqrt(|M_ij M_ik / M_jk|)`. Each source takes the median over
//! all its triplets.

use serde::Serialize;

use super::{harden, logistic, logit, majority_vote, LabelModelError, PosteriorLabels};
use crate::votes::{Vote, VoteMatrix};

pub const DEFAULT_MIN_MOMENT: f64 = 1e-3;

const CORRELATION_BOUND: f64 = 0.98;
const BALANCE_MIN: f64 = 0.01;
const BALANCE_MAX: f64 = 0.99;

/// Per-source correlation with the latent label plus the class balance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceParams {
    correlations: Vec<f64>,
    class_balance: f64,
}

impl SourceParams {
    /// Clips correlations to `[-0.98, 0.98]` and the balance to `[0.01, 0.99]`.
    pub fn new(correlations: Vec<f64>, class_balance: f64) -> Self {
        Self {
            correlations: correlations
                .into_iter()
                .map(|a| a.clamp(-CORRELATION_BOUND, CORRELATION_BOUND))
                .collect(),
            class_balance: class_balance.clamp(BALANCE_MIN, BALANCE_MAX),
        }
    }

    /// `a_i = E[vote_i · y]`, abstains excluded.
    pub fn correlations(&self) -> &[f64] {
        &self.correlations
    }

    /// Symmetric accuracies `q_i = (1 + a_i) / 2`.
    pub fn accuracies(&self) -> Vec<f64> {
        self.correlations.iter().map(|a| (1.0 + a) / 2.0).collect()
    }

    pub fn class_balance(&self) -> f64 {
        self.class_balance
    }

    pub fn len(&self) -> usize {
        self.correlations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.correlations.is_empty()
    }

    fn negated(&self) -> Self {
        Self {
            correlations: self.correlations.iter().map(|a| -a).collect(),
            class_balance: self.class_balance,
        }
    }
}

/// Symmetric matrix of pairwise second moments `M_jk`.
///
/// A pair with no co-answered item has no moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    names: Vec<String>,
    values: Vec<Option<f64>>,
}

impl MomentMatrix {
    /// Builds exact moments from a function of the unordered pair `(j, k)`, `j < k`.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![None; n * n];
        for j in 0..n {
            for k in j + 1..n {
                let m = f(j, k);
                values[j * n + k] = Some(m);
                values[k * n + j] = Some(m);
            }
        }
        Self { names: (0..n).map(|i| format!("s{i}")).collect(), values }
    }

    pub fn n_sources(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, j: usize, k: usize) -> Option<f64> {
        self.values[j * self.names.len() + k]
    }
}

/// Mean of `vote_j · vote_k` over items where both sources answered.
pub fn pairwise_moments(matrix: &VoteMatrix) -> MomentMatrix {
    let n = matrix.n_sources();
    let mut sums = vec![0.0f64; n * n];
    let mut counts = vec![0usize; n * n];
    for row in matrix.rows() {
        for j in 0..n {
            if row[j].is_abstain() {
                continue;
            }
            for k in j + 1..n {
                if row[k].is_abstain() {
                    continue;
                }
                sums[j * n + k] += row[j].sign() * row[k].sign();
                counts[j * n + k] += 1;
            }
        }
    }
    let mut values = vec![None; n * n];
    for j in 0..n {
        for k in j + 1..n {
            if counts[j * n + k] > 0 {
                let m = sums[j * n + k] / counts[j * n + k] as f64;
                values[j * n + k] = Some(m);
                values[k * n + j] = Some(m);
            }
        }
    }
    MomentMatrix { names: matrix.source_ids().to_vec(), values }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Unsigned, unclipped `|a_i|` from the median over triplets.
///
/// Triplets whose denominator `|M_jk|` is below `min_moment` (or missing) are
/// skipped.
pub fn triplet_accuracies_from_moments(
    moments: &MomentMatrix,
    min_moment: f64,
) -> Result<Vec<f64>, LabelModelError> {
    let n = moments.n_sources();
    if n < 3 {
        return Err(LabelModelError::NotEnoughSources(n));
    }
    let mut out = Vec::with_capacity(n);
    let mut estimates = Vec::new();
    for i in 0..n {
        estimates.clear();
        for j in 0..n {
            for k in j + 1..n {
                if j == i || k == i {
                    continue;
                }
                let (Some(m_ij), Some(m_ik), Some(m_jk)) =
                    (moments.get(i, j), moments.get(i, k), moments.get(j, k))
                else {
                    continue;
                };
                if m_jk.abs() < min_moment {
                    continue;
                }
                estimates.push((m_ij * m_ik / m_jk).abs().sqrt());
            }
        }
        if estimates.is_empty() {
            return Err(LabelModelError::DegenerateMoments(moments.names[i].clone()));
        }
        out.push(median(&mut estimates));
    }
    Ok(out)
}

/// Share of items whose hardened majority vote is `+1`.
fn majority_balance(matrix: &VoteMatrix) -> f64 {
    let hard = majority_vote(matrix).harden();
    hard.iter().filter(|v| **v == Vote::Positive).count() as f64 / hard.len() as f64
}

/// FlyingSquid-style source parameters.
///
/// Correlations come out non-negative; the whole vector is flipped when the
/// resulting labels disagree with majority vote on more than half the items.
/// The class balance is the positive share of hardened majority labels.
pub fn estimate_triplet_accuracies(
    matrix: &VoteMatrix,
    min_moment: f64,
) -> Result<SourceParams, LabelModelError> {
    if matrix.n_sources() < 3 {
        return Err(LabelModelError::NotEnoughSources(matrix.n_sources()));
    }
    let a = triplet_accuracies_from_moments(&pairwise_moments(matrix), min_moment)?;
    let params = SourceParams::new(a, majority_balance(matrix));

    let ours = harden(&posterior_naive_bayes(matrix, &params)?, 0.5);
    let majority = majority_vote(matrix).harden();
    let disagreements = ours.iter().zip(&majority).filter(|(a, b)| a != b).count();
    if 2 * disagreements > matrix.n_items() {
        Ok(params.negated())
    } else {
        Ok(params)
    }
}

/// Naive-Bayes posterior with symmetric per-source channels.
///
/// `logit p_i = logit(balance) + Σ_j v_ij · ln(q_j / (1 - q_j))`.
pub fn posterior_naive_bayes(
    matrix: &VoteMatrix,
    params: &SourceParams,
) -> Result<PosteriorLabels, LabelModelError> {
    if params.len() != matrix.n_sources() {
        return Err(LabelModelError::ParamMismatch { params: params.len(), matrix: matrix.n_sources() });
    }
    let weights: Vec<f64> = params
        .correlations()
        .iter()
        .map(|a| ((1.0 + a) / (1.0 - a)).ln())
        .collect();
    let prior = logit(params.class_balance());
    let probs = matrix
        .rows()
        .map(|row| {
            let z = prior + row.iter().zip(&weights).map(|(v, w)| v.sign() * w).sum::<f64>();
            logistic(z)
        })
        .collect();
    PosteriorLabels::new(probs)
}
