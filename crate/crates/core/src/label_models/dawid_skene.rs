//! Two-class Dawid-Skene EM.
//!
//! Each source has a sensitivity `α_j = P(+1 | y = +1)` and a specificity
//! `β_j = P(-1 | y = -1)`. The M-step uses pseudocount 1 on every count,
//! which is MAP-EM under independent Beta(2, 2) priors; the objective traced
//! per iteration is therefore the observed-data log-likelihood plus that
//! log-prior, and it never decreases.

use serde::Serialize;

use super::{majority_vote, FitConfig, LabelModelError, PosteriorLabels};
use crate::votes::{Vote, VoteMatrix};

const PARAM_MIN: f64 = 0.005;
const PARAM_MAX: f64 = 0.995;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionParams {
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    /// Prior probability of `+1`.
    pub prior: f64,
}

impl ConfusionParams {
    fn log_prior(&self) -> f64 {
        let beta22 = |p: f64| p.ln() + (1.0 - p).ln();
        beta22(self.prior)
            + self.sensitivity.iter().map(|&a| beta22(a)).sum::<f64>()
            + self.specificity.iter().map(|&b| beta22(b)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DawidSkeneFit {
    pub params: ConfusionParams,
    pub posteriors: PosteriorLabels,
    /// Observed-data log-likelihood of the final parameters.
    pub log_likelihood: f64,
    /// Penalized objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn m_step(matrix: &VoteMatrix, post: &[f64]) -> ConfusionParams {
    let m = matrix.n_sources();
    let mut pos_hit = vec![0.0; m];
    let mut pos_seen = vec![0.0; m];
    let mut neg_hit = vec![0.0; m];
    let mut neg_seen = vec![0.0; m];
    for (row, &t) in matrix.rows().zip(post) {
        for (j, v) in row.iter().enumerate() {
            match v {
                Vote::Abstain => continue,
                Vote::Positive => pos_hit[j] += t,
                Vote::Negative => neg_hit[j] += 1.0 - t,
            }
            pos_seen[j] += t;
            neg_seen[j] += 1.0 - t;
        }
    }
    let smooth = |hit: f64, seen: f64| ((hit + 1.0) / (seen + 2.0)).clamp(PARAM_MIN, PARAM_MAX);
    let n = post.len() as f64;
    ConfusionParams {
        sensitivity: (0..m).map(|j| smooth(pos_hit[j], pos_seen[j])).collect(),
        specificity: (0..m).map(|j| smooth(neg_hit[j], neg_seen[j])).collect(),
        prior: smooth(post.iter().sum(), n),
    }
}

/// Posteriors and observed-data log-likelihood under `params`.
fn e_step(matrix: &VoteMatrix, params: &ConfusionParams) -> (Vec<f64>, f64) {
    let ln_a: Vec<(f64, f64)> = params.sensitivity.iter().map(|a| (a.ln(), (1.0 - a).ln())).collect();
    let ln_b: Vec<(f64, f64)> = params.specificity.iter().map(|b| (b.ln(), (1.0 - b).ln())).collect();
    let mut loglik = 0.0;
    let post = matrix
        .rows()
        .map(|row| {
            let mut lp = params.prior.ln();
            let mut ln = (1.0 - params.prior).ln();
            for (j, v) in row.iter().enumerate() {
                match v {
                    Vote::Positive => {
                        lp += ln_a[j].0;
                        ln += ln_b[j].1;
                    }
                    Vote::Negative => {
                        lp += ln_a[j].1;
                        ln += ln_b[j].0;
                    }
                    Vote::Abstain => {}
                }
            }
            let top = lp.max(ln);
            let log_z = top + ((lp - top).exp() + (ln - top).exp()).ln();
            loglik += log_z;
            (lp - log_z).exp()
        })
        .collect();
    (post, loglik)
}

/// Fits Dawid-Skene by EM, starting from majority-vote posteriors.
///
/// Stops when the objective improves by less than `config.tolerance` or after
/// `config.max_iterations` rounds. A decrease larger than floating error
/// (`1e-9`, relative) is reported as [`LabelModelError::NumericalFailure`].
///
/// With fewer than three sources the confusion parameters are not
/// identified and EM drifts along a flat ridge, so only one round is run.
pub fn fit_dawid_skene(matrix: &VoteMatrix, config: &FitConfig) -> Result<DawidSkeneFit, LabelModelError> {
    config.validate()?;
    if matrix.non_abstain_count() == 0 {
        return Err(LabelModelError::EmptyInput);
    }
    let mut post = majority_vote(matrix).probs().to_vec();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut params = m_step(matrix, &post);
    let mut loglik = f64::NEG_INFINITY;
    let identified = matrix.n_sources() >= 3;
    let rounds = if identified { config.max_iterations } else { 1 };
    for _ in 0..rounds {
        params = m_step(matrix, &post);
        let (next, ll) = e_step(matrix, &params);
        let objective = ll + params.log_prior();
        if !objective.is_finite() {
            return Err(LabelModelError::NumericalFailure("non-finite EM objective".into()));
        }
        post = next;
        loglik = ll;
        if let Some(&prev) = trace.last() {
            if objective < prev - 1e-9 * prev.abs().max(1.0) {
                return Err(LabelModelError::NumericalFailure(format!(
                    "EM objective decreased from {prev} to {objective}"
                )));
            }
            trace.push(objective);
            if objective - prev < config.tolerance {
                converged = true;
                break;
            }
        } else {
            trace.push(objective);
        }
    }
    Ok(DawidSkeneFit {
        params,
        posteriors: PosteriorLabels::new(post)?,
        log_likelihood: loglik,
        iterations: trace.len(),
        objective_trace: trace,
        converged: converged || !identified,
    })
}
