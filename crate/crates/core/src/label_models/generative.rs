//! Generative label model.
//!
//! `P(v, y) ∝ exp(Σ_j θ_j v_j y)` with a latent `y ∈ {-1, +1}` and a uniform
//! prior. Abstaining sources are treated as unobserved, so each item's
//! marginal log-likelihood is `ln 2cosh(s) - Σ_{j answered} ln 2cosh(θ_j)`
//! with `s = Σ_j θ_j v_j`, and its gradient is
//! `v_j tanh(s) - [v_j ≠ 0] tanh(θ_j)`.

use serde::Serialize;

use super::{logistic, logit, FitConfig, LabelModelError, PosteriorLabels, SourceParams};
use crate::votes::VoteMatrix;

pub const THETA_INIT: f64 = 0.7;
pub const THETA_BOUND: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerativeFit {
    /// `a_j = tanh(θ_j)` and the configured class balance.
    pub params: SourceParams,
    pub thetas: Vec<f64>,
    pub posteriors: PosteriorLabels,
    pub iterations: usize,
    pub converged: bool,
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn scores(matrix: &VoteMatrix, thetas: &[f64]) -> Vec<f64> {
    matrix
        .rows()
        .map(|row| row.iter().zip(thetas).map(|(v, t)| v.sign() * t).sum())
        .collect()
}

/// Mean per-item marginal log-likelihood (the `ln 2` terms cancel and are dropped).
pub fn marginal_log_likelihood(matrix: &VoteMatrix, thetas: &[f64]) -> f64 {
    let ln_cosh_theta: Vec<f64> = thetas.iter().map(|&t| ln_cosh(t)).collect();
    let total: f64 = matrix
        .rows()
        .zip(scores(matrix, thetas))
        .map(|(row, s)| {
            let norm: f64 = row
                .iter()
                .zip(&ln_cosh_theta)
                .filter(|(v, _)| !v.is_abstain())
                .map(|(_, c)| c)
                .sum();
            ln_cosh(s) - norm
        })
        .sum();
    total / matrix.n_items() as f64
}

/// `p_i = logistic(2 Σ_j θ_j v_ij + logit(balance))`.
pub fn generative_posteriors(
    matrix: &VoteMatrix,
    thetas: &[f64],
    class_balance: f64,
) -> Result<PosteriorLabels, LabelModelError> {
    if thetas.len() != matrix.n_sources() {
        return Err(LabelModelError::ParamMismatch { params: thetas.len(), matrix: matrix.n_sources() });
    }
    let prior = logit(class_balance);
    PosteriorLabels::new(scores(matrix, thetas).into_iter().map(|s| logistic(2.0 * s + prior)).collect())
}

/// Gradient ascent on the mean marginal log-likelihood from `θ = 0.7`.
///
/// Each step moves by `config.step_size × gradient` and clips to `[-4, 4]`;
/// stops once the largest parameter change is below `config.tolerance`.
pub fn fit_generative_model(matrix: &VoteMatrix, config: &FitConfig) -> Result<GenerativeFit, LabelModelError> {
    config.validate()?;
    if matrix.non_abstain_count() == 0 {
        return Err(LabelModelError::EmptyInput);
    }
    let (n, m) = (matrix.n_items() as f64, matrix.n_sources());
    let mut thetas = vec![THETA_INIT; m];
    let mut grad = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let tanh_theta: Vec<f64> = thetas.iter().map(|t| t.tanh()).collect();
        for row in matrix.rows() {
            let s: f64 = row.iter().zip(&thetas).map(|(v, t)| v.sign() * t).sum();
            let ts = s.tanh();
            for (j, v) in row.iter().enumerate() {
                if !v.is_abstain() {
                    grad[j] += v.sign() * ts - tanh_theta[j];
                }
            }
        }
        let mut delta: f64 = 0.0;
        for (t, g) in thetas.iter_mut().zip(&grad) {
            let g = g / n;
            if !g.is_finite() {
                return Err(LabelModelError::NumericalFailure("non-finite gradient".into()));
            }
            let next = (*t + config.step_size * g).clamp(-THETA_BOUND, THETA_BOUND);
            delta = delta.max((next - *t).abs());
            *t = next;
        }
        if delta < config.tolerance {
            converged = true;
            break;
        }
    }
    let posteriors = generative_posteriors(matrix, &thetas, config.class_balance)?;
    Ok(GenerativeFit {
        params: SourceParams::new(thetas.iter().map(|t| t.tanh()).collect(), config.class_balance),
        thetas,
        posteriors,
        iterations,
        converged,
    })
}
