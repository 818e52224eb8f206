//! Label models: consolidate a [`VoteMatrix`] into per-item posteriors.
//!
//! Four estimators are provided:
//!
//! * [`majority_vote`]: share of positive votes among non-abstains.
//! * [`fit_dawid_skene`]: two-class Dawid-Skene EM with per-source
//!   sensitivity and specificity.
//! * [`estimate_triplet_accuracies`] + [`posterior_naive_bayes`]: closed-form
//!   method of moments over source triplets (the FlyingSquid estimator).
//! * [`fit_generative_model`]: Ising-style factor model `exp(θ_i · v_i · y)`
//!   fitted by gradient ascent on the marginal likelihood.
//!
//! Abstains drop out of every likelihood and moment. Anything implementing
//! [`LabelModel`] can be plugged into the experiment grid.

mod dawid_skene;
mod generative;
mod triplet;

use serde::Serialize;
use thiserror::Error;

use crate::votes::{Vote, VoteMatrix};

pub use dawid_skene::{fit_dawid_skene, ConfusionParams, DawidSkeneFit};
pub use generative::{
    fit_generative_model, generative_posteriors, marginal_log_likelihood, GenerativeFit, THETA_BOUND, THETA_INIT,
};
pub use triplet::{
    estimate_triplet_accuracies, pairwise_moments, posterior_naive_bayes, triplet_accuracies_from_moments,
    MomentMatrix, SourceParams, DEFAULT_MIN_MOMENT,
};

#[derive(Debug, Error, PartialEq)]
pub enum LabelModelError {
    #[error("vote matrix has no non-abstain votes")]
    EmptyInput,
    #[error("triplet estimation needs at least 3 sources, got {0}")]
    NotEnoughSources(usize),
    #[error("every triplet for source {0:?} has a near-zero moment")]
    DegenerateMoments(String),
    #[error("parameters cover {params} sources but the matrix has {matrix}")]
    ParamMismatch { params: usize, matrix: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("unknown label model {0:?}")]
    UnknownModel(String),
    #[error("invalid fit config: {0}")]
    InvalidConfig(String),
}

/// Per-item probability of the positive label, aligned with the matrix items.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorLabels(Vec<f64>);

impl PosteriorLabels {
    pub fn new(probs: Vec<f64>) -> Result<Self, LabelModelError> {
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(LabelModelError::NumericalFailure(format!("posterior {p} outside [0, 1]")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn harden(&self) -> Vec<Vote> {
        harden(self, 0.5)
    }
}

/// `p > threshold` → `+1`, `p < threshold` → `-1`, ties → `+1`.
pub fn harden(posteriors: &PosteriorLabels, threshold: f64) -> Vec<Vote> {
    posteriors
        .probs()
        .iter()
        .map(|&p| Vote::from_bool(p >= threshold))
        .collect()
}

/// Settings shared by the iterative estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Objective-improvement threshold for EM; max |Δθ| for gradient ascent.
    pub tolerance: f64,
    pub seed: u64,
    /// Gradient-ascent step (generative model only).
    pub step_size: f64,
    /// Prior probability of `+1` used by the generative model posterior.
    pub class_balance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { max_iterations: 500, tolerance: 1e-6, seed: 0, step_size: 0.05, class_balance: 0.5 }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), LabelModelError> {
        let bad = |m: &str| Err(LabelModelError::InvalidConfig(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return bad("step_size must be positive");
        }
        if !(self.class_balance > 0.0 && self.class_balance < 1.0) {
            return bad("class_balance must lie in (0, 1)");
        }
        Ok(())
    }
}

/// `p_i` = positive votes / non-abstain votes, or `0.5` when every source abstains.
pub fn majority_vote(matrix: &VoteMatrix) -> PosteriorLabels {
    let probs = matrix
        .rows()
        .map(|row| {
            let pos = row.iter().filter(|v| **v == Vote::Positive).count();
            let answered = row.iter().filter(|v| !v.is_abstain()).count();
            if answered == 0 {
                0.5
            } else {
                pos as f64 / answered as f64
            }
        })
        .collect();
    PosteriorLabels(probs)
}

/// Extension point: anything mapping a vote matrix to posteriors.
pub trait LabelModel: Send + Sync {
    fn name(&self) -> &str;
    fn predict(&self, matrix: &VoteMatrix) -> Result<PosteriorLabels, LabelModelError>;
}

/// The built-in estimators, selectable by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Majority,
    DawidSkene(FitConfig),
    FlyingSquid { min_moment: f64 },
    Generative(FitConfig),
}

/// Names accepted by [`Estimator::from_name`], in report order.
pub const ESTIMATOR_NAMES: [&str; 4] = ["majority", "flyingsquid", "dawid_skene", "generative"];

/// Correlation assumed for every source when there are too few sources for
/// triplets.
pub const FALLBACK_CORRELATION: f64 = 0.5;

impl Estimator {
    pub fn from_name(name: &str, config: &FitConfig) -> Result<Estimator, LabelModelError> {
        match name {
            "majority" | "majority_vote" => Ok(Estimator::Majority),
            "dawid_skene" | "dawid-skene" => Ok(Estimator::DawidSkene(config.clone())),
            "flyingsquid" | "triplet" => Ok(Estimator::FlyingSquid { min_moment: DEFAULT_MIN_MOMENT }),
            "generative" => Ok(Estimator::Generative(config.clone())),
            other => Err(LabelModelError::UnknownModel(other.to_string())),
        }
    }

    /// Display label used in report tables.
    pub fn title(&self) -> &'static str {
        match self {
            Estimator::Majority => "Majority voting",
            Estimator::DawidSkene(_) => "Dawid-Skene",
            Estimator::FlyingSquid { .. } => "FlyingSquid",
            Estimator::Generative(_) => "Generative model",
        }
    }
}

impl LabelModel for Estimator {
    fn name(&self) -> &str {
        match self {
            Estimator::Majority => "majority",
            Estimator::DawidSkene(_) => "dawid_skene",
            Estimator::FlyingSquid { .. } => "flyingsquid",
            Estimator::Generative(_) => "generative",
        }
    }

    fn predict(&self, matrix: &VoteMatrix) -> Result<PosteriorLabels, LabelModelError> {
        match self {
            Estimator::Majority => Ok(majority_vote(matrix)),
            Estimator::DawidSkene(cfg) => Ok(fit_dawid_skene(matrix, cfg)?.posteriors),
            Estimator::FlyingSquid { min_moment } => {
                let params = flyingsquid_params(matrix, *min_moment)?;
                posterior_naive_bayes(matrix, &params)
            }
            Estimator::Generative(cfg) => Ok(fit_generative_model(matrix, cfg)?.posteriors),
        }
    }
}

/// Triplet estimates, or a flat [`FALLBACK_CORRELATION`] with balance 0.5
/// when fewer than three sources are available, so a lone source is followed
/// as is.
pub fn flyingsquid_params(matrix: &VoteMatrix, min_moment: f64) -> Result<SourceParams, LabelModelError> {
    if matrix.n_sources() >= 3 {
        return estimate_triplet_accuracies(matrix, min_moment);
    }
    if matrix.non_abstain_count() == 0 {
        return Err(LabelModelError::EmptyInput);
    }
    Ok(SourceParams::new(vec![FALLBACK_CORRELATION; matrix.n_sources()], 0.5))
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
