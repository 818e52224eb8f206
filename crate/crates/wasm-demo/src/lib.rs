//! Browser bindings for the consolidation demo.
//!
//! Each export takes a JSON request string and returns a JSON response string.
//! The `*_json` functions hold the logic so they can be tested natively.

use lexvote::experiment::{combination_count, subset_combinations};
use lexvote::label_models::{
    estimate_triplet_accuracies, fit_dawid_skene, fit_generative_model, flyingsquid_params,
    triplet_accuracies_from_moments, Estimator, FitConfig, LabelModel, MomentMatrix, DEFAULT_MIN_MOMENT,
    ESTIMATOR_NAMES,
};
use lexvote::simulate::{sample_symmetric, SymmetricSources};
use lexvote::votes::{accuracy, Labels, Percent, VoteMatrix};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest source count the demo accepts; subset curves grow as `2^m`.
pub const MAX_SOURCES: usize = 12;
pub const MAX_ITEMS: usize = 20_000;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationRequest {
    pub accuracies: Vec<f64>,
    pub items: usize,
    #[serde(default)]
    pub abstain_rate: f64,
    #[serde(default = "half")]
    pub class_balance: f64,
    #[serde(default)]
    pub seed: u64,
    /// Estimator for `subset_curve`.
    #[serde(default)]
    pub estimator: Option<String>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Serialize)]
pub struct EstimatorRow {
    pub name: String,
    pub title: String,
    pub accuracy: f64,
    /// Estimated per-source accuracy, when the estimator has one.
    pub source_accuracy: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct SimulationResponse {
    pub source_accuracy: Vec<f64>,
    pub mean_source_accuracy: f64,
    pub estimators: Vec<EstimatorRow>,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub subsets: usize,
    pub min: f64,
    pub median: f64,
    pub avg: f64,
    pub max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletRequest {
    pub correlations: [f64; 3],
    #[serde(default = "default_items")]
    pub items: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_items() -> usize {
    2000
}

#[derive(Debug, Serialize)]
pub struct TripletResponse {
    pub truth: [f64; 3],
    pub from_exact_moments: Vec<f64>,
    pub from_sample: Vec<f64>,
    pub sample_moments: [f64; 3],
}

fn percent(acc: lexvote::votes::EvaluationResult) -> f64 {
    acc.percent().rounded()
}

fn validate(req: &SimulationRequest) -> Result<(), String> {
    if req.accuracies.is_empty() || req.accuracies.len() > MAX_SOURCES {
        return Err(format!("need 1 to {MAX_SOURCES} sources"));
    }
    if req.items == 0 || req.items > MAX_ITEMS {
        return Err(format!("items must be between 1 and {MAX_ITEMS}"));
    }
    if req.accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err("accuracies must lie in [0, 1]".into());
    }
    if !(0.0..1.0).contains(&req.abstain_rate) {
        return Err("abstain_rate must lie in [0, 1)".into());
    }
    if !(req.class_balance > 0.0 && req.class_balance < 1.0) {
        return Err("class_balance must lie in (0, 1)".into());
    }
    Ok(())
}

fn sample(req: &SimulationRequest) -> Result<(VoteMatrix, Labels), String> {
    validate(req)?;
    let sources = SymmetricSources::from_accuracies(&req.accuracies, req.class_balance).with_abstain_rate(req.abstain_rate);
    Ok(sample_symmetric(req.items, &sources, req.seed))
}

fn estimated_accuracies(name: &str, m: &VoteMatrix, cfg: &FitConfig) -> Option<Vec<f64>> {
    match name {
        "flyingsquid" => flyingsquid_params(m, DEFAULT_MIN_MOMENT).ok().map(|p| p.accuracies()),
        "generative" => fit_generative_model(m, cfg).ok().map(|f| f.params.accuracies()),
        "dawid_skene" => fit_dawid_skene(m, cfg).ok().map(|f| {
            let pi = f.params.prior;
            f.params.sensitivity.iter().zip(&f.params.specificity).map(|(a, b)| pi * a + (1.0 - pi) * b).collect()
        }),
        _ => None,
    }
}

/// Samples a vote matrix and scores every estimator against the sampled truth.
pub fn simulate_consolidation_json(request: &str) -> Result<String, String> {
    let req: SimulationRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let (m, truth) = sample(&req)?;
    let source_accuracy: Vec<f64> =
        (0..m.n_sources()).map(|j| accuracy(&m.source_labels(j), &truth).map(percent)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let cfg = FitConfig { seed: req.seed, ..FitConfig::default() };
    let mut estimators = Vec::new();
    for name in ESTIMATOR_NAMES {
        let est = Estimator::from_name(name, &cfg).map_err(|e| e.to_string())?;
        let post = est.predict(&m).map_err(|e| format!("{name}: {e}"))?;
        let acc = accuracy(&m.label_map(&post.harden()), &truth).map_err(|e| e.to_string())?;
        estimators.push(EstimatorRow {
            name: name.to_string(),
            title: est.title().to_string(),
            accuracy: percent(acc),
            source_accuracy: estimated_accuracies(name, &m, &cfg),
        });
    }
    let mean_source_accuracy = source_accuracy.iter().sum::<f64>() / source_accuracy.len() as f64;
    let resp = SimulationResponse { source_accuracy, mean_source_accuracy, estimators };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

/// Accuracy range over all `k`-source subsets for every `k`.
pub fn subset_curve_json(request: &str) -> Result<String, String> {
    let req: SimulationRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let (m, truth) = sample(&req)?;
    let cfg = FitConfig { seed: req.seed, ..FitConfig::default() };
    let est = Estimator::from_name(req.estimator.as_deref().unwrap_or("majority"), &cfg).map_err(|e| e.to_string())?;
    let n = m.n_sources();
    let cap = (1..=n).map(|k| combination_count(n, k)).max().unwrap_or(1);
    let mut points = Vec::with_capacity(n);
    for k in 1..=n {
        let row = subset_combinations(&m, k, &est, &truth, cap).map_err(|e| e.to_string())?;
        let p = |f| Percent(f).rounded();
        points.push(CurvePoint {
            k,
            subsets: row.subsets,
            min: p(row.stats.min),
            median: p(row.stats.median),
            avg: p(row.stats.avg),
            max: p(row.stats.max),
        });
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

/// Triplet recovery from exact moments and from a sampled matrix.
pub fn triplet_recovery_json(request: &str) -> Result<String, String> {
    let req: TripletRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let a = req.correlations;
    if a.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err("correlations must lie in (0, 1)".into());
    }
    if req.items == 0 || req.items > MAX_ITEMS {
        return Err(format!("items must be between 1 and {MAX_ITEMS}"));
    }
    let exact = MomentMatrix::from_fn(3, |j, k| a[j] * a[k]);
    let from_exact_moments = triplet_accuracies_from_moments(&exact, DEFAULT_MIN_MOMENT).map_err(|e| e.to_string())?;
    let (m, _) = sample_symmetric(req.items, &SymmetricSources::from_correlations(&a, 0.5), req.seed);
    let from_sample = estimate_triplet_accuracies(&m, DEFAULT_MIN_MOMENT).map_err(|e| e.to_string())?.correlations().to_vec();
    let moments = lexvote::label_models::pairwise_moments(&m);
    let get = |j, k| moments.get(j, k).unwrap_or(f64::NAN);
    let resp = TripletResponse { truth: a, from_exact_moments, from_sample, sample_moments: [get(0, 1), get(0, 2), get(1, 2)] };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate_consolidation(request: &str) -> Result<String, JsError> {
    simulate_consolidation_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn subset_curve(request: &str) -> Result<String, JsError> {
    subset_curve_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn triplet_recovery(request: &str) -> Result<String, JsError> {
    triplet_recovery_json(request).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn consolidation_reports_every_estimator() {
        let out = simulate_consolidation_json(r#"{"accuracies":[0.7,0.7,0.7,0.7,0.7],"items":500,"seed":3}"#).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        let names: Vec<&str> = v["estimators"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
        assert_eq!(names, ESTIMATOR_NAMES);
        let mean = v["mean_source_accuracy"].as_f64().unwrap();
        for e in v["estimators"].as_array().unwrap() {
            assert!(e["accuracy"].as_f64().unwrap() > mean, "{e}");
        }
        assert!(v["estimators"][0]["source_accuracy"].is_null());
        assert_eq!(v["estimators"][3]["source_accuracy"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn consolidation_is_deterministic() {
        let req = r#"{"accuracies":[0.8,0.6,0.65],"items":200,"abstain_rate":0.1,"seed":9}"#;
        assert_eq!(simulate_consolidation_json(req).unwrap(), simulate_consolidation_json(req).unwrap());
    }

    #[test]
    fn bad_requests_are_rejected() {
        assert!(simulate_consolidation_json(r#"{"accuracies":[],"items":10}"#).is_err());
        assert!(simulate_consolidation_json(r#"{"accuracies":[1.5],"items":10}"#).is_err());
        assert!(simulate_consolidation_json(r#"{"accuracies":[0.7],"items":0}"#).is_err());
        assert!(simulate_consolidation_json(r#"{"accuracies":[0.7],"items":10,"bogus":1}"#).is_err());
        assert!(subset_curve_json(r#"{"accuracies":[0.7,0.7,0.7],"items":10,"estimator":"hyper"}"#).is_err());
        assert!(triplet_recovery_json(r#"{"correlations":[0.5,0.0,0.5]}"#).is_err());
    }

    #[test]
    fn subset_curve_counts_and_ordering() {
        let req = r#"{"accuracies":[0.9,0.8,0.7,0.6,0.55,0.75],"items":300,"seed":1,"estimator":"generative"}"#;
        let v: Value = serde_json::from_str(&subset_curve_json(req).unwrap()).unwrap();
        let pts = v.as_array().unwrap();
        let subsets: Vec<u64> = pts.iter().map(|p| p["subsets"].as_u64().unwrap()).collect();
        assert_eq!(subsets, [6, 15, 20, 15, 6, 1]);
        for p in pts {
            let f = |k: &str| p[k].as_f64().unwrap();
            assert!(f("min") <= f("median") && f("median") <= f("max"));
            assert!(f("min") <= f("avg") && f("avg") <= f("max"));
        }
        let last = &pts[5];
        assert_eq!(last["min"], last["max"]);
    }

    #[test]
    fn triplet_recovers_exact_moments() {
        let out = triplet_recovery_json(r#"{"correlations":[0.8,0.9,0.6],"items":5000,"seed":11}"#).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        for (got, want) in v["from_exact_moments"].as_array().unwrap().iter().zip([0.8, 0.9, 0.6]) {
            assert!((got.as_f64().unwrap() - want).abs() < 1e-12);
        }
        for (got, want) in v["from_sample"].as_array().unwrap().iter().zip([0.8, 0.9, 0.6]) {
            assert!((got.as_f64().unwrap() - want).abs() < 0.05);
        }
    }
}
