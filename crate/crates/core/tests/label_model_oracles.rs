//! Label models checked against independently written reference code.

use lexvote::label_models::{
    fit_dawid_skene, harden, majority_vote, posterior_naive_bayes, Estimator, FitConfig, LabelModel, SourceParams,
    ESTIMATOR_NAMES,
};
use lexvote::simulate::{sample_confusion, sample_symmetric, ConfusionSources, SymmetricSources};
use lexvote::votes::{Vote, VoteMatrix};
use proptest::prelude::*;

/// Textbook two-class Dawid-Skene EM in probability space, same smoothing.
fn reference_dawid_skene(rows: &[Vec<i8>], iterations: usize) -> (Vec<f64>, Vec<f64>, f64, Vec<f64>) {
    let clip = |x: f64| x.clamp(0.005, 0.995);
    let m = rows[0].len();
    let mut t: Vec<f64> = rows
        .iter()
        .map(|r| {
            let pos = r.iter().filter(|&&v| v == 1).count() as f64;
            let ans = r.iter().filter(|&&v| v != 0).count() as f64;
            if ans == 0.0 {
                0.5
            } else {
                pos / ans
            }
        })
        .collect();
    let (mut alpha, mut beta, mut pi) = (vec![0.0; m], vec![0.0; m], 0.0);
    for _ in 0..iterations {
        for j in 0..m {
            let (mut a_num, mut a_den, mut b_num, mut b_den) = (1.0, 2.0, 1.0, 2.0);
            for (r, ti) in rows.iter().zip(&t) {
                if r[j] == 0 {
                    continue;
                }
                a_den += ti;
                b_den += 1.0 - ti;
                if r[j] == 1 {
                    a_num += ti;
                } else {
                    b_num += 1.0 - ti;
                }
            }
            alpha[j] = clip(a_num / a_den);
            beta[j] = clip(b_num / b_den);
        }
        pi = clip((t.iter().sum::<f64>() + 1.0) / (rows.len() as f64 + 2.0));
        t = rows
            .iter()
            .map(|r| {
                let mut p = pi;
                let mut q = 1.0 - pi;
                for j in 0..m {
                    match r[j] {
                        1 => {
                            p *= alpha[j];
                            q *= 1.0 - beta[j];
                        }
                        -1 => {
                            p *= 1.0 - alpha[j];
                            q *= beta[j];
                        }
                        _ => {}
                    }
                }
                p / (p + q)
            })
            .collect();
    }
    (alpha, beta, pi, t)
}

fn rows_of(m: &VoteMatrix) -> Vec<Vec<i8>> {
    m.rows().map(|r| r.iter().map(|v| v.value()).collect()).collect()
}

#[test]
fn dawid_skene_matches_reference_em() {
    let truth = [0.85, 0.75, 0.65, 0.60, 0.55];
    let sources = ConfusionSources { sensitivities: truth.to_vec(), specificities: truth.to_vec(), prior: 0.5 };
    let (m, _) = sample_confusion(2000, &sources, 7);
    let cfg = FitConfig { max_iterations: 5000, tolerance: 1e-12, ..FitConfig::default() };
    let fit = fit_dawid_skene(&m, &cfg).unwrap();
    assert!(fit.converged);
    let (alpha, beta, pi, post) = reference_dawid_skene(&rows_of(&m), 5000);
    for j in 0..5 {
        assert!((fit.params.sensitivity[j] - alpha[j]).abs() < 1e-6, "alpha {j} {} {}", fit.params.sensitivity[j], alpha[j]);
        assert!((fit.params.specificity[j] - beta[j]).abs() < 1e-6, "beta {j}");
        assert!((alpha[j] - truth[j]).abs() < 0.05 && (beta[j] - truth[j]).abs() < 0.05, "source {j}: {} {}", alpha[j], beta[j]);
    }
    assert!((fit.params.prior - pi).abs() < 1e-6);
    let worst = fit.posteriors.probs().iter().zip(&post).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5, "posterior gap {worst}, iterations {}", fit.iterations);
}

#[test]
fn majority_equals_naive_bayes_with_equal_params_on_odd_counts() {
    let sources = SymmetricSources::from_accuracies(&[0.7; 6], 0.5).with_abstain_rate(0.2);
    let (m, _) = sample_symmetric(1000, &sources, 3);
    let params = SourceParams::new(vec![0.4; 6], 0.5);
    let nb = harden(&posterior_naive_bayes(&m, &params).unwrap(), 0.5);
    let mv = majority_vote(&m).harden();
    let mut checked = 0;
    for (i, row) in m.rows().enumerate() {
        if row.iter().filter(|v| !v.is_abstain()).count() % 2 == 1 {
            assert_eq!(nb[i], mv[i], "item {i}");
            checked += 1;
        }
    }
    assert!(checked > 300);
}

fn all_estimators() -> Vec<Estimator> {
    ESTIMATOR_NAMES.iter().map(|n| Estimator::from_name(n, &FitConfig::default()).unwrap()).collect()
}

#[test]
fn estimators_are_deterministic() {
    let sources = SymmetricSources::from_accuracies(&[0.8, 0.7, 0.65, 0.6, 0.75], 0.4).with_abstain_rate(0.1);
    let (m, _) = sample_symmetric(300, &sources, 5);
    for e in all_estimators() {
        let a = e.predict(&m).unwrap();
        let b = e.predict(&m).unwrap();
        let bits = |p: &lexvote::label_models::PosteriorLabels| p.probs().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b), "{}", e.name());
    }
}

#[test]
fn unknown_estimator_names() {
    for name in ["hyper", "fable", "snorkel", ""] {
        assert!(Estimator::from_name(name, &FitConfig::default()).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permutation_invariance(seed in 0u64..1000, shift in 1usize..5) {
        let sources = SymmetricSources::from_accuracies(&[0.85, 0.7, 0.65, 0.75, 0.6], 0.5).with_abstain_rate(0.05);
        let (m, _) = sample_symmetric(120, &sources, seed);
        let n = m.n_items();
        let item_order: Vec<usize> = (0..n).map(|i| (i * 7 + shift) % n).collect();
        let cols: Vec<usize> = (0..5).map(|j| (j + shift) % 5).collect();
        let by_items = m.permute_items(&item_order);
        let by_sources = m.select_sources(&cols).unwrap();
        for e in all_estimators() {
            let base = e.predict(&m).unwrap();
            let p_items = e.predict(&by_items).unwrap();
            for (new, &old) in item_order.iter().enumerate() {
                prop_assert!((p_items.probs()[new] - base.probs()[old]).abs() < 1e-9, "{} items", e.name());
            }
            let p_src = e.predict(&by_sources).unwrap();
            for (a, b) in p_src.probs().iter().zip(base.probs()) {
                prop_assert!((a - b).abs() < 1e-9, "{} sources", e.name());
            }
        }
    }

    #[test]
    fn hardening_tie_rule(p in 0.0f64..=1.0) {
        let post = lexvote::label_models::PosteriorLabels::new(vec![p]).unwrap();
        let expected = if p >= 0.5 { Vote::Positive } else { Vote::Negative };
        prop_assert_eq!(harden(&post, 0.5), vec![expected]);
    }
}
