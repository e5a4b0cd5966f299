mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{binomial, brute_simplex_counts, brute_srcc, rng};
use memorability::aggregate::{Coverage, PredictionTable};
use memorability::corpus::{LabelTable, Term, VideoId};
use memorability::ensemble::*;

fn ids(n: usize) -> Vec<VideoId> {
    (0..n).map(|i| VideoId::new(format!("v{i:03}")).unwrap()).collect()
}

fn table(name: &str, ids: &[VideoId], scores: &[f64]) -> PredictionTable {
    PredictionTable {
        model_name: name.into(),
        scores: ids.iter().cloned().zip(scores.iter().copied()).collect(),
        coverage: ids.iter().map(|v| (v.clone(), Coverage::Direct)).collect(),
        aggregation: None,
    }
}

fn labels(ids: &[VideoId], scores: &[f64]) -> LabelTable {
    let mut t = LabelTable::new(Term::Short);
    for (v, s) in ids.iter().zip(scores) {
        t.insert(v.clone(), *s).unwrap();
    }
    t
}

#[test]
fn counts_follow_stars_and_bars() {
    for k in 1..=5usize {
        for steps in 1..=20u32 {
            let counts = enumerate_counts(k, steps);
            assert_eq!(counts.len() as u64, binomial(steps as u64 + k as u64 - 1, k as u64 - 1), "k={k} B={steps}");
            assert!(counts.windows(2).all(|w| w[0] < w[1]), "not strictly lexicographic");
        }
    }
    assert_eq!(enumerate_counts(3, 6), brute_simplex_counts(3, 6));
}

#[test]
fn weights_sum_to_one() {
    for bucket in [1.0, 0.5, 0.25, 0.2, 0.1, 0.05] {
        for w in enumerate_simplex(4, bucket).unwrap() {
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(w.iter().all(|x| *x >= 0.0));
        }
    }
    assert!(enumerate_simplex(3, 0.07).is_err());
    assert!(enumerate_simplex(3, 0.0).is_err());
    assert!(enumerate_simplex(0, 0.05).is_err());
}

fn instance(seed: u64, k: usize, n: usize) -> (Vec<VideoId>, Vec<PredictionTable>, Vec<f64>) {
    let mut r = rng(seed);
    let v = ids(n);
    let truth: Vec<f64> = (0..n).map(|_| r.random()).collect();
    let tables = (0..k)
        .map(|m| {
            let s: Vec<f64> = truth.iter().map(|t| t * r.random::<f64>() + 0.3 * r.random::<f64>()).collect();
            table(&format!("m{m}"), &v, &s)
        })
        .collect();
    (v, tables, truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_beats_every_candidate(seed in any::<u64>(), k in 1..4usize) {
        let (v, tables, truth) = instance(seed, k, 30);
        let best = grid_search(&tables, &labels(&v, &truth), 0.1).unwrap();
        let best_oracle = brute_srcc(
            &v.iter().map(|id| tables.iter().zip(&best.weights).map(|(t, w)| w * t.scores[id]).sum()).collect::<Vec<f64>>(),
            &truth,
        );
        prop_assert!((best.validation_srcc - best_oracle).abs() <= 1e-12);
        for w in enumerate_simplex(k, 0.1).unwrap() {
            let combined: Vec<f64> = v.iter().map(|id| tables.iter().zip(&w).map(|(t, x)| x * t.scores[id]).sum()).collect();
            let s = brute_srcc(&combined, &truth);
            if s.is_finite() {
                prop_assert!(best.validation_srcc >= s - 1e-12);
            }
        }
    }

    #[test]
    fn monotone_relabelling_keeps_the_choice(seed in any::<u64>(), k in 2..4usize) {
        let (v, tables, truth) = instance(seed, k, 40);
        let a = grid_search(&tables, &labels(&v, &truth), 0.05).unwrap();
        let squashed: Vec<f64> = truth.iter().map(|t| t * t * t).collect();
        let b = grid_search(&tables, &labels(&v, &squashed), 0.05).unwrap();
        prop_assert_eq!(a.weights, b.weights);
    }
}

#[test]
fn equal_mixture_is_found_within_a_bucket() {
    let mut r = rng(21);
    let v = ids(200);
    let a: Vec<f64> = (0..200).map(|_| r.random()).collect();
    let b: Vec<f64> = (0..200).map(|_| r.random()).collect();
    let c: Vec<f64> = (0..200).map(|_| r.random()).collect();
    let d: Vec<f64> = (0..200).map(|_| r.random()).collect();
    let truth: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
    let tables = [table("A", &v, &a), table("B", &v, &b), table("C", &v, &c), table("D", &v, &d)];
    let w = grid_search(&tables, &labels(&v, &truth), 0.05).unwrap();
    let expected = [0.5, 0.5, 0.0, 0.0];
    for (got, want) in w.weights.iter().zip(expected) {
        assert!((got - want).abs() <= 0.05 + 1e-12, "{:?}", w.weights);
    }
    assert_eq!(w.model_names, ["A", "B", "C", "D"]);
}

#[test]
fn single_model_gets_all_the_weight() {
    let (v, tables, truth) = instance(3, 1, 25);
    let w = grid_search(&tables, &labels(&v, &truth), 0.05).unwrap();
    assert_eq!(w.weights, vec![1.0]);
    assert!((w.validation_srcc - brute_srcc(&v.iter().map(|i| tables[0].scores[i]).collect::<Vec<_>>(), &truth)).abs() <= 1e-12);
}

#[test]
fn constant_candidates_are_skipped() {
    let v = ids(5);
    let truth = [0.1, 0.2, 0.3, 0.4, 0.5];
    let flat = table("flat", &v, &[0.5; 5]);
    let good = table("good", &v, &truth);
    let w = grid_search(&[flat.clone(), good], &labels(&v, &truth), 0.5).unwrap();
    assert_eq!(w.weights, vec![0.0, 1.0]);
    assert_eq!(w.skipped_candidates, 1);
    assert_eq!(
        grid_search(&[flat], &labels(&v, &truth), 0.5),
        Err(EnsembleError::AllCandidatesUndefined)
    );
}

#[test]
fn applying_weights_marks_fallbacks_with_weight() {
    let v = ids(3);
    let mut a = table("A", &v, &[0.1, 0.2, 0.3]);
    let mut b = table("B", &v, &[0.3, 0.2, 0.1]);
    a.coverage.insert(v[0].clone(), Coverage::Fallback);
    b.coverage.insert(v[1].clone(), Coverage::Fallback);
    let w = EnsembleWeights {
        model_names: vec!["A".into(), "B".into()],
        weights: vec![1.0, 0.0],
        bucket: 0.5,
        validation_srcc: 1.0,
        skipped_candidates: 0,
    };
    let out = apply_weights(&w, &[a.clone(), b.clone()]).unwrap();
    assert_eq!(out.coverage[&v[0]], Coverage::Fallback);
    assert_eq!(out.coverage[&v[1]], Coverage::Direct);
    assert_eq!(out.scores[&v[2]], 0.3);
    assert!(apply_weights(&w, &[b, a]).is_err());
}

#[test]
fn missing_predictions_are_reported() {
    let v = ids(4);
    let t = table("A", &v[..3], &[0.1, 0.2, 0.3]);
    assert!(matches!(
        grid_search(&[t], &labels(&v, &[0.1, 0.2, 0.3, 0.4]), 0.5),
        Err(EnsembleError::MissingVideo { .. })
    ));
}
