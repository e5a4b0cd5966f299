mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{gaussian_matrix, gru_forward_oracle, rng};
use memorability::corpus::{VideoId, WordVectorTable};
use memorability::textmodel::*;

fn model(seed: u64, widths: Vec<usize>) -> GruRegressor {
    GruRegressor::new(5, 4, widths, 0.0, 0.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_matches_the_reference(seed in any::<u64>(), len in 1..8usize) {
        let m = model(seed, vec![3, 2, 2, 1]);
        let x = gaussian_matrix(&mut rng(seed ^ 7), len, 5);
        let got = m.predict(&TokenSequence::from_vectors(x.clone())).unwrap();
        prop_assert!((got - gru_forward_oracle(&m, &x)).abs() <= 1e-12);
    }

    #[test]
    fn squared_error_gradients_match_finite_differences(seed in 0..200u64) {
        let m = model(seed, vec![3, 2, 2, 1]);
        let seq = TokenSequence::from_vectors(gaussian_matrix(&mut rng(seed + 1000), 3, 5));
        let target = 0.7;
        let (out, cache) = gru_forward(&m, &seq, Mode::Eval, &mut rng(0)).unwrap();
        let grads = m.backward(&cache, 2.0 * (out - target));
        let h = 1e-5;
        for b in 0..grads.buffers().len() {
            for i in 0..grads.buffers()[b].len() {
                let loss = |delta: f64| {
                    let mut p = m.clone();
                    p.params.buffers_mut()[b][i] += delta;
                    (p.predict(&seq).unwrap() - target).powi(2)
                };
                let numeric = (loss(h) - loss(-h)) / (2.0 * h);
                let a = grads.buffers()[b][i];
                // ReLU kinks make a two-sided difference meaningless right at zero.
                if !far_from_kinks(&m, &seq, b, i, h) {
                    continue;
                }
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
                prop_assert!(rel <= 1e-4, "buffer {} index {}: {} vs {}", b, i, a, numeric);
            }
        }
    }
}

/// True when perturbing the parameter by `h` either way leaves every ReLU
/// on the same side of zero.
fn far_from_kinks(m: &GruRegressor, seq: &TokenSequence, b: usize, i: usize, h: f64) -> bool {
    let signs = |delta: f64| {
        let mut p = m.clone();
        p.params.buffers_mut()[b][i] += delta;
        let mut v = {
            let (_, c) = gru_forward(&p, seq, Mode::Eval, &mut rng(0)).unwrap();
            c.last_hidden
        };
        let mut out = Vec::new();
        for layer in &p.params.dense[..p.params.dense.len() - 1] {
            let pre: Vec<f64> = (0..layer.w.rows)
                .map(|r| layer.w.row(r).iter().zip(&v).map(|(a, x)| a * x).sum::<f64>() + layer.b[r])
                .collect();
            out.extend(pre.iter().map(|x| *x > 0.0));
            v = pre.iter().map(|x| x.max(0.0)).collect();
        }
        out
    };
    signs(h) == signs(-h)
}

#[test]
fn inverted_dropout_keeps_the_expectation() {
    let mut r = rng(11);
    let activations: Vec<f64> = (0..16).map(|_| r.random_range(0.1..1.0)).collect();
    let draws = 100_000;
    let mut sums = vec![0.0; activations.len()];
    for _ in 0..draws {
        let mask = dropout_mask(activations.len(), 0.8, &mut r);
        assert!(mask.iter().all(|m| *m == 0.0 || (*m - 5.0).abs() < 1e-12));
        for (s, (a, m)) in sums.iter_mut().zip(activations.iter().zip(&mask)) {
            *s += a * m;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / draws as f64).collect();
    let overall = means.iter().sum::<f64>() / activations.iter().sum::<f64>();
    assert!((overall - 1.0).abs() <= 0.01, "overall ratio {overall}");
    for (m, a) in means.iter().zip(&activations) {
        // Five standard errors of a single unit at rate 0.8.
        assert!((m / a - 1.0).abs() <= 0.035, "{m} vs {a}");
    }
}

#[test]
fn eval_mode_ignores_the_rng() {
    let m = GruRegressor::new(5, 6, vec![4, 1], 0.5, 0.25, 3).unwrap();
    let seq = TokenSequence::from_vectors(gaussian_matrix(&mut rng(1), 4, 5));
    let a = gru_forward(&m, &seq, Mode::Eval, &mut rng(1)).unwrap().0;
    let b = gru_forward(&m, &seq, Mode::Eval, &mut rng(2)).unwrap().0;
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(a.to_bits(), m.predict(&seq).unwrap().to_bits());
}

fn samples(n: usize) -> Vec<TextSample> {
    let mut r = rng(5);
    (0..n)
        .map(|i| {
            let x = gaussian_matrix(&mut r, 1 + i % 3, 5);
            let label = (x[0][0].tanh() + 1.0) / 2.0;
            TextSample {
                video: VideoId::new(format!("v{}", i / 2)).unwrap(),
                sequence: TokenSequence::from_vectors(x),
                label,
            }
        })
        .collect()
}

fn trained(seed: u64) -> GruRegressor {
    let mut m = GruRegressor::new(5, 8, vec![4, 1], 0.2, 0.1, seed).unwrap();
    m.train_config.max_epochs = 20;
    m.train_config.batch_size = 16;
    gru_train(m, &samples(80)).unwrap()
}

#[test]
fn training_is_bit_deterministic_per_seed() {
    let (a, b) = (trained(4), trained(4));
    assert_eq!(a.training_log, b.training_log);
    for (x, y) in a.params.buffers().iter().zip(b.params.buffers()) {
        assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    assert_ne!(trained(5).params, a.params);
}

#[test]
fn training_reduces_the_loss_and_restores_the_best_epoch() {
    let m = trained(6);
    let log = m.training_log.as_ref().unwrap();
    let first = log.epochs.first().unwrap().train_loss;
    let best = log.epochs.iter().find(|e| e.epoch == log.best_epoch).unwrap();
    assert!(best.train_loss < first);
    let best_valid = best.validation_loss.unwrap();
    assert!(log.epochs.iter().all(|e| e.validation_loss.unwrap() >= best_valid));
    assert!(m.params.is_finite());
}

#[test]
fn artifact_round_trip_predicts_identically() {
    let m = trained(7);
    let back: GruRegressor = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    for s in samples(10) {
        assert_eq!(back.predict(&s.sequence).unwrap().to_bits(), m.predict(&s.sequence).unwrap().to_bits());
    }
}

#[test]
fn unknown_tokens_are_zero_and_counted() {
    let mut table = WordVectorTable::new(3).unwrap();
    table.insert("dog", vec![1.0, 2.0, 3.0]).unwrap();
    let tokens = tokenize("A dog, a DOG!").unwrap();
    assert_eq!(tokens, ["a", "dog", "a", "dog"]);
    let seq = embed(&tokens, &table);
    assert_eq!(seq.oov, 2);
    assert_eq!(seq.vectors[0], vec![0.0; 3]);
    assert_eq!(seq.vectors[1], vec![1.0, 2.0, 3.0]);
    assert!(tokenize("  ").is_err());
    assert!(tokenize("?!").is_err());
}

#[test]
fn bag_of_words_counts_training_vocabulary_only() {
    let v = BowVectorizer::fit(["the cat sat", "the dog"]).unwrap();
    assert_eq!(v.vocabulary().keys().collect::<Vec<_>>(), ["cat", "dog", "sat", "the"]);
    assert_eq!(v.transform("The the bird").unwrap(), vec![0.0, 0.0, 0.0, 2.0]);
}
