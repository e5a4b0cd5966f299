mod common;

use proptest::prelude::*;

use common::{brute_ranks, brute_srcc};
use memorability::metrics::{average_ranks, spearman, MetricError};

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..120usize).prop_flat_map(|n| {
        let v = prop::collection::vec(prop_oneof![(-4i32..4).prop_map(f64::from), -1e3..1e3f64], n);
        (v.clone(), v)
    })
}

fn defined(a: &[f64], b: &[f64]) -> bool {
    a.iter().any(|x| *x != a[0]) && b.iter().any(|x| *x != b[0])
}

proptest! {
    #[test]
    fn agrees_with_brute_force((a, b) in paired()) {
        prop_assume!(defined(&a, &b));
        prop_assert!((spearman(&a, &b).unwrap() - brute_srcc(&a, &b)).abs() <= 1e-12);
        prop_assert_eq!(average_ranks(&a), brute_ranks(&a));
    }

    #[test]
    fn symmetric_exactly((a, b) in paired()) {
        prop_assume!(defined(&a, &b));
        prop_assert_eq!(spearman(&a, &b).unwrap().to_bits(), spearman(&b, &a).unwrap().to_bits());
    }

    #[test]
    fn increasing_transforms_do_not_matter((a, b) in paired(), shift in -10.0..10.0f64, scale in 0.01..10.0f64) {
        prop_assume!(defined(&a, &b));
        let base = spearman(&a, &b).unwrap();
        let affine: Vec<f64> = a.iter().map(|x| x * scale + shift).collect();
        let cubed: Vec<f64> = b.iter().map(|x| x.powi(3) + x).collect();
        prop_assert!((spearman(&affine, &b).unwrap() - base).abs() <= 1e-12);
        prop_assert!((spearman(&a, &cubed).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn bounded((a, b) in paired()) {
        prop_assume!(defined(&a, &b));
        let s = spearman(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }
}

#[test]
fn perfect_orders() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Ok(-1.0));
    assert_eq!(spearman(&[0.1, 0.5, 0.9, 1.0], &[2.0, 3.0, 7.0, 9.0]), Ok(1.0));
}

#[test]
fn ties_share_the_average_rank() {
    assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
    assert_eq!(average_ranks(&[0.0, -0.0]), vec![1.5, 1.5]);
}

#[test]
fn undefined_inputs_are_errors() {
    assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(MetricError::Constant(_))));
    assert!(matches!(spearman(&[1.0, 2.0], &[3.0, 3.0]), Err(MetricError::Constant(_))));
    assert!(spearman(&[1.0], &[1.0]).is_err());
    assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    assert!(spearman(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
}
