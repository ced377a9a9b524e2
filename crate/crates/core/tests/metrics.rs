mod common;

use anot_core::eval::{best_threshold, pr_auc};
use common::metrics::{close, vectors};

#[test]
fn hand_case() {
    common::metrics::hand_case();
}

#[test]
fn constant_scores_give_positive_rate() {
    let (_, y) = vectors(5, 1000, 3, 0.2);
    let s = vec![1.0; y.len()];
    let rate = y.iter().filter(|&&p| p).count() as f64 / y.len() as f64;
    assert!(close(pr_auc(&s, &y).unwrap(), rate));
}

#[test]
fn perfect_ranking_gives_one() {
    let y: Vec<bool> = (0..500).map(|i| i % 7 == 0).collect();
    let s: Vec<f64> = y.iter().enumerate().map(|(i, &p)| if p { 10.0 + i as f64 } else { i as f64 / 1000.0 }).collect();
    assert!(close(pr_auc(&s, &y).unwrap(), 1.0));
}

#[test]
fn no_positives_is_undefined() {
    assert_eq!(pr_auc(&[1.0, 2.0], &[false, false]), None);
    assert_eq!(best_threshold(&[1.0, 2.0], &[false, false], 0.5), None);
}

#[test]
fn random_vectors_match_naive_reference() {
    common::metrics::random_vectors_match_naive_reference();
}
