//! Metrics against a from-scratch reference.

use anot_core::eval::{best_threshold, f_beta, pr_auc, precision_recall};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Counts from scratch for `score >= tau`.
pub fn at_or_above(scores: &[f64], pos: &[bool], tau: f64) -> (usize, usize) {
    let mut tp = 0;
    let mut pp = 0;
    for i in 0..scores.len() {
        if scores[i] >= tau {
            pp += 1;
            if pos[i] {
                tp += 1;
            }
        }
    }
    (tp, pp)
}

pub fn distinct_desc(scores: &[f64]) -> Vec<f64> {
    let mut d = scores.to_vec();
    d.sort_by(|a, b| b.partial_cmp(a).unwrap());
    d.dedup();
    d
}

pub fn naive_auc(scores: &[f64], pos: &[bool]) -> Option<f64> {
    let total = pos.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    let mut pts = Vec::new();
    for tau in distinct_desc(scores) {
        let (tp, pp) = at_or_above(scores, pos, tau);
        pts.push((tp as f64 / total as f64, tp as f64 / pp as f64));
    }
    let mut area = 0.0;
    let mut last = (0.0, pts[0].1);
    for p in pts {
        area += (p.0 - last.0) * (p.1 + last.1) / 2.0;
        last = p;
    }
    Some(area)
}

pub fn naive_f(p: f64, r: f64, beta: f64) -> f64 {
    if p + r == 0.0 {
        return 0.0;
    }
    (1.0 + beta * beta) * p * r / (beta * beta * p + r)
}

/// Best F over every cut between distinct scores and the cut below all.
pub fn naive_best(scores: &[f64], pos: &[bool], beta: f64) -> Option<f64> {
    let total = pos.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    distinct_desc(scores)
        .into_iter()
        .map(|tau| {
            let (tp, pp) = at_or_above(scores, pos, tau);
            naive_f(tp as f64 / pp as f64, tp as f64 / total as f64, beta)
        })
        .reduce(f64::max)
}

pub fn vectors(seed: u64, n: usize, levels: u32, rate: f64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let p = rng.gen_bool(rate);
        // coarse levels force ties, a positive shift makes the ranking informative
        let shift = if p { 0.3 } else { 0.0 };
        let v = if levels == 0 { rng.gen::<f64>() + shift } else { (rng.gen_range(0..levels) as f64 + shift * levels as f64).floor() };
        s.push(v);
        y.push(p);
    }
    (s, y)
}

/// The hand-worked operating point.
pub fn hand_case() -> String {
    let f = f_beta(0.8, 0.5, 0.5);
    assert!(close(f, 0.5 / 0.7), "{f}");
    assert!(close(f, 0.714_285_714_285_714_3));
    format!("F(0.8, 0.5, 0.5) = {f:.15}")
}

pub fn random_vectors_match_naive_reference() -> String {
    let cases = [(1, 10_000, 0, 0.15), (2, 10_000, 50, 0.15), (3, 10_000, 4, 0.5), (4, 3_000, 1000, 0.02), (5, 10, 3, 0.3)];
    let mut worst: f64 = 0.0;
    for &(seed, n, levels, rate) in &cases {
        let (s, y) = vectors(seed, n, levels, rate);
        let got = pr_auc(&s, &y).unwrap();
        let want = naive_auc(&s, &y).unwrap();
        worst = worst.max((got - want).abs());
        assert!(close(got, want), "seed {seed}: auc {got} vs {want}");

        let op = best_threshold(&s, &y, 0.5).unwrap();
        let want = naive_best(&s, &y, 0.5).unwrap();
        worst = worst.max((op.f_beta - want).abs());
        assert!(close(op.f_beta, want), "seed {seed}: best F {} vs {want}", op.f_beta);
        // the chosen threshold reproduces its own operating point
        let (p, r) = precision_recall(&s, &y, op.threshold);
        assert!(close(p.unwrap(), op.precision) && close(r.unwrap(), op.recall));
        assert!(close(naive_f(op.precision, op.recall, 0.5), op.f_beta));

        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let tau = s[rng.gen_range(0..n)] - 0.5;
            let (tp, pp) = at_or_above(&s, &y, tau + 1e-9);
            let total = y.iter().filter(|&&p| p).count();
            let (p, r) = precision_recall(&s, &y, tau);
            assert!(close(p.unwrap(), tp as f64 / pp as f64));
            assert!(close(r.unwrap(), tp as f64 / total as f64));
            let beta = rng.gen_range(0.1..3.0);
            assert!(close(f_beta(p.unwrap(), r.unwrap(), beta), naive_f(p.unwrap(), r.unwrap(), beta)));
        }
    }
    format!("{} score vectors, largest gap {worst:e}", cases.len())
}
