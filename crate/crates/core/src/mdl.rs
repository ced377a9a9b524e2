//! Description-length arithmetic. Every quantity is in bits.

use alloc::collections::BTreeMap;

use crate::store::Timestamp;
use crate::{CoreError, FxHashMap, Result};

const EXACT_SUM_LIMIT: u64 = 4096;

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

/// `x log2 x`, with `0 log 0 = 0`.
#[inline]
pub fn nlog2n(x: u64) -> f64 {
    if x <= 1 {
        0.0
    } else {
        let x = x as f64;
        x * log2(x)
    }
}

/// `log2 C(n, k)`. Sums logs for small `min(k, n-k)`, falls back to
/// `lgamma` beyond that.
pub fn log2_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(CoreError::InvalidBinomial { n, k });
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if k <= EXACT_SUM_LIMIT {
        let mut acc = 0.0;
        for i in 0..k {
            acc += log2((n - i) as f64) - log2((i + 1) as f64);
        }
        return Ok(acc);
    }
    let ln = libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    Ok(ln / core::f64::consts::LN_2)
}

/// `log2 C(n, k) - log2 C(n - a, k - a)`: what `a` more explained facts save
/// at one timestamp. Exact for any size since it only touches `a` terms.
pub fn log2_binomial_drop(n: u64, k: u64, a: u64) -> f64 {
    debug_assert!(a <= k && k <= n);
    let mut acc = 0.0;
    for i in 0..a {
        acc += log2((n - i) as f64) - log2((k - i) as f64);
    }
    acc
}

/// First two terms of the model cost: the upper bound on candidate atomic
/// rules and the choice of three of them per edge.
pub fn header_bits(num_categories: u64, num_relations: u64) -> f64 {
    let bound = 2 * num_categories * num_categories * num_relations;
    if bound == 0 {
        return 0.0;
    }
    log2(bound as f64) + log2_binomial(bound, 3.min(bound)).unwrap_or(0.0)
}

/// Counts an atomic rule's cost is computed from.
#[derive(Clone, Copy, Debug)]
pub struct RuleCounts {
    pub num_categories: u64,
    pub num_entities: u64,
    pub subject_category: u64,
    pub object_category: u64,
    /// `(n^r, |F|)`; `Some` switches the relation term on.
    pub relation: Option<(u64, u64)>,
}

/// `L(v)`.
pub fn rule_bits(c: RuleCounts) -> Result<f64> {
    if c.subject_category == 0 || c.object_category == 0 || c.num_entities == 0 {
        return Err(CoreError::Config("atomic rule references a category with no entities".into()));
    }
    let e = c.num_entities as f64;
    let mut bits = log2(c.num_categories.max(1) as f64) - log2(c.subject_category as f64 / e) - log2(c.object_category as f64 / e);
    if let Some((nr, nf)) = c.relation {
        bits += -log2(nr as f64 / nf as f64) + 1.0;
    }
    Ok(bits)
}

/// `L(e)` for one edge given the edge count and how often each of its nodes
/// occurs across all edges.
pub fn edge_bits(num_edges: u64, slot_counts: &[u64]) -> f64 {
    let total = num_edges as f64;
    let mut bits = log2(total) + 1.0;
    for &n in slot_counts {
        bits -= log2(n as f64 / total);
    }
    bits
}

/// Prefix-code cost of one slot over `total` assertions:
/// `Σ_a −log2(n_a / total) = total·log2 total − Σ n log2 n`.
pub fn slot_bits<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let mut s = nlog2n(total);
    for n in counts {
        s -= nlog2n(n);
    }
    s.max(0.0)
}

/// Edge multiset statistics; `Σ_e L(e)` in O(1).
///
/// With `S` total slots and `n_v` the occurrences of node `v`,
/// `Σ_e L(e) = |E| log|E| + S log|E| − Σ_v n_v log n_v + |E|`.
#[derive(Clone, Debug)]
pub struct EdgeCodebook<K = u32> {
    edges: u64,
    slots: u64,
    occurrences: FxHashMap<K, u64>,
    sum_nlogn: f64,
}

impl<K> Default for EdgeCodebook<K> {
    fn default() -> Self {
        EdgeCodebook { edges: 0, slots: 0, occurrences: FxHashMap::default(), sum_nlogn: 0.0 }
    }
}

impl<K: core::hash::Hash + Eq + Copy> EdgeCodebook<K> {
    pub fn num_edges(&self) -> u64 {
        self.edges
    }

    pub fn occurrences(&self, node: K) -> u64 {
        self.occurrences.get(&node).copied().unwrap_or(0)
    }

    pub fn total_bits(&self) -> f64 {
        Self::bits_for(self.edges, self.slots, self.sum_nlogn)
    }

    fn bits_for(edges: u64, slots: u64, sum_nlogn: f64) -> f64 {
        if edges == 0 {
            return 0.0;
        }
        let le = log2(edges as f64);
        edges as f64 * le + slots as f64 * le - sum_nlogn + edges as f64
    }

    fn shifted(&self, nodes: &[K]) -> (u64, f64) {
        let mut sum = self.sum_nlogn;
        let mut local: alloc::vec::Vec<(K, u64)> = alloc::vec::Vec::with_capacity(3);
        for &v in nodes {
            match local.iter_mut().find(|(n, _)| *n == v) {
                Some(slot) => slot.1 += 1,
                None => local.push((v, 1)),
            }
        }
        for &(v, add) in &local {
            let before = self.occurrences(v);
            sum += nlog2n(before + add) - nlog2n(before);
        }
        (self.slots + nodes.len() as u64, sum)
    }

    /// Increase of `Σ_e L(e)` if an edge over `nodes` were added.
    pub fn delta_bits(&self, nodes: &[K]) -> f64 {
        let (slots, sum) = self.shifted(nodes);
        Self::bits_for(self.edges + 1, slots, sum) - self.total_bits()
    }

    pub fn add(&mut self, nodes: &[K]) {
        let (slots, sum) = self.shifted(nodes);
        self.edges += 1;
        self.slots = slots;
        self.sum_nlogn = sum;
        for &v in nodes {
            *self.occurrences.entry(v).or_insert(0) += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bucket {
    pub total: u64,
    pub explained: u64,
}

/// `Σ_t logC(U − |A_t^m|, |A_t^-|)` with per-timestamp counters.
#[derive(Clone, Debug, Default)]
pub struct NegativeTerm {
    universe: u64,
    buckets: BTreeMap<Timestamp, Bucket>,
    bits: f64,
}

impl NegativeTerm {
    pub fn new(universe: u64) -> Self {
        NegativeTerm { universe, ..Default::default() }
    }

    /// Restores a term exactly, running sum included.
    pub fn from_parts(universe: u64, buckets: BTreeMap<Timestamp, Bucket>, bits: f64) -> Self {
        NegativeTerm { universe, buckets, bits }
    }

    pub fn universe(&self) -> u64 {
        self.universe
    }

    /// The running sum as kept, before clamping at zero.
    pub fn raw_bits(&self) -> f64 {
        self.bits
    }

    fn term(&self, b: Bucket) -> Result<f64> {
        let unexplained = b.total.checked_sub(b.explained).ok_or(CoreError::Config("more explained facts than facts".into()))?;
        let n = self.universe.checked_sub(b.explained).ok_or(CoreError::InvalidBinomial { n: 0, k: unexplained })?;
        log2_binomial(n, unexplained)
    }

    /// Registers an unexplained fact at `t`.
    pub fn add_fact(&mut self, t: Timestamp) -> Result<()> {
        let b = self.buckets.get(&t).copied().unwrap_or_default();
        let before = self.term(b)?;
        let after = Bucket { total: b.total + 1, ..b };
        self.bits += self.term(after)? - before;
        self.buckets.insert(t, after);
        Ok(())
    }

    /// Marks `count` already registered facts at `t` as explained.
    pub fn explain(&mut self, t: Timestamp, count: u64) {
        let b = self.buckets.get_mut(&t).expect("timestamp registered");
        debug_assert!(b.explained + count <= b.total);
        let n = self.universe - b.explained;
        let k = b.total - b.explained;
        self.bits -= log2_binomial_drop(n, k, count);
        b.explained += count;
    }

    /// Reduction in bits if `counts[t]` more facts were explained.
    pub fn gain<'a, I: IntoIterator<Item = (&'a Timestamp, &'a u64)>>(&self, counts: I) -> f64 {
        let mut g = 0.0;
        for (t, &a) in counts {
            if a == 0 {
                continue;
            }
            let b = self.buckets[t];
            g += log2_binomial_drop(self.universe - b.explained, b.total - b.explained, a);
        }
        g
    }

    pub fn bits(&self) -> f64 {
        self.bits.max(0.0)
    }

    /// Recomputes from the counters, ignoring the running sum.
    pub fn recompute(&self) -> f64 {
        self.buckets.values().map(|&b| self.term(b).unwrap_or(f64::INFINITY)).sum()
    }

    pub fn bucket(&self, t: Timestamp) -> Bucket {
        self.buckets.get(&t).copied().unwrap_or_default()
    }

    pub fn buckets(&self) -> &BTreeMap<Timestamp, Bucket> {
        &self.buckets
    }

    pub fn explained(&self) -> u64 {
        self.buckets.values().map(|b| b.explained).sum()
    }

    pub fn total(&self) -> u64 {
        self.buckets.values().map(|b| b.total).sum()
    }
}

/// Bit breakdown of a summary.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostReport {
    /// Header plus `Σ L(v)` plus `Σ L(e)`.
    pub model: f64,
    pub assertions: f64,
    /// Facts not mapped to any static rule.
    pub unmapped: f64,
    /// Facts that are not both mapped and associated.
    pub negative: f64,
    /// `Σ L(v)` with the relation term switched on, for reporting.
    pub model_with_relations: f64,
}

impl CostReport {
    pub fn total(&self) -> f64 {
        self.model + self.assertions + self.unmapped + self.negative
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        libm::fabs(a - b) <= 1e-9 * libm::fabs(b).max(1.0)
    }

    #[test]
    fn binomials() {
        assert_eq!(log2_binomial(4, 0).unwrap(), 0.0);
        assert!(close(log2_binomial(4, 2).unwrap(), log2(6.0)));
        assert!(close(log2_binomial(10, 3).unwrap(), log2(120.0)));
        assert!(log2_binomial(3, 4).is_err());
    }

    #[test]
    fn lgamma_branch_agrees_with_sum() {
        let n = 1_000_000u64;
        let k = EXACT_SUM_LIMIT + 10;
        let mut exact = 0.0;
        for i in 0..k {
            exact += log2((n - i) as f64) - log2((i + 1) as f64);
        }
        let approx = log2_binomial(n, k).unwrap();
        assert!(libm::fabs(approx - exact) / exact < 1e-9, "{approx} vs {exact}");
    }

    #[test]
    fn drop_matches_difference() {
        for (n, k, a) in [(100u64, 10u64, 3u64), (5, 5, 5), (1_000_000, 20, 1)] {
            let d = log2_binomial(n, k).unwrap() - log2_binomial(n - a, k - a).unwrap();
            assert!(close(log2_binomial_drop(n, k, a), d));
        }
    }

    #[test]
    fn header_of_tiny_model() {
        // |C| = 2, |R| = 1: bound 8
        assert!(close(header_bits(2, 1), 3.0 + log2(56.0)));
    }

    #[test]
    fn rule_cost_halves() {
        let c = RuleCounts { num_categories: 4, num_entities: 10, subject_category: 5, object_category: 5, relation: None };
        assert!(close(rule_bits(c).unwrap(), 4.0));
        let full = RuleCounts { subject_category: 10, ..c };
        assert!(close(rule_bits(full).unwrap(), 3.0));
        assert!(rule_bits(RuleCounts { subject_category: 0, ..c }).is_err());
    }

    #[test]
    fn edge_costs() {
        assert!(close(edge_bits(1, &[1, 1]), 1.0));
        assert!(close(edge_bits(4, &[2, 2]), 5.0));
        assert!(close(edge_bits(4, &[2, 2, 2]), 6.0));
    }

    #[test]
    fn codebook_sum_matches_per_edge() {
        let edges: [&[u32]; 4] = [&[0, 1], &[1, 2], &[0, 1, 2], &[2, 2]];
        let mut book: EdgeCodebook = EdgeCodebook::default();
        for e in edges {
            let before = book.total_bits();
            let d = book.delta_bits(e);
            book.add(e);
            assert!(close(book.total_bits() - before, d));
        }
        let mut occ = [0u64; 3];
        for e in edges {
            for &v in e {
                occ[v as usize] += 1;
            }
        }
        let direct: f64 = edges.iter().map(|e| edge_bits(4, &e.iter().map(|&v| occ[v as usize]).collect::<alloc::vec::Vec<_>>())).sum();
        assert!(close(book.total_bits(), direct));
    }

    #[test]
    fn slot_bits_shared_subject() {
        // two assertions, same subject, distinct objects: 0 + 2
        assert!(close(slot_bits([2], 2) + slot_bits([1, 1], 2), 2.0));
    }

    #[test]
    fn negative_term_counts() {
        let mut n = NegativeTerm::new(4);
        n.add_fact(0).unwrap();
        n.add_fact(0).unwrap();
        n.explain(0, 1);
        assert!(close(n.bits(), log2(3.0)));
        assert!(close(n.recompute(), n.bits()));
        n.explain(0, 1);
        assert!(close(n.bits(), 0.0));
    }
}
