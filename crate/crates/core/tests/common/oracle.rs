//! Candidate generation and description lengths against brute force.
//!
//! Every quantity here is recomputed from the definitions with plain loops
//! over all facts, categories and fact pairs, then compared with what the
//! library produces.

use std::collections::{BTreeMap, BTreeSet};

use anot_core::category::CategoryFunction;
use anot_core::rules::{edge_candidates, rule_candidates, EdgeKey, EdgeParams, RuleKey};
use anot_core::store::{Fact, FactId, Projection, TkgStore};
use anot_core::summarize::build;
use anot_core::BuildConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INSTANCES: u64 = 100;

pub fn random_store(seed: u64) -> TkgStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne = rng.gen_range(2..=10);
    let nr = rng.gen_range(1..=5);
    let nt = rng.gen_range(1..=10);
    let n = rng.gen_range(1..=40);
    let mut s = TkgStore::new();
    for _ in 0..n {
        let a = rng.gen_range(0..ne);
        let mut b = rng.gen_range(0..ne);
        if rng.gen_bool(0.9) && a == b {
            b = (a + 1) % ne;
        }
        let r = rng.gen_range(0..nr);
        let t = rng.gen_range(0..nt);
        s.insert_labeled(&format!("e{a}"), &format!("r{r}"), &format!("e{b}"), t);
    }
    s
}

fn facts(s: &TkgStore) -> Vec<(FactId, Fact)> {
    s.facts().collect()
}

fn has(cat: &CategoryFunction, e: u32, c: u32) -> bool {
    cat.categories_of(e).contains(&c)
}

fn all_categories(cat: &CategoryFunction) -> Vec<u32> {
    (0..cat.len() as u32).collect()
}

fn log2(x: f64) -> f64 {
    x.log2()
}

/// `log2 n!` by summation.
fn log2_fact(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).log2()).sum()
}

fn log2_choose(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    log2_fact(n) - log2_fact(k) - log2_fact(n - k)
}

/// `Σ_a −log2(n_a / N)` per slot over a list of assertions.
fn slot_cost<T: Ord + Copy>(slot: &[T]) -> f64 {
    let n = slot.len() as f64;
    let mut counts: BTreeMap<T, u64> = BTreeMap::new();
    for &x in slot {
        *counts.entry(x).or_default() += 1;
    }
    slot.iter().map(|x| -log2(counts[x] as f64 / n)).sum()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Rule key to the facts it maps, by definition.
fn brute_rules(s: &TkgStore, cat: &CategoryFunction) -> BTreeMap<RuleKey, Vec<FactId>> {
    let mut out = BTreeMap::new();
    let relations: BTreeSet<u32> = facts(s).iter().map(|(_, f)| f.relation).collect();
    for &cs in &all_categories(cat) {
        for &r in &relations {
            for &co in &all_categories(cat) {
                let ids: Vec<FactId> =
                    facts(s).into_iter().filter(|(_, f)| f.relation == r && has(cat, f.subject, cs) && has(cat, f.object, co)).map(|(id, _)| id).collect();
                if !ids.is_empty() {
                    out.insert(RuleKey::new(cs, r, co), ids);
                }
            }
        }
    }
    out
}

#[derive(Default, Debug, PartialEq)]
struct EdgeTruth {
    /// (head, middle, tail) fact ids, one per assertion.
    assertions: Vec<(FactId, Option<FactId>, FactId)>,
    head_spans: Vec<u32>,
    middle_spans: Vec<u32>,
}

/// Chain and triadic occurrences straight from the definitions, lifted to
/// every matching category combination.
fn brute_edges(s: &TkgStore, cat: &CategoryFunction, l: u32, max_gap: Option<u32>) -> BTreeMap<EdgeKey, EdgeTruth> {
    let fs = facts(s);
    let mut out: BTreeMap<EdgeKey, EdgeTruth> = BTreeMap::new();
    // chain: S(s, o) ordered by (time, relation, id), every m < n
    let pairs: BTreeSet<(u32, u32)> = fs.iter().map(|(_, f)| (f.subject, f.object)).collect();
    for &(a, b) in &pairs {
        let mut seq: Vec<(FactId, Fact)> = fs.iter().copied().filter(|(_, f)| f.subject == a && f.object == b).collect();
        seq.sort_by_key(|&(id, f)| (f.time, f.relation, id));
        for m in 0..seq.len() {
            for n in m + 1..seq.len() {
                let (hid, h) = seq[m];
                let (tid, t) = seq[n];
                let gap = t.time - h.time;
                if max_gap.is_some_and(|g| gap > g) {
                    continue;
                }
                for &cs in cat.categories_of(a) {
                    for &co in cat.categories_of(b) {
                        let key = EdgeKey { head: RuleKey::new(cs, h.relation, co), middle: None, tail: RuleKey::new(cs, t.relation, co) };
                        let e = out.entry(key).or_default();
                        e.assertions.push((hid, None, tid));
                        e.head_spans.push(gap);
                    }
                }
            }
        }
    }
    // triadic: (s, rm, o) and (h, rn, o) within L, closed by the earliest
    // (s, rp, h) at or after max(t1, t2) + L
    for &(i1, f1) in &fs {
        for &(i2, f2) in &fs {
            if i1 == i2 || f1.object != f2.object || f1.subject == f2.subject || f1.time.abs_diff(f2.time) > l {
                continue;
            }
            let (sx, hx, o) = (f1.subject, f2.subject, f1.object);
            let t = f1.time.max(f2.time);
            let close = fs
                .iter()
                .filter(|(g, f)| *g != i1 && *g != i2 && f.subject == sx && f.object == hx && f.time >= t + l)
                .min_by_key(|(g, f)| (f.time, f.relation, *g));
            let Some(&(ic, fc)) = close else { continue };
            for &cs in cat.categories_of(sx) {
                for &co in cat.categories_of(o) {
                    for &ch in cat.categories_of(hx) {
                        let key = EdgeKey {
                            head: RuleKey::new(cs, f1.relation, co),
                            middle: Some(RuleKey::new(ch, f2.relation, co)),
                            tail: RuleKey::new(cs, fc.relation, ch),
                        };
                        let e = out.entry(key).or_default();
                        e.assertions.push((i1, Some(i2), ic));
                        e.head_spans.push(fc.time - f1.time);
                        e.middle_spans.push(fc.time - f2.time);
                    }
                }
            }
        }
    }
    for e in out.values_mut() {
        e.head_spans.sort_unstable();
        e.middle_spans.sort_unstable();
    }
    out
}

fn edge_assertion_cost(e: &EdgeTruth) -> f64 {
    let heads: Vec<FactId> = e.assertions.iter().map(|a| a.0).collect();
    let tails: Vec<FactId> = e.assertions.iter().map(|a| a.2).collect();
    let mut bits = slot_cost(&heads) + slot_cost(&tails);
    let middles: Vec<FactId> = e.assertions.iter().filter_map(|a| a.1).collect();
    if !middles.is_empty() {
        bits += slot_cost(&middles);
    }
    bits
}

fn rule_assertion_cost(s: &TkgStore, ids: &[FactId]) -> f64 {
    let subjects: Vec<u32> = ids.iter().map(|&i| s.fact(i).subject).collect();
    let objects: Vec<u32> = ids.iter().map(|&i| s.fact(i).object).collect();
    slot_cost(&subjects) + slot_cost(&objects)
}

/// Criterion: candidates equal the brute-force sets on 100 random
/// instances, each under 5 s.
pub fn candidates_match_brute_force() -> String {
    let (mut with_triadic, mut with_chain) = (0, 0);
    let mut slowest = 0f64;
    for seed in 0..INSTANCES {
        let started = std::time::Instant::now();
        let s = random_store(seed);
        let cat = CategoryFunction::induce(&s, 3, 3, 2, BuildConfig::default().aggregate(), 2000);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let l = rng.gen_range(1..=4);
        let max_gap = if rng.gen_bool(0.5) { Some(rng.gen_range(0..=5)) } else { None };

        let truth = brute_rules(&s, &cat);
        let got: BTreeMap<RuleKey, (Vec<FactId>, f64)> = rule_candidates(&s, &cat).into_iter().map(|c| (c.key, (c.facts, c.assertion_bits))).collect();
        assert_eq!(got.keys().collect::<Vec<_>>(), truth.keys().collect::<Vec<_>>(), "seed {seed}: rule keys");
        for (k, ids) in &truth {
            assert_eq!(&got[k].0, ids, "seed {seed}: facts of {k:?}");
            assert!(rel_close(got[k].1, rule_assertion_cost(&s, ids), 1e-9), "seed {seed}: L(A_v) of {k:?}");
        }

        let params = EdgeParams { window: l, chain_max_gap: max_gap, projection: Projection::ST_ST, max_edges: usize::MAX };
        let truth = brute_edges(&s, &cat, l, max_gap);
        let got = edge_candidates(&s, &cat, &params);
        with_triadic += got.iter().any(|c| c.key.is_triadic()) as u32;
        with_chain += got.iter().any(|c| !c.key.is_triadic()) as u32;
        let keys: BTreeSet<EdgeKey> = got.iter().map(|c| c.key).collect();
        assert_eq!(keys, truth.keys().copied().collect::<BTreeSet<_>>(), "seed {seed}: edge keys");
        for c in &got {
            let t = &truth[&c.key];
            assert_eq!(c.assertions, t.assertions.len() as u64, "seed {seed}: |A_e| of {:?}", c.key);
            let tails: BTreeSet<FactId> = t.assertions.iter().map(|a| a.2).collect();
            assert_eq!(c.tails, tails.into_iter().collect::<Vec<_>>(), "seed {seed}: tails");
            assert_eq!(c.head_spans, t.head_spans, "seed {seed}: head spans");
            assert_eq!(c.middle_spans, t.middle_spans, "seed {seed}: middle spans");
            assert!(rel_close(c.assertion_bits, edge_assertion_cost(t), 1e-9), "seed {seed}: L(A_e)");
        }
        slowest = slowest.max(started.elapsed().as_secs_f64());
        assert!(slowest < 5.0, "seed {seed} took {slowest:.2} s");
    }
    // the generator must exercise both edge kinds
    assert!(with_triadic >= 20 && with_chain >= 50, "{with_triadic} triadic, {with_chain} chain instances");
    format!("{INSTANCES} instances, {with_chain} with chain and {with_triadic} with triadic candidates, slowest {slowest:.3} s")
}

/// Recomputes the cost report of a built model from the definitions.
fn reference_costs(m: &anot_core::Model, l: u32, max_gap: Option<u32>) -> (f64, f64, f64, f64) {
    let s = &m.store;
    let cat = &m.categories;
    let g = m.graph();
    let fs = facts(s);
    let num_entities = fs.iter().flat_map(|(_, f)| [f.subject, f.object]).collect::<BTreeSet<_>>().len() as u64;
    let num_relations = fs.iter().map(|(_, f)| f.relation).collect::<BTreeSet<_>>().len() as u64;
    let universe = num_entities * num_entities * num_relations;
    let nc = cat.len() as u64;

    let bound = 2 * nc * nc * num_relations;
    let mut model = log2(bound as f64) + log2_choose(bound, 3.min(bound));
    let members = |c: u32| (0..s.entities().len() as u32).filter(|&e| has(cat, e, c)).count() as f64;
    for n in g.nodes() {
        model += log2(nc as f64) - log2(members(n.key.subject) / num_entities as f64) - log2(members(n.key.object) / num_entities as f64);
    }
    let ne = g.edges().len() as f64;
    let mut slot_counts: BTreeMap<RuleKey, f64> = BTreeMap::new();
    for e in g.edges() {
        for k in [Some(e.key.head), e.key.middle, Some(e.key.tail)].into_iter().flatten() {
            *slot_counts.entry(k).or_default() += 1.0;
        }
    }
    for e in g.edges() {
        model += log2(ne) + 1.0;
        for k in [Some(e.key.head), e.key.middle, Some(e.key.tail)].into_iter().flatten() {
            model -= log2(slot_counts[&k] / ne);
        }
    }

    let rules = brute_rules(s, cat);
    let edges = brute_edges(s, cat, l, max_gap);
    let mut assertions = 0.0;
    for n in g.nodes() {
        assertions += rule_assertion_cost(s, &rules[&n.key]);
    }
    let mut explained = BTreeSet::new();
    for e in g.edges() {
        let t = &edges[&e.key];
        assertions += edge_assertion_cost(t);
        explained.extend(t.assertions.iter().map(|a| a.2));
    }
    let mapped: BTreeSet<FactId> = g.nodes().iter().filter(|n| n.static_eligible).flat_map(|n| rules[&n.key].iter().copied()).collect();

    let mut unmapped = 0.0;
    let mut negative = 0.0;
    let times: BTreeSet<u32> = fs.iter().map(|(_, f)| f.time).collect();
    for t in times {
        let at: Vec<FactId> = fs.iter().filter(|(_, f)| f.time == t).map(|(id, _)| *id).collect();
        let total = at.len() as u64;
        let m = at.iter().filter(|id| mapped.contains(id)).count() as u64;
        let x = at.iter().filter(|id| explained.contains(id)).count() as u64;
        unmapped += log2_choose(universe - m, total - m);
        negative += log2_choose(universe - x, total - x);
    }
    (model, assertions, unmapped, negative)
}

/// Criterion: every cost term matches the reference within 1e-9 relative.
pub fn costs_match_reference_evaluator() -> String {
    let (mut with_rules, mut with_edges) = (0, 0);
    for seed in 0..INSTANCES {
        let s = random_store(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdef);
        let l = rng.gen_range(1..=4);
        let max_gap = if rng.gen_bool(0.5) { Some(rng.gen_range(0..=5)) } else { None };
        let cfg = BuildConfig { window: l, chain_max_gap: max_gap, min_support: Some(2), ..Default::default() };
        let (m, stats) = build(s, &cfg).unwrap();
        with_rules += (m.graph().num_static() > 0) as u32;
        with_edges += !m.graph().edges().is_empty() as u32;
        let r = m.primary().report;
        let (model, assertions, unmapped, negative) = reference_costs(&m, l, max_gap);
        assert!(rel_close(r.model, model, 1e-9), "seed {seed}: model {} vs {}", r.model, model);
        assert!(rel_close(r.assertions, assertions, 1e-9), "seed {seed}: assertions {} vs {}", r.assertions, assertions);
        assert!(rel_close(r.unmapped, unmapped, 1e-9), "seed {seed}: unmapped {} vs {}", r.unmapped, unmapped);
        assert!(rel_close(r.negative, negative, 1e-9), "seed {seed}: negative {} vs {}", r.negative, negative);
        let tracked = stats.accepted.last().map_or(stats.empty_total, |a| a.total());
        assert!(rel_close(tracked, r.total(), 1e-9), "seed {seed}: running total {} vs {}", tracked, r.total());
    }
    assert!(with_rules >= 20 && with_edges >= 5, "{with_rules} instances with rules, {with_edges} with edges");
    format!("{INSTANCES} instances, {with_rules} with rules and {with_edges} with edges")
}
