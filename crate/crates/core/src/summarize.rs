//! Greedy MDL selection of atomic rules, then rule edges.
//!
//! The objective is `L(M) + L(A) + N_map + N_assoc`. `N_map` encodes the
//! facts that no static rule maps; `N_assoc` encodes the facts that are not
//! both mapped and associated through an edge. Rules can only lower `N_map`
//! and edges can only lower `N_assoc`, so each phase has something to gain
//! and the total is non-increasing from start to end.

use alloc::vec::Vec;

use crate::category::CategoryFunction;
use crate::config::BuildConfig;
use crate::mdl::{header_bits, rule_bits, CostReport, EdgeCodebook, NegativeTerm, RuleCounts};
use crate::model::{GraphView, Model};
use crate::rules::{edge_candidates, rule_candidates, EdgeCandidate, EdgeKey, EdgeParams, RuleCandidate, RuleGraph, RuleKey};
use crate::store::{Anchor, FactId, Projection, Timestamp, TkgStore};
use crate::{FxHashMap, Result};

/// Smallest total decrease that counts as an improvement.
pub const ACCEPT_EPS: f64 = 1e-9;

/// Which facts the current model accounts for.
#[derive(Clone, Debug, Default)]
pub struct Coverage {
    /// Part of the coding universe: built from, or folded in later. Facts
    /// that were only appended stay out of every term.
    pub counted: Vec<bool>,
    /// Mapped to a static rule.
    pub mapped: Vec<bool>,
    /// Tail of a selected edge's assertion (implies mapped to a node of `M`).
    pub explained: Vec<bool>,
    pub unmapped: NegativeTerm,
    pub negative: NegativeTerm,
    /// Timestamp each fact is charged to in `negative`.
    pub anchor: Anchor,
}

impl Coverage {
    pub fn explained_count(&self) -> usize {
        self.explained.iter().filter(|&&x| x).count()
    }

    /// Explained share of the counted facts.
    pub fn explained_proportion(&self) -> f64 {
        let n = self.counted.iter().filter(|&&x| x).count();
        if n == 0 {
            0.0
        } else {
            self.explained_count() as f64 / n as f64
        }
    }
}

/// What was accepted, in order, with the total right after.
#[derive(Clone, Debug, PartialEq)]
pub enum Accepted {
    Rule { key: RuleKey, total: f64 },
    Edge { key: EdgeKey, total: f64 },
}

impl Accepted {
    pub fn total(&self) -> f64 {
        match self {
            Accepted::Rule { total, .. } | Accepted::Edge { total, .. } => *total,
        }
    }
}

/// Diagnostics of one build.
#[derive(Clone, Debug, Default)]
pub struct BuildStats {
    pub rule_candidates: usize,
    pub edge_candidates: Vec<usize>,
    /// Total of the empty model.
    pub empty_total: f64,
    pub accepted: Vec<Accepted>,
    pub rule_passes: usize,
    pub edge_passes: Vec<usize>,
}

/// Node phase output, shared by every projection.
#[derive(Clone, Debug)]
pub struct NodeSelection {
    pub graph: RuleGraph,
    pub mapped: Vec<bool>,
    pub unmapped: NegativeTerm,
    pub universe: u64,
    pub header: f64,
    pub rule_bits: f64,
    pub assertion_bits: f64,
    /// Candidate pool, needed again when an edge pulls in a time-only node.
    pub candidates: Vec<RuleCandidate>,
    pub index: FxHashMap<RuleKey, usize>,
}

fn group_by_time<I: IntoIterator<Item = Timestamp>>(times: I) -> Vec<(Timestamp, u64)> {
    let mut ts: Vec<Timestamp> = times.into_iter().collect();
    ts.sort_unstable();
    let mut out: Vec<(Timestamp, u64)> = Vec::new();
    for t in ts {
        match out.last_mut() {
            Some((u, n)) if *u == t => *n += 1,
            _ => out.push((t, 1)),
        }
    }
    out
}

fn gain(term: &NegativeTerm, groups: &[(Timestamp, u64)]) -> f64 {
    term.gain(groups.iter().map(|(t, n)| (t, n)))
}

/// `|E|² |R|` from active counts.
pub fn universe(store: &TkgStore) -> u64 {
    let e = store.num_entities() as u64;
    e * e * store.num_relations() as u64
}

/// `L(v)` for a rule under the current categories; relation term off.
pub fn node_bits(store: &TkgStore, cat: &CategoryFunction, key: &RuleKey, with_relation: bool) -> Result<f64> {
    rule_bits(RuleCounts {
        num_categories: cat.len() as u64,
        num_entities: store.num_entities() as u64,
        subject_category: cat.count(key.subject),
        object_category: cat.count(key.object),
        relation: with_relation.then(|| (store.facts_with_relation(key.relation).len() as u64, store.len() as u64)),
    })
}

/// Ranking order: data-part gain against the empty model, then assertion
/// count, then id (higher first).
fn rank(scores: &[(f64, u64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].0.total_cmp(&scores[a].0).then(scores[b].1.cmp(&scores[a].1)).then(b.cmp(&a)));
    order
}

/// Selects atomic rules.
pub fn select_rules(store: &TkgStore, cat: &CategoryFunction, stats: &mut BuildStats) -> Result<NodeSelection> {
    let universe = universe(store);
    let mut unmapped = NegativeTerm::new(universe);
    for (_, f) in store.facts() {
        unmapped.add_fact(f.time)?;
    }
    let header = header_bits(cat.len() as u64, store.num_relations() as u64);
    let candidates = rule_candidates(store, cat);
    stats.rule_candidates = candidates.len();
    let mut index = FxHashMap::default();
    let mut costs = Vec::with_capacity(candidates.len());
    let mut scores = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        index.insert(c.key, i);
        costs.push(node_bits(store, cat, &c.key, false)?);
        let groups = group_by_time(c.facts.iter().map(|&f| store.fact(f).time));
        scores.push((gain(&unmapped, &groups) - c.assertion_bits, c.facts.len() as u64));
    }
    let order = rank(&scores);

    let mut sel = NodeSelection {
        graph: RuleGraph::new(),
        mapped: alloc::vec![false; store.len()],
        unmapped,
        universe,
        header,
        rule_bits: 0.0,
        assertion_bits: 0.0,
        candidates,
        index,
    };
    let mut total = header + sel.unmapped.bits() + empty_negative(store, universe, Anchor::Start)?;
    stats.empty_total = total;
    let mut chosen = alloc::vec![false; sel.candidates.len()];
    loop {
        stats.rule_passes += 1;
        let mut added = false;
        for &i in &order {
            if chosen[i] {
                continue;
            }
            let c = &sel.candidates[i];
            let groups = group_by_time(c.facts.iter().filter(|&&f| !sel.mapped[f as usize]).map(|&f| store.fact(f).time));
            let delta = gain(&sel.unmapped, &groups) - costs[i] - c.assertion_bits;
            if delta <= ACCEPT_EPS {
                continue;
            }
            chosen[i] = true;
            added = true;
            for &f in &c.facts {
                sel.mapped[f as usize] = true;
            }
            for (t, n) in groups {
                sel.unmapped.explain(t, n);
            }
            sel.rule_bits += costs[i];
            sel.assertion_bits += c.assertion_bits;
            sel.graph.add_node(c.key, c.facts.len() as u64, true);
            total -= delta;
            stats.accepted.push(Accepted::Rule { key: c.key, total });
        }
        if !added {
            break;
        }
    }
    Ok(sel)
}

fn charge_time(store: &TkgStore, f: FactId, anchor: Anchor) -> Timestamp {
    store.time_at(f, anchor)
}

fn empty_negative(store: &TkgStore, universe: u64, anchor: Anchor) -> Result<f64> {
    let groups = group_by_time(store.facts().map(|(id, _)| charge_time(store, id, anchor)));
    let mut bits = 0.0;
    for (_, n) in groups {
        bits += crate::mdl::log2_binomial(universe, n)?;
    }
    Ok(bits)
}

fn new_nodes(graph: &RuleGraph, key: &EdgeKey) -> Vec<RuleKey> {
    let mut out: Vec<RuleKey> = Vec::with_capacity(3);
    for k in [Some(key.head), key.middle, Some(key.tail)].into_iter().flatten() {
        if graph.find_node(&k).is_none() && !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn slots(key: &EdgeKey) -> Vec<RuleKey> {
    [Some(key.head), key.middle, Some(key.tail)].into_iter().flatten().collect()
}

/// Selects rule edges for one projection on top of `nodes`.
pub fn select_edges(
    store: &TkgStore,
    cat: &CategoryFunction,
    cfg: &BuildConfig,
    nodes: &NodeSelection,
    projection: Projection,
    stats: &mut BuildStats,
) -> Result<GraphView> {
    let params = EdgeParams { window: cfg.window, chain_max_gap: cfg.chain_max_gap, projection, max_edges: cfg.max_edges };
    let anchor = projection.tail;
    let mut negative = NegativeTerm::new(nodes.universe);
    for (id, _) in store.facts() {
        negative.add_fact(charge_time(store, id, anchor))?;
    }
    let candidates: Vec<EdgeCandidate> = edge_candidates(store, cat, &params);
    stats.edge_candidates.push(candidates.len());
    let scores: Vec<(f64, u64)> = candidates
        .iter()
        .map(|c| {
            let groups = group_by_time(c.tails.iter().map(|&f| charge_time(store, f, anchor)));
            (gain(&negative, &groups) - c.assertion_bits, c.assertions)
        })
        .collect();
    let order = rank(&scores);

    let mut graph = nodes.graph.clone();
    let mut explained = alloc::vec![false; store.len()];
    let mut book: EdgeCodebook<RuleKey> = EdgeCodebook::default();
    let mut rule_bits = nodes.rule_bits;
    let mut assertion_bits = nodes.assertion_bits;
    let mut chosen = alloc::vec![false; candidates.len()];
    let mut total = nodes.header + rule_bits + assertion_bits + nodes.unmapped.bits() + negative.bits();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut added = false;
        for &i in &order {
            if chosen[i] {
                continue;
            }
            let c = &candidates[i];
            let groups = group_by_time(c.tails.iter().filter(|&&f| !explained[f as usize]).map(|&f| charge_time(store, f, anchor)));
            let fresh = new_nodes(&graph, &c.key);
            let mut cost = book.delta_bits(&slots(&c.key)) + c.assertion_bits;
            for k in &fresh {
                let cand = &nodes.candidates[nodes.index[k]];
                cost += node_bits(store, cat, k, false)? + cand.assertion_bits;
            }
            let delta = gain(&negative, &groups) - cost;
            if delta <= ACCEPT_EPS {
                continue;
            }
            chosen[i] = true;
            added = true;
            for k in &fresh {
                let cand = &nodes.candidates[nodes.index[k]];
                rule_bits += node_bits(store, cat, k, false)?;
                assertion_bits += cand.assertion_bits;
                graph.add_node(*k, cand.facts.len() as u64, false);
            }
            book.add(&slots(&c.key));
            assertion_bits += c.assertion_bits;
            for &f in &c.tails {
                explained[f as usize] = true;
            }
            for (t, n) in groups {
                negative.explain(t, n);
            }
            graph.add_edge(c.key, c.head_spans.clone(), c.middle_spans.clone(), c.assertions);
            total -= delta;
            stats.accepted.push(Accepted::Edge { key: c.key, total });
        }
        if !added {
            break;
        }
    }
    stats.edge_passes.push(passes);

    let mut with_relations = nodes.header + book.total_bits();
    for n in graph.nodes() {
        with_relations += node_bits(store, cat, &n.key, true)?;
    }
    let report = CostReport {
        model: nodes.header + rule_bits + book.total_bits(),
        assertions: assertion_bits,
        unmapped: nodes.unmapped.bits(),
        negative: negative.bits(),
        model_with_relations: with_relations,
    };
    let coverage =
        Coverage { counted: alloc::vec![true; store.len()], mapped: nodes.mapped.clone(), explained, unmapped: nodes.unmapped.clone(), negative, anchor };
    Ok(GraphView { projection, graph, coverage, report })
}

/// Induces categories and summarizes `store` into a model.
pub fn build(store: TkgStore, cfg: &BuildConfig) -> Result<(Model, BuildStats)> {
    let min_support = cfg.min_support.unwrap_or_else(|| crate::category::default_min_support(store.num_entities()));
    let cat = CategoryFunction::induce(&store, cfg.k, cfg.max_combination_size, min_support, cfg.aggregate(), cfg.max_mined);
    build_with_categories(store, cat, cfg)
}

/// Summarizes with given categories. Interval stores get one view per
/// projection.
pub fn build_with_categories(store: TkgStore, cat: CategoryFunction, cfg: &BuildConfig) -> Result<(Model, BuildStats)> {
    if store.is_empty() {
        return Err(crate::CoreError::EmptyStore);
    }
    let mut stats = BuildStats::default();
    let nodes = select_rules(&store, &cat, &mut stats)?;
    let projections: &[Projection] = if store.is_duration() { &Projection::ALL } else { &[Projection::ST_ST] };
    let mut views = Vec::with_capacity(projections.len());
    for &p in projections {
        views.push(select_edges(&store, &cat, cfg, &nodes, p, &mut stats)?);
    }
    log::info!(
        "summary: {} rule candidates, {} rules, {} edges, {:.1}% explained",
        stats.rule_candidates,
        views[0].graph.num_static(),
        views[0].graph.edges().len(),
        100.0 * views[0].coverage.explained_proportion()
    );
    let built_facts = store.len();
    Ok((Model { store, categories: cat, views, config: *cfg, built_facts, version: 0 }, stats))
}
