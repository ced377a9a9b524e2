//! Atomic rules, rule edges, candidate generation and instantiation.

use alloc::vec::Vec;

use crate::category::{CategoryFunction, CategoryId};
use crate::mdl::slot_bits;
use crate::store::{EntityId, Fact, FactId, Projection, RelationId, Timestamp, TkgStore};
use crate::FxHashMap;

/// `(c_s, r, c_o)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleKey {
    pub subject: CategoryId,
    pub relation: RelationId,
    pub object: CategoryId,
}

impl RuleKey {
    pub const fn new(subject: CategoryId, relation: RelationId, object: CategoryId) -> Self {
        RuleKey { subject, relation, object }
    }
}

/// A chain edge `head → tail`, or a triadic edge `(head, middle) → tail`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub head: RuleKey,
    pub middle: Option<RuleKey>,
    pub tail: RuleKey,
}

impl EdgeKey {
    pub fn is_triadic(&self) -> bool {
        self.middle.is_some()
    }
}

pub type NodeId = u32;
pub type EdgeId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct RuleNode {
    pub key: RuleKey,
    /// `|A_v|`.
    pub assertions: u64,
    /// False when the node only entered the graph to support an edge; such
    /// nodes verify time errors but never count as static evidence.
    pub static_eligible: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleEdge {
    pub key: EdgeKey,
    pub head: NodeId,
    pub middle: Option<NodeId>,
    pub tail: NodeId,
    /// `T(e)` measured from the head fact, sorted.
    pub head_spans: Vec<u32>,
    /// Spans from the middle fact; empty for chains.
    pub middle_spans: Vec<u32>,
    pub assertions: u64,
}

impl RuleEdge {
    pub fn spans_from(&self, node: NodeId) -> &[u32] {
        if Some(node) == self.middle && node != self.head {
            &self.middle_spans
        } else {
            &self.head_spans
        }
    }
}

fn insert_sorted(v: &mut Vec<u32>, x: u32) {
    let at = v.partition_point(|&y| y <= x);
    v.insert(at, x);
}

/// `M* = {V*, E*}` plus adjacency.
#[derive(Clone, Debug, Default)]
pub struct RuleGraph {
    nodes: Vec<RuleNode>,
    edges: Vec<RuleEdge>,
    node_index: FxHashMap<RuleKey, NodeId>,
    edge_index: FxHashMap<EdgeKey, EdgeId>,
    in_edges: Vec<Vec<EdgeId>>,
    out_edges: Vec<Vec<EdgeId>>,
}

impl RuleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node, or upgrades an existing one to static when asked.
    pub fn add_node(&mut self, key: RuleKey, assertions: u64, static_eligible: bool) -> NodeId {
        if let Some(&id) = self.node_index.get(&key) {
            let n = &mut self.nodes[id as usize];
            n.static_eligible |= static_eligible;
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(RuleNode { key, assertions, static_eligible });
        self.node_index.insert(key, id);
        self.in_edges.push(Vec::new());
        self.out_edges.push(Vec::new());
        id
    }

    /// Adds an edge between existing nodes. Spans need not be sorted.
    pub fn add_edge(&mut self, key: EdgeKey, mut head_spans: Vec<u32>, mut middle_spans: Vec<u32>, assertions: u64) -> EdgeId {
        if let Some(&id) = self.edge_index.get(&key) {
            return id;
        }
        let head = self.node_index[&key.head];
        let middle = key.middle.map(|m| self.node_index[&m]);
        let tail = self.node_index[&key.tail];
        head_spans.sort_unstable();
        middle_spans.sort_unstable();
        let id = self.edges.len() as EdgeId;
        self.edges.push(RuleEdge { key, head, middle, tail, head_spans, middle_spans, assertions });
        self.edge_index.insert(key, id);
        self.in_edges[tail as usize].push(id);
        self.out_edges[head as usize].push(id);
        if let Some(m) = middle {
            if m != head {
                self.out_edges[m as usize].push(id);
            }
        }
        id
    }

    pub fn append_span(&mut self, edge: EdgeId, from_middle: bool, span: u32) {
        let e = &mut self.edges[edge as usize];
        insert_sorted(if from_middle { &mut e.middle_spans } else { &mut e.head_spans }, span);
    }

    pub fn bump_assertions(&mut self, node: NodeId, by: u64) {
        self.nodes[node as usize].assertions += by;
    }

    pub fn node(&self, id: NodeId) -> &RuleNode {
        &self.nodes[id as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &RuleEdge {
        &self.edges[id as usize]
    }

    pub fn nodes(&self) -> &[RuleNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RuleEdge] {
        &self.edges
    }

    pub fn find_node(&self, key: &RuleKey) -> Option<NodeId> {
        self.node_index.get(key).copied()
    }

    pub fn find_edge(&self, key: &EdgeKey) -> Option<EdgeId> {
        self.edge_index.get(key).copied()
    }

    /// Edges whose tail is `node`.
    pub fn in_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.in_edges[node as usize]
    }

    /// Edges where `node` is head or middle.
    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        &self.out_edges[node as usize]
    }

    pub fn num_static(&self) -> usize {
        self.nodes.iter().filter(|n| n.static_eligible).count()
    }

    /// Nodes a fact maps to, static or not.
    pub fn nodes_for(&self, cat: &CategoryFunction, s: EntityId, r: RelationId, o: EntityId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for &cs in cat.categories_of(s) {
            for &co in cat.categories_of(o) {
                if let Some(id) = self.find_node(&RuleKey::new(cs, r, co)) {
                    out.push(id);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// `{(c_s, r, c_o) | c_s ∈ C(s), c_o ∈ C(o)}`.
pub fn conceptualize(cat: &CategoryFunction, s: EntityId, r: RelationId, o: EntityId) -> Vec<RuleKey> {
    let mut out = Vec::new();
    for &cs in cat.categories_of(s) {
        for &co in cat.categories_of(o) {
            out.push(RuleKey::new(cs, r, co));
        }
    }
    out
}

/// A candidate atomic rule with its correct assertions.
#[derive(Clone, Debug)]
pub struct RuleCandidate {
    pub key: RuleKey,
    /// Fact ids, ascending.
    pub facts: Vec<FactId>,
    /// `L(A_v)`.
    pub assertion_bits: f64,
}

/// Assertion cost of a rule over `facts`.
pub fn rule_assertion_bits(store: &TkgStore, facts: &[FactId]) -> f64 {
    let mut subjects: FxHashMap<EntityId, u64> = FxHashMap::default();
    let mut objects: FxHashMap<EntityId, u64> = FxHashMap::default();
    for &f in facts {
        let g = store.fact(f);
        *subjects.entry(g.subject).or_insert(0) += 1;
        *objects.entry(g.object).or_insert(0) += 1;
    }
    let n = facts.len() as u64;
    slot_bits(subjects.values().copied(), n) + slot_bits(objects.values().copied(), n)
}

/// Every rule some fact maps to. Index `i` of the result is candidate id `i`;
/// ids run in descending key order so that the ranking's last tie-break
/// (higher id first) favours the most general categories.
pub fn rule_candidates(store: &TkgStore, cat: &CategoryFunction) -> Vec<RuleCandidate> {
    let mut by_key: FxHashMap<RuleKey, Vec<FactId>> = FxHashMap::default();
    for (id, f) in store.facts() {
        for key in conceptualize(cat, f.subject, f.relation, f.object) {
            by_key.entry(key).or_default().push(id);
        }
    }
    let mut out: Vec<RuleCandidate> = by_key
        .into_iter()
        .map(|(key, facts)| {
            let assertion_bits = rule_assertion_bits(store, &facts);
            RuleCandidate { key, facts, assertion_bits }
        })
        .collect();
    out.sort_unstable_by_key(|c| core::cmp::Reverse(c.key));
    out
}

/// Knobs for edge generation and instantiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeParams {
    pub window: u32,
    pub chain_max_gap: Option<u32>,
    pub projection: Projection,
    pub max_edges: usize,
}

/// A candidate rule edge with what it explains.
#[derive(Clone, Debug)]
pub struct EdgeCandidate {
    pub key: EdgeKey,
    /// Distinct tail facts, ascending.
    pub tails: Vec<FactId>,
    pub head_spans: Vec<u32>,
    pub middle_spans: Vec<u32>,
    pub assertions: u64,
    /// `L(A_e)`.
    pub assertion_bits: f64,
}

#[derive(Default)]
struct EdgeAcc {
    heads: FxHashMap<FactId, u64>,
    middles: FxHashMap<FactId, u64>,
    tails: FxHashMap<FactId, u64>,
    head_spans: Vec<u32>,
    middle_spans: Vec<u32>,
    n: u64,
}

impl EdgeAcc {
    fn finish(self, key: EdgeKey) -> EdgeCandidate {
        let mut bits = slot_bits(self.heads.values().copied(), self.n) + slot_bits(self.tails.values().copied(), self.n);
        if key.is_triadic() {
            bits += slot_bits(self.middles.values().copied(), self.n);
        }
        let mut tails: Vec<FactId> = self.tails.into_keys().collect();
        tails.sort_unstable();
        EdgeCandidate { key, tails, head_spans: self.head_spans, middle_spans: self.middle_spans, assertions: self.n, assertion_bits: bits }
    }
}

/// One occurrence of a pattern between concrete facts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RawAssertion {
    pub head: FactId,
    pub middle: Option<FactId>,
    pub tail: FactId,
}

/// A fact being tested against the graph; it need not be stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Query {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Store id when the fact is already in the store.
    pub id: Option<FactId>,
}

impl Query {
    pub fn point(f: Fact) -> Self {
        Query { subject: f.subject, relation: f.relation, object: f.object, start: f.time, end: f.time, id: None }
    }

    pub fn stored(store: &TkgStore, id: FactId) -> Self {
        let f = store.duration_fact(id);
        Query { subject: f.subject, relation: f.relation, object: f.object, start: f.start, end: f.end, id: Some(id) }
    }

    pub fn at(&self, anchor: crate::store::Anchor) -> Timestamp {
        match anchor {
            crate::store::Anchor::Start => self.start,
            crate::store::Anchor::End => self.end,
        }
    }

    fn rank_as_tail(&self, p: Projection) -> (Timestamp, RelationId, FactId) {
        (self.at(p.tail), self.relation, self.id.unwrap_or(FactId::MAX))
    }
}

/// Whether stored fact `f` occurs before `q` under `p`: compares the head
/// time of `f` with the tail time of `q`, then relation id, then fact id.
pub fn precedes(store: &TkgStore, f: FactId, q: &Query, p: Projection) -> bool {
    if Some(f) == q.id {
        return false;
    }
    let g = store.fact(f);
    (store.time_at(f, p.head), g.relation, f) < q.rank_as_tail(p)
}

/// Chain occurrences: ordered pairs on the same `(s, o)`.
pub fn chain_assertions(store: &TkgStore, params: &EdgeParams) -> Vec<RawAssertion> {
    let p = params.projection;
    let mut out = Vec::new();
    for (s, o) in store.pairs() {
        let seq = store.pair_facts(s, o);
        for &t in seq {
            let q = Query::stored(store, t);
            let tail_time = q.at(p.tail);
            for &h in seq {
                if !precedes(store, h, &q, p) {
                    continue;
                }
                let gap = tail_time - store.time_at(h, p.head);
                if params.chain_max_gap.is_some_and(|m| gap > m) {
                    continue;
                }
                out.push(RawAssertion { head: h, middle: None, tail: t });
            }
        }
    }
    out
}

/// Earliest fact from `s` to `h` whose tail time is at least `not_before`;
/// ties go to the lower relation id, then the lower fact id.
fn closing_fact(store: &TkgStore, s: EntityId, h: EntityId, not_before: Timestamp, p: Projection, skip: [FactId; 2]) -> Option<FactId> {
    let mut best: Option<(Timestamp, RelationId, FactId)> = None;
    for &g in store.pair_facts(s, h) {
        if skip.contains(&g) {
            continue;
        }
        let t = store.time_at(g, p.tail);
        if t < not_before {
            continue;
        }
        let rank = (t, store.fact(g).relation, g);
        if best.is_none_or(|b| rank < b) {
            best = Some(rank);
        }
    }
    best.map(|b| b.2)
}

/// Triadic occurrences in the shared-object form: `(s, r_m, o)` and
/// `(h, r_n, o)` within `L` of each other, closed by the earliest `(s, r_p, h)`
/// at least `L` after the later of the two.
pub fn triadic_assertions(store: &TkgStore, params: &EdgeParams) -> Vec<RawAssertion> {
    let p = params.projection;
    let l = params.window;
    let mut out = Vec::new();
    let objects: Vec<EntityId> = store.active_entities().collect();
    for o in objects {
        let mut incoming: Vec<(Timestamp, FactId)> = store.incoming(o).iter().map(|&f| (store.time_at(f, p.head), f)).collect();
        incoming.sort_unstable();
        for &(t1, f1) in &incoming {
            let s = store.fact(f1).subject;
            let lo = incoming.partition_point(|&(t, _)| t + l < t1);
            for &(t2, f2) in &incoming[lo..] {
                if t2 > t1 + l {
                    break;
                }
                let h = store.fact(f2).subject;
                if f2 == f1 || h == s {
                    continue;
                }
                let anchor = t1.max(t2);
                if let Some(g) = closing_fact(store, s, h, anchor + l, p, [f1, f2]) {
                    out.push(RawAssertion { head: f1, middle: Some(f2), tail: g });
                }
            }
        }
    }
    out
}

/// Lifts raw occurrences to category-level candidates, applies the global
/// cap and assigns ids in descending key order.
pub fn edge_candidates(store: &TkgStore, cat: &CategoryFunction, params: &EdgeParams) -> Vec<EdgeCandidate> {
    let p = params.projection;
    let mut acc: FxHashMap<EdgeKey, EdgeAcc> = FxHashMap::default();
    let mut raw = chain_assertions(store, params);
    raw.extend(triadic_assertions(store, params));
    for a in raw {
        let head = store.fact(a.head);
        let tail = store.fact(a.tail);
        let tail_time = store.time_at(a.tail, p.tail);
        let head_span = tail_time - store.time_at(a.head, p.head);
        match a.middle {
            None => {
                for &cs in cat.categories_of(head.subject) {
                    for &co in cat.categories_of(head.object) {
                        let key = EdgeKey { head: RuleKey::new(cs, head.relation, co), middle: None, tail: RuleKey::new(cs, tail.relation, co) };
                        let e = acc.entry(key).or_default();
                        *e.heads.entry(a.head).or_insert(0) += 1;
                        *e.tails.entry(a.tail).or_insert(0) += 1;
                        e.head_spans.push(head_span);
                        e.n += 1;
                    }
                }
            }
            Some(m) => {
                let mid = store.fact(m);
                let mid_span = tail_time - store.time_at(m, p.head);
                for &cs in cat.categories_of(head.subject) {
                    for &co in cat.categories_of(head.object) {
                        for &ch in cat.categories_of(mid.subject) {
                            let key = EdgeKey {
                                head: RuleKey::new(cs, head.relation, co),
                                middle: Some(RuleKey::new(ch, mid.relation, co)),
                                tail: RuleKey::new(cs, tail.relation, ch),
                            };
                            let e = acc.entry(key).or_default();
                            *e.heads.entry(a.head).or_insert(0) += 1;
                            *e.middles.entry(m).or_insert(0) += 1;
                            *e.tails.entry(a.tail).or_insert(0) += 1;
                            e.head_spans.push(head_span);
                            e.middle_spans.push(mid_span);
                            e.n += 1;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<EdgeCandidate> = acc.into_iter().map(|(k, a)| a.finish(k)).collect();
    if out.len() > params.max_edges {
        out.sort_unstable_by(|a, b| b.assertions.cmp(&a.assertions).then_with(|| a.key.cmp(&b.key)));
        log::info!("edge candidates capped at {} of {}", params.max_edges, out.len());
        out.truncate(params.max_edges);
    }
    for c in &mut out {
        c.head_spans.sort_unstable();
        c.middle_spans.sort_unstable();
    }
    out.sort_unstable_by_key(|c| core::cmp::Reverse(c.key));
    out
}

/// Instantiation of an in-edge precursor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Instance {
    pub fact: FactId,
    /// The middle fact of a triadic instance.
    pub other: Option<FactId>,
    /// Gap from the precursor's head time to the query's tail time.
    pub span: u32,
}

/// Most recent precursor for chain edge `head → ·` ending at `q`.
pub fn instantiate_chain(store: &TkgStore, cat: &CategoryFunction, head: &RuleKey, q: &Query, p: Projection, max_gap: Option<u32>) -> Option<Instance> {
    if !cat.has(q.subject, head.subject) || !cat.has(q.object, head.object) {
        return None;
    }
    let tail_time = q.at(p.tail);
    let mut best: Option<((Timestamp, RelationId, FactId), u32)> = None;
    for &f in store.pair_facts(q.subject, q.object) {
        let g = store.fact(f);
        if g.relation != head.relation || !precedes(store, f, q, p) {
            continue;
        }
        let ht = store.time_at(f, p.head);
        let gap = tail_time - ht;
        if max_gap.is_some_and(|m| gap > m) {
            continue;
        }
        let rank = (ht, g.relation, f);
        if best.is_none_or(|(b, _)| rank > b) {
            best = Some((rank, gap));
        }
    }
    best.map(|((_, _, f), span)| Instance { fact: f, other: None, span })
}

/// Most recent head/middle pair completing triadic edge `key` with `q` as
/// the closing fact. `from_middle` picks which span is reported.
pub fn instantiate_triadic(
    store: &TkgStore,
    cat: &CategoryFunction,
    key: &EdgeKey,
    q: &Query,
    p: Projection,
    window: u32,
    from_middle: bool,
) -> Option<Instance> {
    let middle = key.middle?;
    let head = key.head;
    let (s, h) = (q.subject, q.object);
    if s == h || !cat.has(s, head.subject) || !cat.has(h, middle.subject) {
        return None;
    }
    let tail_time = q.at(p.tail);
    let mut best: Option<((Timestamp, FactId, FactId), Instance)> = None;
    for &f1 in store.outgoing(s) {
        let a = store.fact(f1);
        if a.relation != head.relation || Some(f1) == q.id || !cat.has(a.object, head.object) || a.object == h {
            continue;
        }
        let t1 = store.time_at(f1, p.head);
        if t1 + window > tail_time {
            continue;
        }
        for &f2 in store.pair_facts(h, a.object) {
            if store.fact(f2).relation != middle.relation || Some(f2) == q.id {
                continue;
            }
            let t2 = store.time_at(f2, p.head);
            if t1.abs_diff(t2) > window {
                continue;
            }
            let anchor = t1.max(t2);
            if tail_time < anchor + window {
                continue;
            }
            let rank = (anchor, f1, f2);
            if best.as_ref().is_none_or(|(b, _)| rank > *b) {
                let (fact, other, from) = if from_middle { (f2, f1, t2) } else { (f1, f2, t1) };
                best = Some((rank, Instance { fact, other: Some(other), span: tail_time - from }));
            }
        }
    }
    best.map(|(_, i)| i)
}

/// Whether chain edge `· → tail` is contradicted by an earlier tail-type fact
/// on the query's pair within `window` before the query.
pub fn instantiate_out_chain(store: &TkgStore, cat: &CategoryFunction, tail: &RuleKey, q: &Query, p: Projection, window: u32) -> Option<Instance> {
    if !cat.has(q.subject, tail.subject) || !cat.has(q.object, tail.object) {
        return None;
    }
    let head_time = q.at(p.head);
    let mut best: Option<(Timestamp, FactId)> = None;
    for &f in store.pair_facts(q.subject, q.object) {
        if Some(f) == q.id || store.fact(f).relation != tail.relation {
            continue;
        }
        let tt = store.time_at(f, p.tail);
        if tt > head_time || head_time - tt > window {
            continue;
        }
        if best.is_none_or(|b| (tt, f) > b) {
            best = Some((tt, f));
        }
    }
    best.map(|(tt, f)| Instance { fact: f, other: None, span: head_time - tt })
}
