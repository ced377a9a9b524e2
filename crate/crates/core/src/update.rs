//! Online folding of accepted facts into the store, categories and graphs.
//!
//! New atomic rules face the same test as during the build. New edges are
//! chain edges only, and each view gets them under its own projection.

use alloc::vec::Vec;

use crate::category::CategoryId;
use crate::model::Model;
use crate::rules::{instantiate_chain, precedes, rule_assertion_bits, EdgeKey, NodeId, Query, RuleKey};
use crate::store::{DurationFact, EntityId, Fact, FactId, RelItem, RelationId};
use crate::summarize::{node_bits, ACCEPT_EPS};
use crate::{FxHashMap, Result};

/// Everything one `apply` changed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EditLog {
    /// `None` when the fact was already stored; nothing else changed then.
    pub fact: Option<FactId>,
    /// Model version after the edit.
    pub version: u64,
    pub new_entities: Vec<EntityId>,
    pub categories: Vec<(EntityId, CategoryId)>,
    pub nodes: Vec<RuleKey>,
    /// `(view, edge)` pairs.
    pub edges: Vec<(usize, EdgeKey)>,
    pub spans: usize,
}

impl EditLog {
    pub fn is_noop(&self) -> bool {
        self.fact.is_none()
    }
}

/// Stores the fact without touching categories, graphs or coding terms,
/// so later scoring still sees it as history.
pub fn append_only(model: &mut Model, fact: DurationFact) -> Result<Option<FactId>> {
    let id = if model.store.is_duration() {
        model.store.insert_duration(fact)?
    } else {
        model.store.insert(Fact::new(fact.subject, fact.relation, fact.object, fact.start))
    };
    if id.is_some() {
        for view in &mut model.views {
            view.coverage.counted.push(false);
            view.coverage.mapped.push(false);
            view.coverage.explained.push(false);
        }
    }
    Ok(id)
}

/// Extends the known `R(e)` of entities the build never saw, until `k` of
/// their facts are folded. Runs before scoring so a new entity can be
/// scored on its first facts.
pub fn register(model: &mut Model, s: EntityId, r: RelationId, o: EntityId) -> Vec<(EntityId, CategoryId)> {
    register_batch(model, &[(s, r, o)])
}

/// [`register`] for facts arriving together.
pub fn register_batch(model: &mut Model, triples: &[(EntityId, RelationId, EntityId)]) -> Vec<(EntityId, CategoryId)> {
    let fresh: Vec<EntityId> = triples.iter().flat_map(|&(s, _, o)| [s, o]).filter(|&e| is_fresh(model, e)).collect();
    let mut out = Vec::new();
    for &(s, r, o) in triples {
        for (e, item) in [(s, RelItem::outgoing(r)), (o, RelItem::incoming(r))] {
            if fresh.contains(&e) {
                out.extend(model.categories.extend_for_item(e, item).into_iter().map(|c| (e, c)));
            }
        }
    }
    out
}

/// No build fact touches `e` and fewer than `k` of its facts are folded.
fn is_fresh(model: &Model, e: EntityId) -> bool {
    let counted = &model.views[0].coverage.counted;
    let mut folded = 0;
    for &f in model.store.outgoing(e).iter().chain(model.store.incoming(e)) {
        if (f as usize) < model.built_facts {
            return false;
        }
        folded += counted[f as usize] as usize;
    }
    folded < model.categories.k()
}

/// Extends the known `R(e)` of a stored fact's endpoints once at least
/// `min_seen` stored facts of the endpoint carry the item. Runs after
/// scoring, so the fact is judged against the categories it found.
pub fn observe(model: &mut Model, id: FactId, min_seen: usize) -> Vec<(EntityId, CategoryId)> {
    let f = model.store.fact(id);
    let mut out = Vec::new();
    for (e, item) in [(f.subject, RelItem::outgoing(f.relation)), (f.object, RelItem::incoming(f.relation))] {
        if model.categories.known_items(e).contains(&item) {
            continue;
        }
        let list = if item.is_incoming() { model.store.incoming(e) } else { model.store.outgoing(e) };
        let seen = list.iter().filter(|&&g| model.store.fact(g).relation == f.relation).take(min_seen).count();
        if seen >= min_seen {
            out.extend(model.categories.extend_for_item(e, item).into_iter().map(|c| (e, c)));
        }
    }
    out
}

pub fn apply(model: &mut Model, fact: Fact) -> Result<EditLog> {
    apply_duration(model, DurationFact { subject: fact.subject, relation: fact.relation, object: fact.object, start: fact.time, end: fact.time })
}

/// Registers, stores and folds a fact judged valid. Applying the
/// same fact twice is a no-op the second time.
pub fn apply_duration(model: &mut Model, fact: DurationFact) -> Result<EditLog> {
    if model.store.find_duration(&fact).is_some() {
        return Ok(EditLog { version: model.version, ..Default::default() });
    }
    let categories = register(model, fact.subject, fact.relation, fact.object);
    let mut log = match append_only(model, fact)? {
        Some(id) => fold(model, id)?,
        None => EditLog { version: model.version, ..Default::default() },
    };
    log.categories.splice(0..0, categories);
    Ok(log)
}

/// Folds an already stored fact into categories, graphs and coding terms.
/// Folding the same id twice is a no-op.
pub fn fold(model: &mut Model, id: FactId) -> Result<EditLog> {
    let mut log = EditLog { version: model.version, ..Default::default() };
    if model.views[0].coverage.counted[id as usize] {
        return Ok(log);
    }
    log.fact = Some(id);
    let f = model.store.fact(id);
    let (s, r, o) = (f.subject, f.relation, f.object);
    for e in [s, o] {
        let seen = model.store.outgoing(e).len() + model.store.incoming(e).len();
        if seen == 1 + (s == o) as usize && !log.new_entities.contains(&e) {
            log.new_entities.push(e);
        }
    }

    // R(e) as the model knows it grows by this fact's items
    for (e, item) in [(s, RelItem::outgoing(r)), (o, RelItem::incoming(r))] {
        let added = model.categories.extend_for_item(e, item);
        log.categories.extend(added.into_iter().map(|c| (e, c)));
    }

    let q = Query::stored(&model.store, id);
    let tail_time = q.start;
    for view in &mut model.views {
        view.coverage.counted[id as usize] = true;
        view.coverage.unmapped.add_fact(tail_time)?;
        let charged = model.store.time_at(id, view.coverage.anchor);
        view.coverage.negative.add_fact(charged)?;
    }

    // existing nodes: count the assertion and extend timespans
    // static nodes are shared by every view; time-only ones are not
    let mapped = model.graph().nodes_for(&model.categories, s, r, o).iter().any(|&v| model.graph().node(v).static_eligible);
    for vi in 0..model.views.len() {
        let view = &mut model.views[vi];
        let p = view.projection;
        let existing = view.graph.nodes_for(&model.categories, s, r, o);
        let mut explained = false;
        for &v in &existing {
            view.graph.bump_assertions(v, 1);
            let in_edges: Vec<_> = view.graph.in_edges(v).to_vec();
            for e in in_edges {
                let edge = view.graph.edge(e);
                if edge.key.is_triadic() {
                    continue;
                }
                let head = edge.key.head;
                if let Some(i) = instantiate_chain(&model.store, &model.categories, &head, &q, p, model.config.chain_max_gap) {
                    view.graph.append_span(e, false, i.span);
                    log.spans += 1;
                    explained = true;
                }
            }
        }
        if mapped {
            mark_mapped(view, id, tail_time);
        }
        if explained {
            mark_explained(view, id, model.store.time_at(id, view.coverage.anchor));
        }
    }

    // novel rules derivable from the fact
    for key in crate::rules::conceptualize(&model.categories, s, r, o) {
        if model.graph().find_node(&key).is_some_and(|v| model.graph().node(v).static_eligible) {
            continue;
        }
        let facts: Vec<FactId> = model
            .store
            .facts_with_relation(r)
            .iter()
            .copied()
            .filter(|&f| {
                let g = model.store.fact(f);
                model.views[0].coverage.counted[f as usize] && model.categories.has(g.subject, key.subject) && model.categories.has(g.object, key.object)
            })
            .collect();
        let view0 = &model.views[0];
        let mut groups: FxHashMap<u32, u64> = FxHashMap::default();
        for &f in &facts {
            if !view0.coverage.mapped[f as usize] {
                *groups.entry(model.store.fact(f).time).or_insert(0) += 1;
            }
        }
        let gain = view0.coverage.unmapped.gain(groups.iter());
        let cost = node_bits(&model.store, &model.categories, &key, false)? + rule_assertion_bits(&model.store, &facts);
        if gain - cost <= ACCEPT_EPS {
            continue;
        }
        log.nodes.push(key);
        for view in &mut model.views {
            view.graph.add_node(key, facts.len() as u64, true);
            for &f in &facts {
                view.coverage.mapped[f as usize] = true;
            }
            for (&t, &n) in &groups {
                view.coverage.unmapped.explain(t, n);
            }
        }
        for vi in 0..model.views.len() {
            link_node(model, vi, key, &q, &mut log);
        }
    }

    model.version += 1;
    log.version = model.version;
    Ok(log)
}

fn mark_mapped(view: &mut crate::model::GraphView, id: FactId, t: u32) {
    if !view.coverage.mapped[id as usize] {
        view.coverage.mapped[id as usize] = true;
        view.coverage.unmapped.explain(t, 1);
    }
}

fn mark_explained(view: &mut crate::model::GraphView, id: FactId, t: u32) {
    if !view.coverage.explained[id as usize] {
        view.coverage.explained[id as usize] = true;
        view.coverage.negative.explain(t, 1);
    }
}

/// Chain edges `v' → v` from earlier facts on the same pair within the
/// window, one span per precursor fact.
fn link_node(model: &mut Model, vi: usize, key: RuleKey, q: &Query, log: &mut EditLog) {
    let store = &model.store;
    let view = &mut model.views[vi];
    let p = view.projection;
    let tail_time = q.at(p.tail);
    let window = model.config.window;
    let mut linked = false;
    for &f in store.pair_facts(q.subject, q.object) {
        if Some(f) == q.id || !precedes(store, f, q, p) {
            continue;
        }
        let gap = tail_time - store.time_at(f, p.head);
        if gap > window {
            continue;
        }
        let g = store.fact(f);
        let heads: Vec<NodeId> = view.graph.nodes_for(&model.categories, g.subject, g.relation, g.object);
        for h in heads {
            let ek = EdgeKey { head: view.graph.node(h).key, middle: None, tail: key };
            match view.graph.find_edge(&ek) {
                Some(e) => view.graph.append_span(e, false, gap),
                None => {
                    view.graph.add_edge(ek, alloc::vec![gap], Vec::new(), 1);
                    log.edges.push((vi, ek));
                }
            }
            log.spans += 1;
            linked = true;
        }
    }
    if linked {
        if let Some(id) = q.id {
            let t = store.time_at(id, view.coverage.anchor);
            mark_explained(view, id, t);
        }
    }
}
