//! Static and temporal scoring of new knowledge.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{ScoreConfig, ThetaMode};
use crate::model::{GraphView, Model};
use crate::rules::{instantiate_chain, instantiate_out_chain, instantiate_triadic, EdgeId, NodeId, Query, RuleKey};
use crate::store::{DurationFact, Fact, FactId};

/// Score given to empty sums; strictly above anything finite.
pub const SENTINEL: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnomalyClass {
    Valid,
    Conceptual,
    Time,
    MissingCandidate,
}

impl AnomalyClass {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyClass::Valid => "valid",
            AnomalyClass::Conceptual => "conceptual",
            AnomalyClass::Time => "time",
            AnomalyClass::MissingCandidate => "missing",
        }
    }
}

/// `(τ_s, τ_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub static_score: f64,
    pub temporal_score: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { static_score: 1.0, temporal_score: 1.0 }
    }
}

/// An instantiated precursor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evidence {
    /// Index of the view the walk ran in.
    pub view: usize,
    pub node: NodeId,
    pub edge: EdgeId,
    pub fact: FactId,
    pub span: u32,
    pub depth: u32,
}

/// A precursor that could not be instantiated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Failed {
    pub node: NodeId,
    pub edge: EdgeId,
    pub depth: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub static_score: f64,
    pub temporal_score: f64,
    /// False when static evidence fell short of `λ`.
    pub temporal_evaluated: bool,
    /// One temporal score per view; `temporal_score` is their mean.
    pub temporal_views: Vec<f64>,
    pub class: AnomalyClass,
    pub evidence: Vec<Evidence>,
    pub failed: Vec<Failed>,
    /// Out-edges contradicted by earlier knowledge.
    pub conflicts: Vec<Evidence>,
}

impl Verdict {
    /// Whether the walk instantiated a first-hop precursor in the primary
    /// view; the monitor counts such facts as explained.
    pub fn associated(&self) -> bool {
        self.evidence.iter().any(|e| e.view == 0 && e.depth == 1)
    }

    /// Both channels finite.
    pub fn finite(&self) -> bool {
        self.static_score < SENTINEL && self.temporal_score < SENTINEL
    }
}

/// Class from scores: `S > τ_s` is conceptual, then `T > τ_t` is time.
/// `probe` marks a candidate that is not in the store; it becomes a
/// missing-candidate when every view's temporal score is within `τ_t`.
pub fn classify(v: &Verdict, th: &Thresholds, probe: bool) -> AnomalyClass {
    if v.static_score > th.static_score {
        AnomalyClass::Conceptual
    } else if v.temporal_evaluated && v.temporal_score > th.temporal_score {
        AnomalyClass::Time
    } else if probe && v.temporal_evaluated && v.temporal_views.iter().all(|&t| t <= th.temporal_score) {
        AnomalyClass::MissingCandidate
    } else {
        AnomalyClass::Valid
    }
}

fn theta(spans: &[u32], gap: u32, window: u32, mode: ThetaMode) -> usize {
    let lo = spans.partition_point(|&s| s < gap.saturating_sub(window));
    let hi = spans.partition_point(|&s| s <= gap.saturating_add(window));
    let close = hi - lo;
    match mode {
        ThetaMode::Literal => close,
        ThetaMode::Mismatch => spans.len() - close,
    }
}

#[derive(Default)]
struct Walk {
    view: usize,
    denominator: f64,
    evidence: Vec<Evidence>,
    failed: Vec<Failed>,
}

/// Scores facts against one model snapshot. Pure: the same inputs always
/// give the same verdict.
#[derive(Clone, Copy)]
pub struct Detector<'a> {
    pub model: &'a Model,
    pub cfg: ScoreConfig,
}

impl<'a> Detector<'a> {
    pub fn new(model: &'a Model, cfg: ScoreConfig) -> Self {
        Detector { model, cfg }
    }

    /// `Σ |A_v|` over static nodes the query maps to.
    pub fn static_mass(&self, q: &Query) -> u64 {
        let g = self.model.graph();
        g.nodes_for(&self.model.categories, q.subject, q.relation, q.object)
            .into_iter()
            .map(|v| g.node(v))
            .filter(|n| n.static_eligible)
            .map(|n| n.assertions)
            .sum()
    }

    pub fn static_score(&self, q: &Query) -> f64 {
        match self.static_mass(q) {
            0 => SENTINEL,
            m => 1.0 / m as f64,
        }
    }

    fn visit_edge(&self, view: &GraphView, e: EdgeId, target: &Query, mass: f64, depth: u32, walk: &mut Walk) {
        let m = self.model;
        let g = &view.graph;
        let edge = g.edge(e);
        let mut precursors = [(edge.head, false), (0, true)];
        let n = if edge.middle.is_some() {
            precursors[1].0 = edge.middle.unwrap_or_default();
            2
        } else {
            1
        };
        for &(vi, from_middle) in &precursors[..n] {
            let inst = if edge.key.is_triadic() {
                instantiate_triadic(&m.store, &m.categories, &edge.key, target, view.projection, self.cfg.window, from_middle)
            } else {
                // a precursor `depth` hops back may sit up to `depth` gaps away
                let max_gap = self.cfg.chain_max_gap.map(|g| g.saturating_mul(depth));
                instantiate_chain(&m.store, &m.categories, &edge.key.head, target, view.projection, max_gap)
            };
            match inst {
                Some(i) => {
                    let spans = if from_middle { &edge.middle_spans } else { &edge.head_spans };
                    let th = theta(spans, i.span, self.cfg.window, self.cfg.theta);
                    walk.denominator += mass / (th as f64 + 1.0);
                    walk.evidence.push(Evidence { view: walk.view, node: vi, edge: e, fact: i.fact, span: i.span, depth });
                }
                None => {
                    walk.failed.push(Failed { node: vi, edge: e, depth });
                    // a failed triadic precursor has no known entity pair to recurse from
                    if depth < self.cfg.max_hops && !edge.key.is_triadic() {
                        let pseudo = Query { relation: g.node(vi).key.relation, id: None, ..*target };
                        for &e2 in g.in_edges(vi) {
                            self.visit_edge(view, e2, &pseudo, mass, depth + 1, walk);
                        }
                    }
                }
            }
        }
    }

    /// `T` for one view plus the walk's evidence.
    fn temporal_view(&self, index: usize, q: &Query) -> (f64, Walk, Vec<Evidence>) {
        let m = self.model;
        let view = &m.views[index];
        let g = &view.graph;
        let mut walk = Walk { view: index, ..Walk::default() };
        let mut conflicts = Vec::new();
        for v in g.nodes_for(&m.categories, q.subject, q.relation, q.object) {
            let mass = g.node(v).assertions as f64;
            for &e in g.in_edges(v) {
                self.visit_edge(view, e, q, mass, 1, &mut walk);
            }
            if self.cfg.out_edge_extension {
                for &e in g.out_edges(v) {
                    let edge = g.edge(e);
                    if edge.key.is_triadic() || edge.head != v {
                        continue;
                    }
                    if let Some(i) = instantiate_out_chain(&m.store, &m.categories, &edge.key.tail, q, view.projection, self.cfg.window) {
                        conflicts.push(Evidence { view: index, node: edge.tail, edge: e, fact: i.fact, span: i.span, depth: 1 });
                    }
                }
            }
        }
        let t = if walk.denominator > 0.0 { (1.0 + conflicts.len() as f64) / walk.denominator } else { SENTINEL };
        (t, walk, conflicts)
    }

    pub fn score_query(&self, q: &Query) -> Verdict {
        let mass = self.static_mass(q);
        let static_score = if mass == 0 { SENTINEL } else { 1.0 / mass as f64 };
        let mut v = Verdict {
            static_score,
            temporal_score: SENTINEL,
            temporal_evaluated: false,
            temporal_views: Vec::new(),
            class: AnomalyClass::Valid,
            evidence: Vec::new(),
            failed: Vec::new(),
            conflicts: Vec::new(),
        };
        if (mass as f64) < self.cfg.lambda {
            return v;
        }
        v.temporal_evaluated = true;
        for index in 0..self.model.views.len() {
            let (t, walk, conflicts) = self.temporal_view(index, q);
            v.temporal_views.push(t);
            v.evidence.extend(walk.evidence);
            v.failed.extend(walk.failed);
            v.conflicts.extend(conflicts);
        }
        v.temporal_score = crate::duration::mean_score(&v.temporal_views);
        v
    }

    pub fn score(&self, f: Fact) -> Verdict {
        self.score_query(&Query { id: self.model.store.find(&f), ..Query::point(f) })
    }

    pub fn score_duration(&self, f: DurationFact) -> Verdict {
        self.score_query(&Query {
            subject: f.subject,
            relation: f.relation,
            object: f.object,
            start: f.start,
            end: f.end,
            id: self.model.store.find_duration(&f),
        })
    }

    /// Mapped to some node and associated with an earlier fact through a
    /// first-hop in-edge of the primary view. Unlike [`Verdict::associated`]
    /// this skips the static guard and the rest of the walk.
    pub fn associated(&self, q: &Query) -> bool {
        let m = self.model;
        let view = m.primary();
        let g = &view.graph;
        for v in g.nodes_for(&m.categories, q.subject, q.relation, q.object) {
            for &e in g.in_edges(v) {
                let edge = g.edge(e);
                let hit = if edge.key.is_triadic() {
                    instantiate_triadic(&m.store, &m.categories, &edge.key, q, view.projection, self.cfg.window, false).is_some()
                } else {
                    instantiate_chain(&m.store, &m.categories, &edge.key.head, q, view.projection, self.cfg.chain_max_gap).is_some()
                };
                if hit {
                    return true;
                }
            }
        }
        false
    }

    /// Grounds failed chain precursors on the query's entities and keeps the
    /// groundings that pass as missing knowledge. Out-edge evidence is off
    /// while scoring these.
    pub fn propose_missing(&self, q: &Query, verdict: &Verdict, th: &Thresholds) -> Vec<(Fact, Verdict)> {
        let m = self.model;
        let g = m.graph();
        let probe = Detector { model: m, cfg: ScoreConfig { out_edge_extension: false, ..self.cfg } };
        let mut seen: Vec<Fact> = Vec::new();
        let mut out = Vec::new();
        for f in &verdict.failed {
            let edge = g.edge(f.edge);
            if edge.key.is_triadic() || edge.head_spans.is_empty() {
                continue;
            }
            let median = edge.head_spans[edge.head_spans.len() / 2];
            let cand = Fact::new(q.subject, g.node(f.node).key.relation, q.object, q.start.saturating_sub(median));
            if seen.contains(&cand) || m.store.contains(&cand) {
                continue;
            }
            seen.push(cand);
            let mut v = probe.score(cand);
            v.class = classify(&v, th, true);
            if v.class == AnomalyClass::MissingCandidate {
                out.push((cand, v));
            }
        }
        out
    }

    /// Rules that partially describe an anomalous fact.
    pub fn correcting_prompts(&self, q: &Query, verdict: &Verdict) -> Vec<Prompt> {
        let m = self.model;
        let g = m.graph();
        let cat = &m.categories;
        let mut out = Vec::new();
        match verdict.class {
            AnomalyClass::Conceptual => {
                let subj = cat.categories_of(q.subject);
                let obj = cat.categories_of(q.object);
                let mut object_slot = Vec::new();
                let mut relation_slot = Vec::new();
                for n in g.nodes().iter().filter(|n| n.static_eligible && subj.contains(&n.key.subject)) {
                    if n.key.relation == q.relation {
                        object_slot.push((n.assertions, n.key));
                    } else if obj.contains(&n.key.object) {
                        relation_slot.push((n.assertions, n.key));
                    }
                }
                for (list, wrap) in [(object_slot, Prompt::ObjectSlot as fn(RuleKey) -> Prompt), (relation_slot, Prompt::RelationSlot)] {
                    let mut list = list;
                    list.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                    out.extend(list.into_iter().take(PROMPT_LIMIT).map(|(_, k)| wrap(k)));
                }
            }
            AnomalyClass::Time => {
                for e in verdict.evidence.iter().filter(|e| e.depth == 1) {
                    out.push(Prompt::Supporting { edge: e.edge, observed: e.span });
                }
                for e in &verdict.conflicts {
                    out.push(Prompt::Conflicting { edge: e.edge, observed: e.span });
                }
                out.dedup();
            }
            _ => {}
        }
        out
    }
}

const PROMPT_LIMIT: usize = 10;

/// A hint on how an anomalous fact could be fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Prompt {
    /// A rule with the same subject category and relation: the object
    /// should belong to its object category.
    ObjectSlot(RuleKey),
    /// A rule between the same categories with another relation.
    RelationSlot(RuleKey),
    /// An in-edge that was instantiated.
    Supporting { edge: EdgeId, observed: u32 },
    /// An out-edge whose tail already happened.
    Conflicting { edge: EdgeId, observed: u32 },
}

/// Human-readable category: its items as `+rel` (outgoing) / `-rel`.
pub fn category_label(model: &Model, c: crate::category::CategoryId) -> String {
    let rels = model.store.relations();
    let parts: Vec<String> = model
        .categories
        .category(c)
        .items
        .iter()
        .map(|i| {
            let name = rels.label(i.relation()).unwrap_or("?");
            format!("{}{}", if i.is_incoming() { '-' } else { '+' }, name)
        })
        .collect();
    format!("[{}]", parts.join(","))
}

pub fn rule_label(model: &Model, k: &RuleKey) -> String {
    format!("({}, {}, {})", category_label(model, k.subject), model.store.relations().label(k.relation).unwrap_or("?"), category_label(model, k.object))
}

fn span_range(spans: &[u32]) -> String {
    match (spans.first(), spans.last()) {
        (Some(a), Some(b)) => format!("[{a}, {b}]"),
        _ => String::from("[]"),
    }
}

impl Prompt {
    pub fn render(&self, model: &Model) -> String {
        let g = model.graph();
        let edge_label = |e: EdgeId| {
            let edge = g.edge(e);
            let head = match edge.key.middle {
                Some(mid) => format!("{} & {}", rule_label(model, &edge.key.head), rule_label(model, &mid)),
                None => rule_label(model, &edge.key.head),
            };
            format!("{} -> {} after {}", head, rule_label(model, &edge.key.tail), span_range(&edge.head_spans))
        };
        match self {
            Prompt::ObjectSlot(k) => format!("object should fit {}", rule_label(model, k)),
            Prompt::RelationSlot(k) => format!("relation could be as in {}", rule_label(model, k)),
            Prompt::Supporting { edge, observed } => format!("supported by {} (observed {observed})", edge_label(*edge)),
            Prompt::Conflicting { edge, observed } => format!("conflicts with {} (observed {observed})", edge_label(*edge)),
        }
    }
}
