//! Anomaly injection, metrics and threshold selection.
//!
//! Injection perturbs a fixed share of test facts per class, with disjoint
//! samples, and keeps arrival order. Metrics are one-vs-rest per class,
//! each on its own score channel.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BuildConfig, ScoreConfig};
use crate::detect::Verdict;
use crate::model::Model;
use crate::store::{DurationFact, EntityId, Fact, FactId, RelationId, Timestamp, TkgStore};
use crate::stream::{Scorer, Stream, StreamConfig};
use crate::summarize::{build, BuildStats};
use crate::{CoreError, FxHashSet, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Valid,
    Conceptual,
    Time,
    Missing,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Valid => "valid",
            Label::Conceptual => "conceptual",
            Label::Time => "time",
            Label::Missing => "missing",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "valid" => Some(Label::Valid),
            "conceptual" => Some(Label::Conceptual),
            "time" => Some(Label::Time),
            "missing" => Some(Label::Missing),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabeledItem {
    pub fact: DurationFact,
    pub label: Label,
    /// Index of the test fact this item came from.
    pub origin: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledStream {
    /// Visible items in arrival order: valid, conceptual and time.
    pub items: Vec<LabeledItem>,
    /// Deleted facts, kept as query candidates.
    pub missing: Vec<LabeledItem>,
    pub seed: u64,
    pub rate: f64,
}

impl LabeledStream {
    pub fn count(&self, label: Label) -> usize {
        if label == Label::Missing {
            return self.missing.len();
        }
        self.items.iter().filter(|i| i.label == label).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InjectConfig {
    /// Share of the test facts per anomaly class.
    pub rate: f64,
    pub seed: u64,
    /// Smallest time displacement as a share of the timestamp range.
    pub min_shift: f64,
    /// Draws per perturbed fact before giving up.
    pub max_retries: usize,
}

impl Default for InjectConfig {
    fn default() -> Self {
        InjectConfig { rate: 0.15, seed: 0, min_shift: 0.25, max_retries: 10_000 }
    }
}

/// Says whether a triple can hold in the world. Conceptual perturbations
/// must be rejected by it.
pub type Oracle<'a> = &'a dyn Fn(EntityId, RelationId, EntityId) -> bool;

fn triples(known: &TkgStore) -> FxHashSet<(EntityId, RelationId, EntityId)> {
    known.facts().map(|(_, f)| (f.subject, f.relation, f.object)).collect()
}

fn holds(known: &TkgStore, f: &DurationFact) -> bool {
    if known.is_duration() {
        known.find_duration(f).is_some()
    } else {
        known.contains(&Fact::new(f.subject, f.relation, f.object, f.start))
    }
}

/// Number of facts per class for a test set of `n` facts.
pub fn per_class(n: usize, rate: f64) -> usize {
    libm::floor(n as f64 * rate + 1e-9) as usize
}

/// Perturbs `test` into a labeled stream. `known` holds every fact of the
/// dataset; perturbed tuples are checked against it.
pub fn inject(known: &TkgStore, test: &[DurationFact], cfg: &InjectConfig, oracle: Option<Oracle<'_>>) -> Result<LabeledStream> {
    if !(cfg.rate > 0.0 && cfg.rate * 3.0 <= 1.0) {
        return Err(CoreError::Config(alloc::format!("injection rate {} must lie in (0, 1/3]", cfg.rate)));
    }
    let entities: Vec<EntityId> = known.active_entities().collect();
    let relations: Vec<RelationId> = {
        let mut seen: Vec<RelationId> = known.facts().map(|(_, f)| f.relation).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    };
    let (lo, hi) = known.time_range().ok_or(CoreError::EmptyStore)?;
    let held = triples(known);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = per_class(test.len(), cfg.rate);
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.shuffle(&mut rng);
    let mut label = alloc::vec![Label::Valid; test.len()];
    for (class, chunk) in [Label::Conceptual, Label::Time, Label::Missing].into_iter().zip(order.chunks(n.max(1))) {
        if n == 0 {
            break;
        }
        for &i in chunk {
            label[i] = class;
        }
    }

    let min_shift = libm::ceil((hi - lo) as f64 * cfg.min_shift) as u32;
    let mut out = LabeledStream { items: Vec::new(), missing: Vec::new(), seed: cfg.seed, rate: cfg.rate };
    for (i, &f) in test.iter().enumerate() {
        let fact = match label[i] {
            Label::Valid => f,
            Label::Missing => {
                out.missing.push(LabeledItem { fact: f, label: Label::Missing, origin: i });
                continue;
            }
            Label::Conceptual => conceptual(&mut rng, f, &entities, &relations, &held, oracle, cfg.max_retries)?,
            Label::Time => time_shift(&mut rng, known, f, (lo, hi), min_shift, cfg.max_retries)?,
        };
        out.items.push(LabeledItem { fact, label: label[i], origin: i });
    }
    Ok(out)
}

fn conceptual(
    rng: &mut ChaCha8Rng,
    f: DurationFact,
    entities: &[EntityId],
    relations: &[RelationId],
    held: &FxHashSet<(EntityId, RelationId, EntityId)>,
    oracle: Option<Oracle<'_>>,
    retries: usize,
) -> Result<DurationFact> {
    for _ in 0..retries {
        let mut g = f;
        if rng.gen_bool(0.5) && relations.len() > 1 {
            g.relation = *relations.choose(rng).expect("non-empty");
        } else {
            g.object = *entities.choose(rng).ok_or(CoreError::EmptyStore)?;
        }
        if g.object == g.subject || held.contains(&(g.subject, g.relation, g.object)) {
            continue;
        }
        if oracle.is_some_and(|o| o(g.subject, g.relation, g.object)) {
            continue;
        }
        return Ok(g);
    }
    Err(CoreError::InjectionExhausted(retries))
}

fn time_shift(
    rng: &mut ChaCha8Rng,
    known: &TkgStore,
    f: DurationFact,
    (lo, hi): (Timestamp, Timestamp),
    min_shift: u32,
    retries: usize,
) -> Result<DurationFact> {
    for _ in 0..retries {
        let t = rng.gen_range(lo..=hi);
        let mut g = f;
        let moved = if f.start == f.end {
            g.start = t;
            g.end = t;
            f.start
        } else if rng.gen_bool(0.5) {
            g.start = t;
            f.start
        } else {
            g.end = t;
            f.end
        };
        if t.abs_diff(moved) < min_shift.max(1) || g.start > g.end || holds(known, &g) {
            continue;
        }
        return Ok(g);
    }
    Err(CoreError::InjectionExhausted(retries))
}

/// Deleted facts (positives) plus `ratio` never-held triples per deleted
/// fact (negatives), with times drawn from the positives. Anything held in
/// `known` is left out of the negatives.
pub fn missing_query_set(stream: &LabeledStream, known: &TkgStore, ratio: usize, seed: u64) -> Result<Vec<(DurationFact, bool)>> {
    let mut out: Vec<(DurationFact, bool)> = stream.missing.iter().map(|m| (m.fact, true)).collect();
    if stream.missing.is_empty() || ratio == 0 {
        return Ok(out);
    }
    let entities: Vec<EntityId> = known.active_entities().collect();
    let relations: Vec<RelationId> = {
        let mut seen: Vec<RelationId> = known.facts().map(|(_, f)| f.relation).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    };
    let held = triples(known);
    let mut chosen = FxHashSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let want = stream.missing.len() * ratio;
    let mut tries = 0usize;
    while out.len() < stream.missing.len() + want {
        tries += 1;
        if tries > 1000 * want {
            return Err(CoreError::InjectionExhausted(tries));
        }
        let s = *entities.choose(&mut rng).ok_or(CoreError::EmptyStore)?;
        let o = *entities.choose(&mut rng).ok_or(CoreError::EmptyStore)?;
        let r = *relations.choose(&mut rng).ok_or(CoreError::EmptyStore)?;
        if s == o || held.contains(&(s, r, o)) || !chosen.insert((s, r, o)) {
            continue;
        }
        let like = stream.missing.choose(&mut rng).expect("non-empty").fact;
        out.push((DurationFact { subject: s, relation: r, object: o, start: like.start, end: like.end }, false));
    }
    Ok(out)
}

/// Score channel for one class. Larger means more anomalous.
pub fn channel(label: Label, v: &Verdict) -> f64 {
    let t = if v.temporal_evaluated { v.temporal_score } else { 0.0 };
    match label {
        Label::Conceptual => v.static_score,
        Label::Time => t,
        Label::Missing => -(v.static_score + t),
        Label::Valid => 0.0,
    }
}

pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let d = b2 * precision + recall;
    if d <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / d
    }
}

/// Indices sorted by score, highest first; equal scores keep index order.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Area under the precision-recall curve. Tied scores enter as one step;
/// the curve starts at recall 0 with the first step's precision. `None`
/// without positives.
pub fn pr_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), positive.len());
    let total = positive.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    let idx = descending(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev: Option<(f64, f64)> = None;
    let mut area = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            tp += positive[idx[i]] as usize;
            seen += 1;
            i += 1;
        }
        let r = tp as f64 / total as f64;
        let p = tp as f64 / seen as f64;
        let (r0, p0) = prev.unwrap_or((0.0, p));
        area += (r - r0) * (p + p0) / 2.0;
        prev = Some((r, p));
    }
    Some(area)
}

/// Precision and recall of `score > tau`. Precision is `None` when nothing
/// is predicted positive, recall when there are no positives.
pub fn precision_recall(scores: &[f64], positive: &[bool], tau: f64) -> (Option<f64>, Option<f64>) {
    let (mut tp, mut pp, mut pos) = (0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(positive) {
        let hit = s > tau;
        pp += hit as usize;
        pos += y as usize;
        tp += (hit && y) as usize;
    }
    let p = (pp > 0).then(|| tp as f64 / pp as f64);
    let r = (pos > 0).then(|| tp as f64 / pos as f64);
    (p, r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Operating {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

/// Threshold with the best `F_β`, searched over midpoints between distinct
/// scores and one point below the smallest. Ties keep the highest
/// threshold. `None` without positives.
pub fn best_threshold(scores: &[f64], positive: &[bool], beta: f64) -> Option<Operating> {
    assert_eq!(scores.len(), positive.len());
    let total = positive.iter().filter(|&&p| p).count();
    if total == 0 {
        return None;
    }
    let idx = descending(scores);
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut best: Option<Operating> = None;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            tp += positive[idx[i]] as usize;
            seen += 1;
            i += 1;
        }
        let threshold = match idx.get(i) {
            Some(&j) => s + (scores[j] - s) / 2.0,
            None => s - 1.0,
        };
        let precision = tp as f64 / seen as f64;
        let recall = tp as f64 / total as f64;
        let f = f_beta(precision, recall, beta);
        if best.is_none_or(|b| f > b.f_beta) {
            best = Some(Operating { threshold, precision, recall, f_beta: f });
        }
    }
    best
}

/// One class, threshold chosen on validation and applied to test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub label: Label,
    pub positives: usize,
    pub total: usize,
    pub threshold: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_beta: Option<f64>,
    pub pr_auc: Option<f64>,
}

pub fn class_metrics(label: Label, validation: (&[f64], &[bool]), test: (&[f64], &[bool]), beta: f64) -> ClassMetrics {
    let threshold = best_threshold(validation.0, validation.1, beta).map(|o| o.threshold);
    let (precision, recall) = match threshold {
        Some(t) => precision_recall(test.0, test.1, t),
        None => (None, None),
    };
    let f = match (precision, recall) {
        (Some(p), Some(r)) => Some(f_beta(p, r, beta)),
        (None, Some(_)) => Some(0.0),
        _ => None,
    };
    ClassMetrics {
        label,
        positives: test.1.iter().filter(|&&p| p).count(),
        total: test.0.len(),
        threshold,
        precision,
        recall,
        f_beta: f,
        pr_auc: pr_auc(test.0, test.1),
    }
}

/// Everything one evaluation run needs besides the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub split: [f64; 3],
    pub inject: InjectConfig,
    pub beta: f64,
    /// Never-held queries per deleted fact.
    pub missing_ratio: usize,
    pub build: BuildConfig,
    pub score: ScoreConfig,
    pub stream: StreamConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let build = BuildConfig::default();
        ProtocolConfig {
            split: [0.6, 0.1, 0.3],
            inject: InjectConfig::default(),
            beta: 0.5,
            missing_ratio: 1,
            build,
            score: ScoreConfig::from_build(&build),
            stream: StreamConfig::default(),
        }
    }
}

/// One scored stream item or missing query.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredItem {
    pub fact: DurationFact,
    pub label: Label,
    pub verdict: Verdict,
}

#[derive(Clone, Debug)]
pub struct ProtocolOutput {
    pub model: Model,
    pub stats: BuildStats,
    /// Stream items, then missing queries.
    pub validation: Vec<ScoredItem>,
    pub test: Vec<ScoredItem>,
    /// Conceptual, time, missing.
    pub metrics: [ClassMetrics; 3],
    pub refreshes: usize,
}

fn channel_vectors(items: &[ScoredItem], class: Label) -> (Vec<f64>, Vec<bool>) {
    (items.iter().map(|i| channel(class, &i.verdict)).collect(), items.iter().map(|i| i.label == class).collect())
}

/// Scores a labeled stream, then its missing queries against the model as
/// the stream left it. Query negatives carry [`Label::Valid`].
fn score_part(
    stream: &mut Stream,
    labeled: &LabeledStream,
    arrivals: &[Timestamp],
    known: &TkgStore,
    cfg: &ProtocolConfig,
    seed: u64,
    scorer: Scorer<'_>,
) -> Result<(Vec<ScoredItem>, Vec<ScoredItem>)> {
    let feed: Vec<(Timestamp, DurationFact)> = labeled.items.iter().map(|i| (arrivals[i.origin], i.fact)).collect();
    let scored = stream.run_arrivals(&feed, scorer)?;
    let items = labeled.items.iter().zip(scored).map(|(i, s)| ScoredItem { fact: i.fact, label: i.label, verdict: s.verdict }).collect();
    let queries = missing_query_set(labeled, known, cfg.missing_ratio, seed)?;
    let facts: Vec<DurationFact> = queries.iter().map(|q| q.0).collect();
    let verdicts = scorer(&stream.model, &stream.score, &facts);
    let queries = queries
        .iter()
        .zip(verdicts)
        .map(|(&(fact, pos), verdict)| ScoredItem { fact, label: if pos { Label::Missing } else { Label::Valid }, verdict })
        .collect();
    Ok((items, queries))
}

/// Split by time, build on the first part, inject into the other two,
/// stream them through the detector and report per-class metrics with
/// thresholds picked on validation.
pub fn run_protocol(store: &TkgStore, cfg: &ProtocolConfig, oracle: Option<Oracle<'_>>, scorer: Scorer<'_>) -> Result<ProtocolOutput> {
    let split = store.split_by_time(cfg.split)?;
    let (model, stats) = build(store.subset(&split.train), &cfg.build)?;
    let part = |ids: &[FactId]| -> Vec<DurationFact> { ids.iter().map(|&i| store.duration_fact(i)).collect() };
    let (val, test) = (part(&split.valid), part(&split.test));
    let val_labeled = inject(store, &val, &InjectConfig { seed: cfg.inject.seed, ..cfg.inject }, oracle)?;
    let test_labeled = inject(store, &test, &InjectConfig { seed: cfg.inject.seed.wrapping_add(1), ..cfg.inject }, oracle)?;
    let val_arrivals: Vec<Timestamp> = val.iter().map(|f| f.start).collect();
    let test_arrivals: Vec<Timestamp> = test.iter().map(|f| f.start).collect();

    let mut stream = Stream::new(model, cfg.score, cfg.stream);
    let seed = cfg.inject.seed;
    let (validation, val_queries) = score_part(&mut stream, &val_labeled, &val_arrivals, store, cfg, seed.wrapping_add(2), scorer)?;
    let (test_items, test_queries) = score_part(&mut stream, &test_labeled, &test_arrivals, store, cfg, seed.wrapping_add(3), scorer)?;
    stream.finish()?;

    let metric = |class: Label, v: &[ScoredItem], t: &[ScoredItem]| {
        let (vs, vy) = channel_vectors(v, class);
        let (ts, ty) = channel_vectors(t, class);
        class_metrics(class, (&vs, &vy), (&ts, &ty), cfg.beta)
    };
    let metrics = [
        metric(Label::Conceptual, &validation, &test_items),
        metric(Label::Time, &validation, &test_items),
        metric(Label::Missing, &val_queries, &test_queries),
    ];
    let refreshes = stream.refreshes.len();
    let mut validation = validation;
    validation.extend(val_queries);
    let mut test_all = test_items;
    test_all.extend(test_queries);
    Ok(ProtocolOutput { model: stream.model, stats, validation, test: test_all, metrics, refreshes })
}
