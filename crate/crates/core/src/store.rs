//! Quadruple storage and the indexes every other module leans on.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{CoreError, FxHashMap, Result};

pub type EntityId = u32;
pub type RelationId = u32;
pub type Timestamp = u32;
pub type FactId = u32;

/// A point fact `(s, r, o, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub time: Timestamp,
}

impl Fact {
    pub const fn new(subject: EntityId, relation: RelationId, object: EntityId, time: Timestamp) -> Self {
        Fact { subject, relation, object, time }
    }
}

/// A fact valid over the closed interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DurationFact {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Which end of an interval a rule edge reads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Anchor {
    #[default]
    Start,
    End,
}

/// Anchors used for the head and the tail of an edge. Point data only ever
/// uses [`Projection::ST_ST`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Projection {
    pub head: Anchor,
    pub tail: Anchor,
}

impl Projection {
    pub const ST_ST: Projection = Projection { head: Anchor::Start, tail: Anchor::Start };
    pub const ED_ED: Projection = Projection { head: Anchor::End, tail: Anchor::End };
    pub const ST_ED: Projection = Projection { head: Anchor::Start, tail: Anchor::End };
    pub const ED_ST: Projection = Projection { head: Anchor::End, tail: Anchor::Start };
    pub const ALL: [Projection; 4] = [Self::ST_ST, Self::ED_ED, Self::ST_ED, Self::ED_ST];

    pub fn name(self) -> &'static str {
        match (self.head, self.tail) {
            (Anchor::Start, Anchor::Start) => "ST-ST",
            (Anchor::End, Anchor::End) => "ED-ED",
            (Anchor::Start, Anchor::End) => "ST-ED",
            (Anchor::End, Anchor::Start) => "ED-ST",
        }
    }
}

/// A relation seen from one entity: outgoing when the entity is the subject.
///
/// Packed as `relation << 1 | incoming`, so sorting items sorts by relation
/// first and puts the outgoing side before the incoming one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelItem(pub u32);

impl RelItem {
    pub const fn outgoing(r: RelationId) -> Self {
        RelItem(r << 1)
    }
    pub const fn incoming(r: RelationId) -> Self {
        RelItem((r << 1) | 1)
    }
    pub const fn relation(self) -> RelationId {
        self.0 >> 1
    }
    pub const fn is_incoming(self) -> bool {
        self.0 & 1 == 1
    }
}

/// Bidirectional label table.
#[derive(Clone, Debug, Default)]
pub struct Interner {
    labels: Vec<String>,
    index: FxHashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Clone, Copy, Debug)]
struct Record {
    fact: Fact,
    end: Timestamp,
}

type Key = (EntityId, RelationId, EntityId, Timestamp, Timestamp);

/// Fact ids partitioned by timestamp ranges.
#[derive(Clone, Debug, Default)]
pub struct TimeSplit {
    pub train: Vec<FactId>,
    pub valid: Vec<FactId>,
    pub test: Vec<FactId>,
    /// First timestamp of the validation and of the test part.
    pub boundaries: [Timestamp; 2],
}

/// Append-only quadruple store.
///
/// Entity and relation ids are dense and handed out by the interners. An
/// entity counts as *active* once it takes part in at least one fact; the MDL
/// universe is sized from active counts.
#[derive(Clone, Debug, Default)]
pub struct TkgStore {
    entities: Interner,
    relations: Interner,
    records: Vec<Record>,
    keys: FxHashMap<Key, FactId>,
    by_time: BTreeMap<Timestamp, Vec<FactId>>,
    items: Vec<BTreeSet<RelItem>>,
    outgoing: Vec<Vec<FactId>>,
    incoming: Vec<Vec<FactId>>,
    by_relation: Vec<Vec<FactId>>,
    pairs: FxHashMap<(EntityId, EntityId), Vec<FactId>>,
    active_entities: usize,
    active_relations: usize,
    duration: bool,
}

impl TkgStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store whose facts carry `[start, end]` intervals.
    pub fn with_durations() -> Self {
        TkgStore { duration: true, ..Self::default() }
    }

    /// Empty store sharing this store's label tables, so ids stay comparable.
    pub fn empty_like(&self) -> Self {
        TkgStore { entities: self.entities.clone(), relations: self.relations.clone(), duration: self.duration, ..Self::default() }
    }

    pub fn is_duration(&self) -> bool {
        self.duration
    }

    pub fn intern_entity(&mut self, label: &str) -> EntityId {
        self.entities.intern(label)
    }

    pub fn intern_relation(&mut self, label: &str) -> RelationId {
        self.relations.intern(label)
    }

    pub fn entities(&self) -> &Interner {
        &self.entities
    }

    pub fn relations(&self) -> &Interner {
        &self.relations
    }

    /// Inserts a point fact. Returns `None` for an exact duplicate.
    pub fn insert(&mut self, fact: Fact) -> Option<FactId> {
        self.insert_record(fact, fact.time)
    }

    /// Inserts an interval fact; `end < start` is rejected.
    pub fn insert_duration(&mut self, fact: DurationFact) -> Result<Option<FactId>> {
        if fact.end < fact.start {
            return Err(CoreError::BadInterval { start: fact.start, end: fact.end });
        }
        let point = Fact::new(fact.subject, fact.relation, fact.object, fact.start);
        Ok(self.insert_record(point, fact.end))
    }

    /// Interns the labels and inserts.
    pub fn insert_labeled(&mut self, s: &str, r: &str, o: &str, t: Timestamp) -> Option<FactId> {
        let fact = Fact::new(self.intern_entity(s), self.intern_relation(r), self.intern_entity(o), t);
        self.insert(fact)
    }

    fn insert_record(&mut self, fact: Fact, end: Timestamp) -> Option<FactId> {
        let key = (fact.subject, fact.relation, fact.object, fact.time, end);
        if self.keys.contains_key(&key) {
            return None;
        }
        let id = self.records.len() as FactId;
        self.keys.insert(key, id);
        self.records.push(Record { fact, end });
        self.by_time.entry(fact.time).or_default().push(id);

        let top = fact.subject.max(fact.object) as usize + 1;
        if self.items.len() < top {
            self.items.resize_with(top, BTreeSet::new);
            self.outgoing.resize_with(top, Vec::new);
            self.incoming.resize_with(top, Vec::new);
        }
        let s_new = self.items[fact.subject as usize].is_empty();
        let o_new = fact.object != fact.subject && self.items[fact.object as usize].is_empty();
        self.active_entities += s_new as usize + o_new as usize;
        self.items[fact.subject as usize].insert(RelItem::outgoing(fact.relation));
        self.items[fact.object as usize].insert(RelItem::incoming(fact.relation));
        self.outgoing[fact.subject as usize].push(id);
        self.incoming[fact.object as usize].push(id);

        let r = fact.relation as usize;
        if self.by_relation.len() <= r {
            self.by_relation.resize_with(r + 1, Vec::new);
        }
        if self.by_relation[r].is_empty() {
            self.active_relations += 1;
        }
        self.by_relation[r].push(id);

        let seq = self.pairs.entry((fact.subject, fact.object)).or_default();
        let rank = (fact.time, fact.relation, id);
        let recs = &self.records;
        let pos = seq.partition_point(|&f| {
            let g = recs[f as usize].fact;
            (g.time, g.relation, f) < rank
        });
        seq.insert(pos, id);
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// The fact with id `id`; for interval facts `time` is the start.
    pub fn fact(&self, id: FactId) -> Fact {
        self.records[id as usize].fact
    }

    pub fn end(&self, id: FactId) -> Timestamp {
        self.records[id as usize].end
    }

    pub fn duration_fact(&self, id: FactId) -> DurationFact {
        let r = self.records[id as usize];
        DurationFact { subject: r.fact.subject, relation: r.fact.relation, object: r.fact.object, start: r.fact.time, end: r.end }
    }

    /// Time of fact `id` read at `anchor`.
    pub fn time_at(&self, id: FactId, anchor: Anchor) -> Timestamp {
        let r = &self.records[id as usize];
        match anchor {
            Anchor::Start => r.fact.time,
            Anchor::End => r.end,
        }
    }

    pub fn facts(&self) -> impl Iterator<Item = (FactId, Fact)> + '_ {
        self.records.iter().enumerate().map(|(i, r)| (i as FactId, r.fact))
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.find(fact).is_some()
    }

    pub fn find(&self, fact: &Fact) -> Option<FactId> {
        self.keys.get(&(fact.subject, fact.relation, fact.object, fact.time, fact.time)).copied()
    }

    pub fn find_duration(&self, fact: &DurationFact) -> Option<FactId> {
        self.keys.get(&(fact.subject, fact.relation, fact.object, fact.start, fact.end)).copied()
    }

    /// Facts between `s` and `o` (in that direction), ordered by time then
    /// relation id.
    pub fn pair_facts(&self, s: EntityId, o: EntityId) -> &[FactId] {
        self.pairs.get(&(s, o)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `S(s, o)` as `(relation, time)` pairs.
    pub fn interaction_sequence(&self, s: EntityId, o: EntityId) -> Vec<(RelationId, Timestamp)> {
        self.pair_facts(s, o)
            .iter()
            .map(|&f| {
                let g = self.fact(f);
                (g.relation, g.time)
            })
            .collect()
    }

    /// All `(s, o)` pairs that interacted, sorted.
    pub fn pairs(&self) -> Vec<(EntityId, EntityId)> {
        let mut out: Vec<_> = self.pairs.keys().copied().collect();
        out.sort_unstable();
        out
    }

    /// Directed relation items of `e`.
    pub fn items_of(&self, e: EntityId) -> &BTreeSet<RelItem> {
        static EMPTY: BTreeSet<RelItem> = BTreeSet::new();
        self.items.get(e as usize).unwrap_or(&EMPTY)
    }

    /// `R(e)`: relations incident to `e` in either direction.
    pub fn relations_of(&self, e: EntityId) -> BTreeSet<RelationId> {
        self.items_of(e).iter().map(|i| i.relation()).collect()
    }

    pub fn outgoing(&self, e: EntityId) -> &[FactId] {
        self.outgoing.get(e as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn incoming(&self, e: EntityId) -> &[FactId] {
        self.incoming.get(e as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn facts_with_relation(&self, r: RelationId) -> &[FactId] {
        self.by_relation.get(r as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_active(&self, e: EntityId) -> bool {
        !self.items_of(e).is_empty()
    }

    /// Entities that take part in at least one fact.
    pub fn num_entities(&self) -> usize {
        self.active_entities
    }

    /// Relations used by at least one fact.
    pub fn num_relations(&self) -> usize {
        self.active_relations
    }

    /// Active entity ids in increasing order.
    pub fn active_entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.items.iter().enumerate().filter(|(_, s)| !s.is_empty()).map(|(i, _)| i as EntityId)
    }

    /// Distinct fact start times, ascending.
    pub fn timestamps(&self) -> impl Iterator<Item = Timestamp> + '_ {
        self.by_time.keys().copied()
    }

    pub fn facts_at(&self, t: Timestamp) -> &[FactId] {
        self.by_time.get(&t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn time_range(&self) -> Option<(Timestamp, Timestamp)> {
        let lo = *self.by_time.keys().next()?;
        let hi = if self.duration { self.records.iter().map(|r| r.end).max()? } else { *self.by_time.keys().next_back()? };
        Some((lo, hi))
    }

    /// Splits the distinct timestamps into consecutive train / validation /
    /// test ranges.
    pub fn split_by_time(&self, fractions: [f64; 3]) -> Result<TimeSplit> {
        let sum: f64 = fractions.iter().sum();
        if fractions.iter().any(|&f| f.is_nan() || f < 0.0) || libm::fabs(sum - 1.0) > 1e-6 {
            return Err(CoreError::BadFractions(fractions));
        }
        let times: Vec<Timestamp> = self.timestamps().collect();
        let n = times.len();
        if n < 3 {
            return Err(CoreError::TooFewTimestamps(n));
        }
        let n_train = (libm::round(fractions[0] * n as f64) as usize).min(n);
        let n_upto_valid = (libm::round((fractions[0] + fractions[1]) * n as f64) as usize).clamp(n_train, n);
        let mut split = TimeSplit::default();
        for (i, t) in times.iter().enumerate() {
            let bucket = if i < n_train {
                &mut split.train
            } else if i < n_upto_valid {
                &mut split.valid
            } else {
                &mut split.test
            };
            bucket.extend_from_slice(self.facts_at(*t));
        }
        let at = |i: usize| times.get(i).copied().unwrap_or(Timestamp::MAX);
        split.boundaries = [at(n_train), at(n_upto_valid)];
        Ok(split)
    }

    /// A new store with the same label tables holding only `ids`.
    pub fn subset(&self, ids: &[FactId]) -> Self {
        let mut out = self.empty_like();
        for &id in ids {
            let r = self.records[id as usize];
            out.insert_record(r.fact, r.end);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TkgStore {
        let mut s = TkgStore::new();
        s.insert_labeled("a", "visit", "b", 3);
        s.insert_labeled("a", "call", "b", 1);
        s.insert_labeled("a", "visit", "b", 1);
        s.insert_labeled("b", "call", "c", 2);
        s
    }

    #[test]
    fn sequences_sorted_by_time_then_relation() {
        let s = toy();
        let (a, b) = (s.entities().get("a").unwrap(), s.entities().get("b").unwrap());
        let visit = s.relations().get("visit").unwrap();
        let call = s.relations().get("call").unwrap();
        // relation ids: visit = 0, call = 1
        assert_eq!(s.interaction_sequence(a, b), [(visit, 1), (call, 1), (visit, 3)]);
    }

    #[test]
    fn duplicates_dropped() {
        let mut s = toy();
        assert_eq!(s.insert_labeled("a", "visit", "b", 3), None);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn relations_cover_both_directions() {
        let s = toy();
        let b = s.entities().get("b").unwrap();
        assert_eq!(s.relations_of(b).len(), 2);
        assert_eq!(s.items_of(b).len(), 3);
        assert_eq!(s.num_entities(), 3);
        assert_eq!(s.num_relations(), 2);
    }

    #[test]
    fn self_loop_counts_once() {
        let mut s = TkgStore::new();
        s.insert_labeled("x", "r", "x", 0);
        assert_eq!(s.num_entities(), 1);
    }

    #[test]
    fn split_ten_timestamps() {
        let mut s = TkgStore::new();
        for t in 0..10 {
            s.insert_labeled("a", "r", "b", t);
        }
        let sp = s.split_by_time([0.6, 0.1, 0.3]).unwrap();
        assert_eq!((sp.train.len(), sp.valid.len(), sp.test.len()), (6, 1, 3));
        assert_eq!(sp.boundaries, [6, 7]);
    }

    #[test]
    fn split_rejects_tiny_stores() {
        let mut s = TkgStore::new();
        s.insert_labeled("a", "r", "b", 0);
        s.insert_labeled("a", "r", "b", 1);
        assert_eq!(s.split_by_time([0.6, 0.1, 0.3]).unwrap_err(), CoreError::TooFewTimestamps(2));
        assert!(matches!(s.split_by_time([0.6, 0.6, 0.3]), Err(CoreError::BadFractions(_))));
    }

    #[test]
    fn bad_interval() {
        let mut s = TkgStore::with_durations();
        let f = DurationFact { subject: 0, relation: 0, object: 1, start: 5, end: 2 };
        assert!(s.insert_duration(f).is_err());
    }
}
