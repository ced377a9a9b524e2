//! Synthetic worlds with known rules, for tests and benchmarks.
//!
//! Three entity types: `P`, `Q` and bystanders. Three planted rules:
//! `A = (P, a, Q)`, `B = (P, b, Q)` and `C = (Q, c, Q)`. Facts come in
//! episodes on a `(p, q)` pair that alternate `a` and `b` a few timestamps
//! apart, which plants the chain edges `A → B` and `B → A`. An `a` fact
//! on `q` next to a `c` fact `(h, c, q)` closes into `(p, b, h)`, which
//! starts a child episode and plants the triadic edge `(A, C) → B`.
//! Bystanders exchange a handful of noise relations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::store::{EntityId, Fact, RelationId, Timestamp, TkgStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityType {
    P,
    Q,
    Bystander,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantedConfig {
    pub timestamps: Timestamp,
    pub p_entities: usize,
    pub q_entities: usize,
    /// Episodes running at once.
    pub concurrent: usize,
    /// Facts per episode, inclusive range.
    pub episode_len: (u32, u32),
    /// Gap between consecutive episode facts.
    pub gap: (u32, u32),
    /// Gap between the later opening fact and the closing fact.
    pub closing_gap: (u32, u32),
    /// Chance that an `a` fact spawns a child episode through a closing,
    /// while fewer than `2 × concurrent` episodes run.
    pub child_prob: f64,
    pub noise_facts: usize,
    pub noise_relations: usize,
    /// Noise facts fall before this share of the timeline.
    pub noise_horizon: f64,
    /// Share of `P`/`Q` entities held back until `late_from`.
    pub late_fraction: f64,
    pub late_from: Timestamp,
    /// From this timestamp on the planted relations are replaced by fresh
    /// ones with the same roles.
    pub swap_at: Option<Timestamp>,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            timestamps: 3200,
            p_entities: 40,
            q_entities: 60,
            concurrent: 3,
            episode_len: (40, 70),
            gap: (2, 3),
            closing_gap: (2, 3),
            child_prob: 0.05,
            noise_facts: 250,
            noise_relations: 100,
            noise_horizon: 0.5,
            late_fraction: 0.0,
            late_from: 0,
            swap_at: None,
            seed: 0,
        }
    }
}

/// Generated facts plus the ground truth behind them.
#[derive(Clone, Debug)]
pub struct PlantedWorld {
    pub store: TkgStore,
    /// Facts in time order; `store` ids follow the same order.
    pub facts: Vec<Fact>,
    /// Type by entity id.
    pub types: Vec<EntityType>,
    /// `a`, `b`, `c`.
    pub relations: [RelationId; 3],
    /// Replacements after the swap, when configured.
    pub swapped: Option<[RelationId; 3]>,
    pub noise: Vec<RelationId>,
    /// Entities only used from `late_from` on.
    pub late: BTreeSet<EntityId>,
}

impl PlantedWorld {
    pub fn entity_type(&self, e: EntityId) -> EntityType {
        self.types[e as usize]
    }

    /// The planted rules as `(subject type, relation, object type)`.
    pub fn planted_rules(&self) -> [(EntityType, RelationId, EntityType); 3] {
        let [a, b, c] = self.relations;
        [(EntityType::P, a, EntityType::Q), (EntityType::P, b, EntityType::Q), (EntityType::Q, c, EntityType::Q)]
    }

    /// Whether a triple fits the generating process. Noise relations take
    /// any types; planted ones only their own signature.
    pub fn is_valid_triple(&self, s: EntityId, r: RelationId, o: EntityId) -> bool {
        if self.noise.contains(&r) {
            return true;
        }
        let (ts, to) = match (self.types.get(s as usize), self.types.get(o as usize)) {
            (Some(&a), Some(&b)) => (a, b),
            _ => return false,
        };
        let mut sets = alloc::vec![self.relations];
        sets.extend(self.swapped);
        sets.iter()
            .any(|&[a, b, c]| ((r == a || r == b) && ts == EntityType::P && to == EntityType::Q) || (r == c && ts == EntityType::Q && to == EntityType::Q))
    }
}

struct Episode {
    p: EntityId,
    o: EntityId,
    next_a: bool,
    next_time: Timestamp,
    remaining: u32,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (u32, u32)) -> u32 {
    rng.gen_range(lo..=hi.max(lo))
}

/// Generates a world. The same config always gives the same world.
pub fn generate(cfg: &PlantedConfig) -> PlantedWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = TkgStore::new();
    let relations = [store.intern_relation("a"), store.intern_relation("b"), store.intern_relation("c")];
    let swapped = cfg.swap_at.map(|_| [store.intern_relation("a2"), store.intern_relation("b2"), store.intern_relation("c2")]);
    let noise: Vec<RelationId> = (0..cfg.noise_relations).map(|i| store.intern_relation(&format!("n{i}"))).collect();

    let mut types = Vec::new();
    let mut pool = |store: &mut TkgStore, prefix: &str, n: usize, ty: EntityType| -> Vec<EntityId> {
        (0..n)
            .map(|i| {
                let e = store.intern_entity(&format!("{prefix}{i}"));
                if types.len() <= e as usize {
                    types.resize(e as usize + 1, ty);
                }
                types[e as usize] = ty;
                e
            })
            .collect()
    };
    let ps = pool(&mut store, "p", cfg.p_entities, EntityType::P);
    let qs = pool(&mut store, "q", cfg.q_entities, EntityType::Q);
    let bystanders = pool(&mut store, "x", 2 * cfg.noise_facts, EntityType::Bystander);

    let late_count = |n: usize| ((n as f64) * cfg.late_fraction) as usize;
    let mut late = BTreeSet::new();
    late.extend(ps[ps.len() - late_count(ps.len())..].iter().copied());
    late.extend(qs[qs.len() - late_count(qs.len())..].iter().copied());

    let pick = |rng: &mut ChaCha8Rng, from: &[EntityId], t: Timestamp, avoid: EntityId| -> EntityId {
        loop {
            let e = *from.choose(rng).expect("non-empty pool");
            if e != avoid && (t >= cfg.late_from || !late.contains(&e)) {
                return e;
            }
        }
    };
    let rel = |t: Timestamp, i: usize| match (cfg.swap_at, swapped) {
        (Some(at), Some(sw)) if t >= at => sw[i],
        _ => relations[i],
    };

    let mut pending: BTreeMap<Timestamp, Vec<(EntityId, usize, EntityId)>> = BTreeMap::new();
    let mut episodes: Vec<Episode> = Vec::new();
    let mut raw: Vec<Fact> = Vec::new();
    let new_episode = |rng: &mut ChaCha8Rng, p, o, next_a, next_time| Episode { p, o, next_a, next_time, remaining: draw(rng, cfg.episode_len) };

    for t in 0..cfg.timestamps {
        if episodes.len() < cfg.concurrent && rng.gen_bool(0.1) {
            let p = pick(&mut rng, &ps, t, EntityId::MAX);
            let q = pick(&mut rng, &qs, t, EntityId::MAX);
            let ep = new_episode(&mut rng, p, q, true, t);
            episodes.push(ep);
        }
        if let Some(list) = pending.remove(&t) {
            for (s, i, o) in list {
                raw.push(Fact::new(s, rel(t, i), o, t));
            }
        }
        let mut children = Vec::new();
        let running = episodes.len();
        for ep in episodes.iter_mut().filter(|e| e.next_time == t) {
            let i = if ep.next_a { 0 } else { 1 };
            raw.push(Fact::new(ep.p, rel(t, i), ep.o, t));
            if ep.next_a && running + children.len() < 2 * cfg.concurrent && rng.gen_bool(cfg.child_prob) {
                let h = pick(&mut rng, &qs, t, ep.o);
                let tc = t + rng.gen_range(0..=1);
                let close = tc + draw(&mut rng, cfg.closing_gap);
                if tc == t {
                    raw.push(Fact::new(h, rel(t, 2), ep.o, t));
                } else {
                    pending.entry(tc).or_default().push((h, 2, ep.o));
                }
                children.push((ep.p, h, close));
            }
            ep.next_a = !ep.next_a;
            ep.next_time = t + draw(&mut rng, cfg.gap);
            ep.remaining -= 1;
        }
        episodes.retain(|e| e.remaining > 0);
        for (p, h, close) in children {
            let ep = new_episode(&mut rng, p, h, false, close);
            episodes.push(ep);
        }
    }

    for (i, pair) in bystanders.chunks(2).enumerate() {
        if pair.len() < 2 || noise.is_empty() {
            break;
        }
        let horizon = libm::ceil(cfg.timestamps as f64 * cfg.noise_horizon) as Timestamp;
        let t = rng.gen_range(0..horizon.clamp(1, cfg.timestamps.max(1)));
        raw.push(Fact::new(pair[0], noise[i % noise.len()], pair[1], t));
    }

    // stable sort keeps emission order inside a timestamp
    raw.sort_by_key(|f| f.time);
    let mut facts = Vec::with_capacity(raw.len());
    for f in raw {
        if f.time < cfg.timestamps && store.insert(f).is_some() {
            facts.push(f);
        }
    }
    PlantedWorld { store, facts, types, relations, swapped, noise, late }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_typed() {
        let cfg = PlantedConfig { timestamps: 600, seed: 3, ..Default::default() };
        let w1 = generate(&cfg);
        let w2 = generate(&cfg);
        assert_eq!(w1.facts, w2.facts);
        assert!(w1.facts.len() > 100);
        for f in &w1.facts {
            assert!(w1.is_valid_triple(f.subject, f.relation, f.object), "{f:?}");
        }
        assert!(w1.facts.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn late_entities_wait() {
        let cfg = PlantedConfig { timestamps: 1500, late_fraction: 0.2, late_from: 1000, seed: 1, ..Default::default() };
        let w = generate(&cfg);
        assert!(!w.late.is_empty());
        for f in w.facts.iter().filter(|f| f.time < 1000) {
            assert!(!w.late.contains(&f.subject) && !w.late.contains(&f.object));
        }
        assert!(w.facts.iter().any(|f| w.late.contains(&f.subject) || w.late.contains(&f.object)));
    }

    #[test]
    fn swap_changes_relations() {
        let cfg = PlantedConfig { timestamps: 800, swap_at: Some(400), noise_facts: 0, seed: 2, ..Default::default() };
        let w = generate(&cfg);
        let sw = w.swapped.unwrap();
        for f in &w.facts {
            assert_eq!(f.time >= 400, sw.contains(&f.relation), "{f:?}");
        }
    }
}
