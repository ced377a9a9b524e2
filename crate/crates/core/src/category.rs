//! Entity categories induced from relation co-occurrence.
//!
//! A category is an anonymous set of directed relation items. Entities that
//! share those items belong to it. Induction runs in three steps: frequent
//! combinations are mined with an Eclat-style depth-first search over entity
//! lists, combinations whose entity or relation sets nearly coincide are
//! aggregated until nothing changes, and finally the catalog is walked from
//! the most covering combination down, assigning up to `k` categories per
//! entity.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::store::{EntityId, RelItem, TkgStore};
use crate::FxHashMap;

pub type CategoryId = u32;

/// A relation combination and the entities that exhibit all of it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Combination {
    /// Sorted, deduplicated.
    pub items: Vec<RelItem>,
    /// Sorted, deduplicated.
    pub entities: Vec<EntityId>,
}

impl Combination {
    pub fn support(&self) -> usize {
        self.entities.len()
    }
}

/// `max(2, 0.1% of |E|)`.
pub fn default_min_support(num_entities: usize) -> usize {
    (num_entities / 1000).max(2)
}

/// Sorts by support descending, then by item tuple.
pub fn sort_catalog(combos: &mut [Combination]) {
    combos.sort_by(|a, b| b.support().cmp(&a.support()).then_with(|| a.items.cmp(&b.items)));
}

fn intersect(a: &[EntityId], b: &[EntityId]) -> Vec<EntityId> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn union<T: Ord + Copy>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out: Vec<T> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn overlap_count<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Containment overlap `|a ∩ b| / min(|a|, |b|)`, compared without division.
fn overlaps<T: Ord>(a: &[T], b: &[T], threshold: f64) -> bool {
    let small = a.len().min(b.len());
    if small == 0 {
        return false;
    }
    overlap_count(a, b) as f64 >= threshold * small as f64
}

/// Every combination of at most `max_size` directed items shared by at least
/// `min_support` active entities, sorted by [`sort_catalog`].
pub fn mine_frequent_combinations(store: &TkgStore, max_size: usize, min_support: usize) -> Vec<Combination> {
    let min_support = min_support.max(1);
    let mut lists: BTreeMap<RelItem, Vec<EntityId>> = BTreeMap::new();
    for e in store.active_entities() {
        for &item in store.items_of(e) {
            lists.entry(item).or_default().push(e);
        }
    }
    let roots: Vec<(RelItem, Vec<EntityId>)> = lists.into_iter().filter(|(_, es)| es.len() >= min_support).collect();
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    if max_size > 0 {
        eclat(&mut prefix, &roots, max_size, min_support, &mut out);
    }
    sort_catalog(&mut out);
    out
}

fn eclat(prefix: &mut Vec<RelItem>, candidates: &[(RelItem, Vec<EntityId>)], max_size: usize, min_support: usize, out: &mut Vec<Combination>) {
    for (i, (item, entities)) in candidates.iter().enumerate() {
        prefix.push(*item);
        out.push(Combination { items: prefix.clone(), entities: entities.clone() });
        if prefix.len() < max_size {
            let next: Vec<_> = candidates[i + 1..]
                .iter()
                .filter_map(|(other, es)| {
                    let common = intersect(entities, es);
                    (common.len() >= min_support).then_some((*other, common))
                })
                .collect();
            if !next.is_empty() {
                eclat(prefix, &next, max_size, min_support, out);
            }
        }
        prefix.pop();
    }
}

/// Knobs for [`aggregate`].
#[derive(Clone, Copy, Debug)]
pub struct AggregateConfig {
    pub overlap: f64,
    pub max_rounds: usize,
    /// Growth stops once the catalog holds this many combinations.
    pub max_catalog: usize,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig { overlap: 0.9, max_rounds: 20, max_catalog: 4000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AggregateStats {
    pub rounds: usize,
    pub converged: bool,
}

/// Merges near-duplicate combinations until a fixpoint.
///
/// Two rules, applied to every pair in which at least one side changed in the
/// previous round:
///
/// * entity sets overlap: add `(Ri ∪ Rj, Ei ∩ Ej)`;
/// * relation sets overlap: add `(Ri ∩ Rj, Ei ∪ Ej)`.
///
/// A result whose item set already exists only replaces the existing entry
/// when it covers more entities. The output is sorted by [`sort_catalog`].
pub fn aggregate(mut combos: Vec<Combination>, cfg: AggregateConfig) -> (Vec<Combination>, AggregateStats) {
    let mut index: BTreeMap<Vec<RelItem>, usize> = BTreeMap::new();
    combos.retain(|c| !c.items.is_empty() && !c.entities.is_empty());
    let mut deduped: Vec<Combination> = Vec::with_capacity(combos.len());
    for c in combos {
        match index.get(&c.items) {
            Some(&i) => {
                if c.entities.len() > deduped[i].entities.len() {
                    deduped[i] = c;
                }
            }
            None => {
                index.insert(c.items.clone(), deduped.len());
                deduped.push(c);
            }
        }
    }
    let mut combos = deduped;
    let mut fresh = alloc::vec![true; combos.len()];
    let mut stats = AggregateStats::default();

    'rounds: while stats.rounds < cfg.max_rounds {
        stats.rounds += 1;
        let n = combos.len();
        let mut next_fresh = alloc::vec![false; n];
        let mut changed = false;
        for i in 0..n {
            for j in i + 1..n {
                if !(fresh[i] || fresh[j]) {
                    continue;
                }
                let mut produced: [Option<Combination>; 2] = [None, None];
                if overlaps(&combos[i].entities, &combos[j].entities, cfg.overlap) {
                    let entities = intersect(&combos[i].entities, &combos[j].entities);
                    let items = union(&combos[i].items, &combos[j].items);
                    if !entities.is_empty() {
                        produced[0] = Some(Combination { items, entities });
                    }
                }
                if overlaps(&combos[i].items, &combos[j].items, cfg.overlap) {
                    let items: Vec<RelItem> = {
                        let set: BTreeSet<_> = combos[i].items.iter().collect();
                        combos[j].items.iter().filter(|x| set.contains(x)).copied().collect()
                    };
                    let entities = union(&combos[i].entities, &combos[j].entities);
                    produced[1] = Some(Combination { items, entities });
                }
                for c in produced.into_iter().flatten() {
                    match index.get(&c.items) {
                        Some(&at) => {
                            if c.entities.len() > combos[at].entities.len() {
                                combos[at] = c;
                                if at < next_fresh.len() {
                                    next_fresh[at] = true;
                                }
                                changed = true;
                            }
                        }
                        None => {
                            index.insert(c.items.clone(), combos.len());
                            combos.push(c);
                            next_fresh.push(true);
                            changed = true;
                            if combos.len() >= cfg.max_catalog {
                                log::warn!("category catalog reached {} combinations; stopping aggregation", combos.len());
                                break 'rounds;
                            }
                        }
                    }
                }
            }
        }
        next_fresh.resize(combos.len(), true);
        fresh = next_fresh;
        if !changed {
            stats.converged = true;
            break;
        }
    }
    if !stats.converged && combos.len() < cfg.max_catalog {
        log::warn!("category aggregation hit the {}-round cap before converging", cfg.max_rounds);
    }
    sort_catalog(&mut combos);
    (combos, stats)
}

/// One category: its defining items and how many entities carry it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Category {
    pub items: Vec<RelItem>,
    /// `n^c`.
    pub count: u64,
    /// Built from a single incident relation because no mined combination
    /// covered the entity.
    pub fallback: bool,
}

/// A catalog entry kept after induction so the updater can categorize
/// entities it has never seen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogEntry {
    pub items: Vec<RelItem>,
    pub support: u64,
}

/// The category function `C`.
#[derive(Clone, Debug, Default)]
pub struct CategoryFunction {
    categories: Vec<Category>,
    by_items: FxHashMap<Vec<RelItem>, CategoryId>,
    assigned: Vec<Vec<CategoryId>>,
    /// `R(e)` as the updater knows it, sorted.
    known: Vec<Vec<RelItem>>,
    catalog: Vec<CatalogEntry>,
    catalog_by_item: BTreeMap<RelItem, Vec<u32>>,
    k: usize,
}

impl CategoryFunction {
    /// Greedy selection over a catalog sorted by [`sort_catalog`].
    ///
    /// Each combination becomes a category for those of its entities that
    /// still hold fewer than `k` categories. Active entities left without any
    /// category get singleton categories for up to `k` of their items.
    pub fn select(store: &TkgStore, catalog: &[Combination], k: usize) -> Self {
        let k = k.max(1);
        let mut cf = CategoryFunction { k, ..Default::default() };
        cf.assigned.resize_with(store.entities().len(), Vec::new);
        cf.known = (0..store.entities().len() as EntityId).map(|e| store.items_of(e).iter().copied().collect()).collect();
        for combo in catalog {
            cf.push_catalog(combo.items.clone(), combo.support() as u64);
            let members: Vec<EntityId> = combo.entities.iter().copied().filter(|&e| cf.categories_of(e).len() < k).collect();
            if members.is_empty() {
                continue;
            }
            let c = cf.category_for(&combo.items, false);
            for e in members {
                cf.assign(e, c);
            }
        }
        for e in store.active_entities() {
            if !cf.categories_of(e).is_empty() {
                continue;
            }
            for &item in store.items_of(e).iter().take(k) {
                let c = cf.category_for(&[item], true);
                cf.assign(e, c);
            }
        }
        cf
    }

    /// Mines, aggregates and selects in one go.
    pub fn induce(store: &TkgStore, k: usize, max_size: usize, min_support: usize, agg: AggregateConfig, max_mined: usize) -> Self {
        let mut mined = mine_frequent_combinations(store, max_size, min_support);
        if mined.len() > max_mined {
            log::warn!("keeping the {} most supported of {} frequent combinations", max_mined, mined.len());
            mined.truncate(max_mined);
        }
        let (catalog, stats) = aggregate(mined, agg);
        log::debug!("catalog: {} combinations after {} rounds", catalog.len(), stats.rounds);
        Self::select(store, &catalog, k)
    }

    /// Rebuilds a function from persisted parts.
    pub fn from_parts(k: usize, categories: Vec<Category>, assignment: Vec<Vec<CategoryId>>, known: Vec<Vec<RelItem>>, catalog: Vec<CatalogEntry>) -> Self {
        let mut cf = CategoryFunction { k, known, ..Default::default() };
        for entry in catalog {
            cf.push_catalog(entry.items, entry.support);
        }
        for (i, c) in categories.into_iter().enumerate() {
            cf.by_items.insert(c.items.clone(), i as CategoryId);
            cf.categories.push(c);
        }
        cf.assigned = assignment;
        cf
    }

    fn push_catalog(&mut self, items: Vec<RelItem>, support: u64) {
        let at = self.catalog.len() as u32;
        for &item in &items {
            self.catalog_by_item.entry(item).or_default().push(at);
        }
        self.catalog.push(CatalogEntry { items, support });
    }

    fn category_for(&mut self, items: &[RelItem], fallback: bool) -> CategoryId {
        if let Some(&c) = self.by_items.get(items) {
            return c;
        }
        let c = self.categories.len() as CategoryId;
        self.categories.push(Category { items: items.to_vec(), count: 0, fallback });
        self.by_items.insert(items.to_vec(), c);
        c
    }

    /// Gives `e` category `c`; a no-op when it already has it.
    pub fn assign(&mut self, e: EntityId, c: CategoryId) -> bool {
        let e = e as usize;
        if self.assigned.len() <= e {
            self.assigned.resize_with(e + 1, Vec::new);
        }
        if self.assigned[e].contains(&c) {
            return false;
        }
        self.assigned[e].push(c);
        self.categories[c as usize].count += 1;
        true
    }

    /// Adds `item` to the known `R(e)`. When it is new there, the
    /// categories of `e` become what selection would give it now: the first
    /// `k` catalog combinations inside the known `R(e)`, else singletons.
    /// Each known item none of those holds adds the best supported one
    /// that does, or its singleton. Returns the categories added.
    pub fn extend_for_item(&mut self, e: EntityId, item: RelItem) -> Vec<CategoryId> {
        if self.known.len() <= e as usize {
            self.known.resize_with(e as usize + 1, Vec::new);
        }
        let known = &mut self.known[e as usize];
        match known.binary_search(&item) {
            Ok(_) => return Vec::new(),
            Err(at) => known.insert(at, item),
        }
        self.reselect(e)
    }

    fn reselect(&mut self, e: EntityId) -> Vec<CategoryId> {
        let known = self.known[e as usize].clone();
        let mut want: Vec<Vec<RelItem>> = Vec::new();
        let mut seen = alloc::collections::BTreeSet::new();
        for &item in &known {
            if let Some(list) = self.catalog_by_item.get(&item) {
                seen.extend(list.iter().copied());
            }
        }
        // catalog order is selection order
        for at in seen {
            let items = &self.catalog[at as usize].items;
            if items.iter().all(|i| known.binary_search(i).is_ok()) {
                want.push(items.clone());
                if want.len() == self.k {
                    break;
                }
            }
        }
        let fallback = want.is_empty();
        if fallback {
            want.extend(known.iter().take(self.k).map(|&i| alloc::vec![i]));
        }
        let mut want: Vec<CategoryId> = want.iter().map(|items| self.category_for(items, fallback)).collect();
        for &i in &known {
            if want.iter().any(|&c| self.categories[c as usize].items.contains(&i)) {
                continue;
            }
            let best = self.catalog_by_item.get(&i).and_then(|list| {
                list.iter().map(|&at| &self.catalog[at as usize].items).find(|items| items.iter().all(|x| known.binary_search(x).is_ok())).cloned()
            });
            let c = match best {
                Some(items) => self.category_for(&items, false),
                None => self.category_for(&[i], true),
            };
            want.push(c);
        }
        for c in self.categories_of(e).to_vec() {
            if !want.contains(&c) {
                self.unassign(e, c);
            }
        }
        want.into_iter().filter(|&c| self.assign(e, c)).collect()
    }

    fn unassign(&mut self, e: EntityId, c: CategoryId) {
        let list = &mut self.assigned[e as usize];
        if let Some(at) = list.iter().position(|&x| x == c) {
            list.remove(at);
            self.categories[c as usize].count -= 1;
        }
    }

    pub fn categories_of(&self, e: EntityId) -> &[CategoryId] {
        self.assigned.get(e as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `R(e)` as the updater knows it.
    pub fn known_items(&self, e: EntityId) -> &[RelItem] {
        self.known.get(e as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn known(&self) -> &[Vec<RelItem>] {
        &self.known
    }

    pub fn has(&self, e: EntityId, c: CategoryId) -> bool {
        self.categories_of(e).contains(&c)
    }

    pub fn category(&self, c: CategoryId) -> &Category {
        &self.categories[c as usize]
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// `|C_E|`.
    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn count(&self, c: CategoryId) -> u64 {
        self.categories[c as usize].count
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[Vec<CategoryId>] {
        &self.assigned
    }
}
