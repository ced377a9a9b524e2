//! Batch scoring over threads and the snapshot a writer swaps.

use std::sync::{Arc, RwLock};

use anot_core::{Detector, DurationFact, Model, ScoreConfig, Verdict};
use rayon::prelude::*;

/// Same verdicts as [`anot_core::stream::score_sequential`], in input
/// order, spread over the current rayon pool.
pub fn score_parallel(model: &Model, cfg: &ScoreConfig, batch: &[DurationFact]) -> Vec<Verdict> {
    let d = Detector::new(model, *cfg);
    batch.par_iter().with_min_len(16).map(|&f| d.score_duration(f)).collect()
}

/// Runs `f` on a pool of `threads` workers; 0 means one per core.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}), running on the global pool");
            f()
        }
    }
}

/// The model readers score against. One writer publishes new versions;
/// readers holding an older `Arc` finish on it undisturbed.
#[derive(Debug)]
pub struct Snapshots {
    current: RwLock<Arc<Model>>,
}

impl Snapshots {
    pub fn new(model: Model) -> Self {
        Snapshots { current: RwLock::new(Arc::new(model)) }
    }

    pub fn current(&self) -> Arc<Model> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Publishes `model` unless it carries the version already visible.
    /// Returns whether readers now see a new snapshot.
    pub fn swap(&self, model: Model) -> bool {
        let mut cur = self.current.write().unwrap_or_else(|e| e.into_inner());
        if cur.version == model.version {
            return false;
        }
        *cur = Arc::new(model);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anot_core::stream::score_sequential;
    use anot_core::summarize::build;
    use anot_core::synth::{generate, PlantedConfig};
    use anot_core::update::apply;
    use anot_core::BuildConfig;

    fn model() -> (Model, Vec<DurationFact>) {
        let w = generate(&PlantedConfig { timestamps: 600, seed: 4, ..Default::default() });
        let cut = w.facts.len() * 3 / 4;
        let (store, rest) = (w.store.subset(&(0..cut as u32).collect::<Vec<_>>()), &w.facts[cut..]);
        let cfg = BuildConfig { window: 2, chain_max_gap: Some(3), ..Default::default() };
        let (m, _) = build(store, &cfg).unwrap();
        let batch = rest.iter().map(|f| DurationFact { subject: f.subject, relation: f.relation, object: f.object, start: f.time, end: f.time }).collect();
        (m, batch)
    }

    #[test]
    fn parallel_matches_sequential() {
        let (m, batch) = model();
        let cfg = ScoreConfig::from_build(&m.config);
        let seq = score_sequential(&m, &cfg, &batch);
        for threads in [1, 8] {
            assert_eq!(with_threads(threads, || score_parallel(&m, &cfg, &batch)), seq);
        }
    }

    #[test]
    fn readers_keep_their_snapshot() {
        let (m, batch) = model();
        let snaps = Snapshots::new(m.clone());
        let old = snaps.current();
        assert!(!snaps.swap(m.clone()));
        let mut next = m;
        let f = batch[0];
        apply(&mut next, anot_core::Fact::new(f.subject, f.relation, f.object, f.start)).unwrap();
        assert!(next.version > old.version);
        assert!(snaps.swap(next));
        assert_eq!(old.store.len() + 1, snaps.current().store.len());
        std::thread::scope(|s| {
            let h = s.spawn(|| snaps.current().version);
            assert!(h.join().unwrap() > old.version);
        });
    }
}
