//! Sequential stream driver: score, monitor, fold.
//!
//! Facts arrive in batches that share an arrival timestamp. Each batch is
//! scored against the model as it stood before the batch, then stored and
//! folded in arrival order. Scoring goes through a caller-supplied function
//! so a std front end can spread it over threads; folding is always
//! single-writer.

use alloc::vec::Vec;

use crate::config::ScoreConfig;
use crate::detect::{classify, AnomalyClass, Detector, Thresholds, Verdict};
use crate::model::Model;
use crate::monitor::{DriftLedger, Refresh};
use crate::store::{DurationFact, Timestamp};
use crate::summarize::{build_with_categories, universe};
use crate::update::{append_only, fold, observe, register_batch, EditLog};
use crate::Result;

/// Rejected arrivals of one entity in one role that extend its categories.
pub const REJECTED_SEEN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamConfig {
    /// Grow categories and fold accepted facts into the graphs. Rejected
    /// arrivals extend categories only once an entity repeats a role.
    /// Every arrival is stored either way, so later facts can find their
    /// precursors.
    pub updater: bool,
    /// Accept by class when set, else accept any fact with a finite static
    /// score.
    pub thresholds: Option<Thresholds>,
    /// Rebuild the model when the monitor fires.
    pub rebuild_on_refresh: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig { updater: true, thresholds: None, rebuild_on_refresh: false }
    }
}

/// Outcome for one arrival.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub fact: DurationFact,
    pub verdict: Verdict,
    /// Folded into categories and graphs.
    pub folded: bool,
    /// Model version the verdict was computed against.
    pub version: u64,
    /// What folding or observing this arrival changed.
    pub edits: Option<EditLog>,
}

/// Scores a batch against a model snapshot.
pub type Scorer<'a> = &'a dyn Fn(&Model, &ScoreConfig, &[DurationFact]) -> Vec<Verdict>;

pub fn score_sequential(model: &Model, cfg: &ScoreConfig, batch: &[DurationFact]) -> Vec<Verdict> {
    let d = Detector::new(model, *cfg);
    batch.iter().map(|&f| d.score_duration(f)).collect()
}

pub struct Stream {
    pub model: Model,
    pub ledger: DriftLedger,
    pub score: ScoreConfig,
    pub cfg: StreamConfig,
    pub refreshes: Vec<Refresh>,
}

impl Stream {
    pub fn new(model: Model, score: ScoreConfig, cfg: StreamConfig) -> Self {
        let ledger = DriftLedger::new(model.primary().coverage.negative.bits());
        Stream { model, ledger, score, cfg, refreshes: Vec::new() }
    }

    fn accept(&self, v: &Verdict) -> bool {
        match &self.cfg.thresholds {
            Some(th) => classify(v, th, false) == AnomalyClass::Valid,
            None => v.static_score < crate::SENTINEL,
        }
    }

    /// Processes facts that arrived together at `arrival`. Entity and
    /// relation ids must already be interned in the model's store.
    pub fn push_batch(&mut self, arrival: Timestamp, batch: &[DurationFact], scorer: Scorer<'_>) -> Result<Vec<Scored>> {
        if self.cfg.updater {
            let triples: Vec<_> = batch.iter().map(|f| (f.subject, f.relation, f.object)).collect();
            register_batch(&mut self.model, &triples);
        }
        let verdicts = scorer(&self.model, &self.score, batch);
        let version = self.model.version;
        let mut out = Vec::with_capacity(batch.len());
        for (&fact, mut verdict) in batch.iter().zip(verdicts) {
            if let Some(th) = &self.cfg.thresholds {
                verdict.class = classify(&verdict, th, false);
            }
            let u = universe(&self.model.store);
            if let Some(r) = self.ledger.record(arrival, u, verdict.associated())? {
                self.on_refresh(r)?;
            }
            let id = append_only(&mut self.model, fact)?;
            let accepted = self.accept(&verdict);
            let folded = self.cfg.updater && id.is_some() && accepted;
            let edits = match (self.cfg.updater, id) {
                (true, Some(id)) if folded => Some(fold(&mut self.model, id)?),
                (true, Some(id)) => {
                    // one rejected arrival is not enough to reveal a new role
                    let categories = observe(&mut self.model, id, REJECTED_SEEN);
                    (!categories.is_empty()).then(|| EditLog { fact: Some(id), version: self.model.version, categories, ..EditLog::default() })
                }
                _ => None,
            };
            out.push(Scored { fact, verdict, folded, version, edits });
        }
        Ok(out)
    }

    /// Splits `facts` into runs of equal start time and processes each.
    pub fn run(&mut self, facts: &[DurationFact], scorer: Scorer<'_>) -> Result<Vec<Scored>> {
        let mut out = Vec::with_capacity(facts.len());
        for batch in facts.chunk_by(|a, b| a.start == b.start) {
            out.extend(self.push_batch(batch[0].start, batch, scorer)?);
        }
        Ok(out)
    }

    /// Like [`Stream::run`] with explicit arrival times, which may differ
    /// from the facts' own times.
    pub fn run_arrivals(&mut self, arrivals: &[(Timestamp, DurationFact)], scorer: Scorer<'_>) -> Result<Vec<Scored>> {
        let mut out = Vec::with_capacity(arrivals.len());
        for run in arrivals.chunk_by(|a, b| a.0 == b.0) {
            let batch: Vec<DurationFact> = run.iter().map(|p| p.1).collect();
            out.extend(self.push_batch(run[0].0, &batch, scorer)?);
        }
        Ok(out)
    }

    /// Closes the last open timestamp.
    pub fn finish(&mut self) -> Result<Option<Refresh>> {
        let r = self.ledger.flush()?;
        if let Some(r) = r {
            self.on_refresh(r)?;
        }
        Ok(r)
    }

    fn on_refresh(&mut self, r: Refresh) -> Result<()> {
        log::info!("monitor: {:.1} online bits over {:.1} at t={}", r.online_bits, r.baseline_bits, r.time);
        self.refreshes.push(r);
        if self.cfg.rebuild_on_refresh {
            let store = self.model.store.clone();
            let cfg = self.model.config;
            let min_support = cfg.min_support.unwrap_or_else(|| crate::category::default_min_support(store.num_entities()));
            let cat = crate::category::CategoryFunction::induce(&store, cfg.k, cfg.max_combination_size, min_support, cfg.aggregate(), cfg.max_mined);
            let version = self.model.version + 1;
            self.model = build_with_categories(store, cat, &cfg)?.0;
            self.model.version = version;
            self.ledger.reset(self.model.primary().coverage.negative.bits());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BuildConfig;
    use crate::store::TkgStore;
    use crate::summarize::build;

    fn df(s: u32, r: u32, o: u32, t: u32) -> DurationFact {
        DurationFact { subject: s, relation: r, object: o, start: t, end: t }
    }

    #[test]
    fn batches_score_against_snapshot() {
        let mut s = TkgStore::new();
        for t in 0..12u32 {
            s.insert_labeled("a", "meet", "x", 2 * t);
            s.insert_labeled("b", "meet", "y", 2 * t);
            s.insert_labeled("a", "sign", "x", 2 * t + 1);
            s.insert_labeled("b", "sign", "y", 2 * t + 1);
        }
        let (m, _) = build(s, &BuildConfig::default()).unwrap();
        let (a, x) = (m.store.entities().get("a").unwrap(), m.store.entities().get("x").unwrap());
        let meet = m.store.relations().get("meet").unwrap();
        let mut st = Stream::new(m, ScoreConfig::default(), StreamConfig::default());
        // the same fact twice in one batch: both see the pre-batch model
        let out = st.run(&[df(a, meet, x, 30), df(a, meet, x, 30)], &score_sequential).unwrap();
        assert_eq!(out[0].verdict, out[1].verdict);
        assert_eq!(out[0].version, out[1].version);
        assert!(out[0].folded);
        assert!(!out[1].folded);
        st.finish().unwrap();
        assert_eq!(st.ledger.observed(), 1);
    }
}
