//! Drift accounting over post-build timestamps.
//!
//! Each completed timestamp adds `logC(U − |A^m|, |A^-|)` to the online
//! bits, where `|A^m|` counts arrivals the graph explained and `|A^-|` the
//! rest. Once the online bits pass the build's negative-term bits the model
//! is due for a rebuild.

use crate::mdl::log2_binomial;
use crate::store::Timestamp;
use crate::Result;

/// Counts for one timestamp.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TimestampCounts {
    pub time: Timestamp,
    /// `|E|² |R|` when the timestamp was observed.
    pub universe: u64,
    pub explained: u64,
    pub unexplained: u64,
}

impl TimestampCounts {
    pub fn bits(&self) -> Result<f64> {
        log2_binomial(self.universe.saturating_sub(self.explained), self.unexplained)
    }
}

/// Raised once per rebuild cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Refresh {
    pub time: Timestamp,
    pub online_bits: f64,
    pub baseline_bits: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DriftLedger {
    baseline: f64,
    online: f64,
    observed: usize,
    fired: bool,
    pending: Option<TimestampCounts>,
}

impl DriftLedger {
    pub fn new(baseline_bits: f64) -> Self {
        DriftLedger { baseline: baseline_bits, ..Default::default() }
    }

    pub fn baseline_bits(&self) -> f64 {
        self.baseline
    }

    pub fn online_bits(&self) -> f64 {
        self.online
    }

    /// Completed timestamps since the last reset.
    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn should_refresh(&self) -> bool {
        self.online > self.baseline
    }

    /// Adds one completed timestamp. Returns the refresh event the first
    /// time the online bits exceed the baseline in this cycle.
    pub fn observe(&mut self, counts: TimestampCounts) -> Result<Option<Refresh>> {
        self.online += counts.bits()?;
        self.observed += 1;
        if !self.fired && self.should_refresh() {
            self.fired = true;
            return Ok(Some(Refresh { time: counts.time, online_bits: self.online, baseline_bits: self.baseline }));
        }
        Ok(None)
    }

    /// Counts one arrival. A change of timestamp closes the previous one.
    pub fn record(&mut self, time: Timestamp, universe: u64, explained: bool) -> Result<Option<Refresh>> {
        let mut event = None;
        match &mut self.pending {
            Some(p) if p.time == time => {
                p.universe = universe;
            }
            _ => {
                event = self.flush()?;
                self.pending = Some(TimestampCounts { time, universe, explained: 0, unexplained: 0 });
            }
        }
        let p = self.pending.as_mut().expect("pending set above");
        if explained {
            p.explained += 1;
        } else {
            p.unexplained += 1;
        }
        Ok(event)
    }

    /// Closes the open timestamp, if any.
    pub fn flush(&mut self) -> Result<Option<Refresh>> {
        match self.pending.take() {
            Some(p) => self.observe(p),
            None => Ok(None),
        }
    }

    /// Starts a new cycle after a rebuild.
    pub fn reset(&mut self, baseline_bits: f64) {
        *self = DriftLedger::new(baseline_bits);
    }
}
