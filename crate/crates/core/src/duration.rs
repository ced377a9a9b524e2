//! Interval facts: one rule graph per timestamp projection.
//!
//! The node phase runs once and every projection shares its static rules.
//! Only edges differ. Scoring averages the four temporal scores; a
//! sentinel enters the mean at its value, so one conflicting projection is
//! enough to flag a fact.

use crate::category::CategoryFunction;
use crate::config::BuildConfig;
use crate::model::Model;
use crate::store::TkgStore;
use crate::summarize::{build_with_categories, BuildStats};
use crate::{CoreError, Result};

/// Builds the ST-ST, ED-ED, ST-ED and ED-ST graphs, in that order.
pub fn build_four(store: TkgStore, cat: CategoryFunction, cfg: &BuildConfig) -> Result<(Model, BuildStats)> {
    if !store.is_duration() {
        return Err(CoreError::Config("interval build needs a duration store".into()));
    }
    build_with_categories(store, cat, cfg)
}

/// Arithmetic mean; empty input gives the sentinel.
pub fn mean_score(scores: &[f64]) -> f64 {
    if scores.is_empty() {
        return crate::SENTINEL;
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_four() {
        assert!(libm::fabs(mean_score(&[0.2, 0.2, 0.4, 0.2]) - 0.25) < 1e-12);
        assert_eq!(mean_score(&[0.5; 4]), 0.5);
        assert!(mean_score(&[0.1, crate::SENTINEL, 0.1, 0.1]) > 1e11);
    }

    #[test]
    fn point_store_rejected() {
        let mut s = TkgStore::new();
        s.insert_labeled("a", "r", "b", 0);
        let cat = CategoryFunction::default();
        assert!(build_four(s, cat, &BuildConfig::default()).is_err());
    }
}
