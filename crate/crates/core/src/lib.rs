//! Rule-graph summarization and anomaly scoring for temporal knowledge graphs.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches files,
//! threads or clocks lives in the companion `anot` crate.
//!
//! Pipeline in one breath: a [`TkgStore`] holds quadruples, the
//! [`category`] module induces entity categories from relation co-occurrence,
//! [`summarize`] greedily picks atomic rules and rule edges under an MDL
//! objective, [`detect`] scores new facts against the resulting graph and
//! [`update`] folds accepted facts back in.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod category;
pub mod config;
pub mod detect;
pub mod duration;
mod error;
pub mod eval;
pub mod mdl;
pub mod model;
pub mod monitor;
pub mod rules;
pub mod store;
pub mod stream;
pub mod summarize;
pub mod synth;
pub mod update;

pub use category::{CategoryFunction, CategoryId, Combination};
pub use config::{BuildConfig, ScoreConfig, ThetaMode};
pub use detect::{AnomalyClass, Detector, Thresholds, Verdict, SENTINEL};
pub use error::CoreError;
pub use model::{GraphView, Model};
pub use rules::{EdgeKey, RuleGraph, RuleKey};
pub use store::{Anchor, DurationFact, EntityId, Fact, FactId, Projection, RelItem, RelationId, Timestamp, TkgStore};

pub(crate) type FxHashMap<K, V> = hashbrown::HashMap<K, V, rustc_hash::FxBuildHasher>;
pub(crate) type FxHashSet<K> = hashbrown::HashSet<K, rustc_hash::FxBuildHasher>;

pub type Result<T> = core::result::Result<T, CoreError>;
