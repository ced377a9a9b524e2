//! The state a detector reads and an updater writes.

use alloc::vec::Vec;

use crate::category::CategoryFunction;
use crate::config::BuildConfig;
use crate::mdl::CostReport;
use crate::rules::RuleGraph;
use crate::store::{Projection, TkgStore};
use crate::summarize::Coverage;

/// One rule graph read under one projection.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub projection: Projection,
    pub graph: RuleGraph,
    pub coverage: Coverage,
    pub report: CostReport,
}

/// Store, categories and rule graphs. Point data carries one view; interval
/// data carries four that share their static nodes.
#[derive(Clone, Debug)]
pub struct Model {
    pub store: TkgStore,
    pub categories: CategoryFunction,
    pub views: Vec<GraphView>,
    pub config: BuildConfig,
    /// Facts the build saw. Later ids are stream arrivals.
    pub built_facts: usize,
    /// Bumped on every effective update.
    pub version: u64,
}

impl Model {
    pub fn primary(&self) -> &GraphView {
        &self.views[0]
    }

    pub fn graph(&self) -> &RuleGraph {
        &self.views[0].graph
    }

    pub fn is_duration(&self) -> bool {
        self.views.len() > 1
    }
}
