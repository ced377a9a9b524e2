//! Knobs shared by the build, scoring and update paths.

use crate::category::AggregateConfig;

/// Everything the offline summarizer needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildConfig {
    /// Categories per entity.
    pub k: usize,
    pub max_combination_size: usize,
    /// `None` means `max(2, 0.1% of |E|)`.
    pub min_support: Option<usize>,
    pub overlap: f64,
    pub max_aggregation_rounds: usize,
    /// Mined combinations kept before aggregation.
    pub max_mined: usize,
    pub max_catalog: usize,
    /// `L`, the triadic window and the updater's look-back.
    pub window: u32,
    /// Longest head-to-tail gap for chain candidates.
    pub chain_max_gap: Option<u32>,
    pub max_edges: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            k: 3,
            max_combination_size: 3,
            min_support: None,
            overlap: 0.9,
            max_aggregation_rounds: 20,
            max_mined: 2000,
            max_catalog: 4000,
            window: 10,
            chain_max_gap: None,
            max_edges: 50_000,
        }
    }
}

impl BuildConfig {
    pub fn aggregate(&self) -> AggregateConfig {
        AggregateConfig { overlap: self.overlap, max_rounds: self.max_aggregation_rounds, max_catalog: self.max_catalog }
    }
}

/// How `θ` in the temporal score is counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// Historical spans farther than `L` from the observed gap: larger means
    /// the gap is unusual.
    #[default]
    Mismatch,
    /// Historical spans within `L` of the observed gap.
    Literal,
}

/// Online scoring knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreConfig {
    /// `K`: hops walked back through failed precursors.
    pub max_hops: u32,
    pub window: u32,
    pub chain_max_gap: Option<u32>,
    /// Static evidence `Σ|A_v|` must reach this before `T` is evaluated.
    pub lambda: f64,
    pub out_edge_extension: bool,
    pub theta: ThetaMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig::from_build(&BuildConfig::default())
    }
}

impl ScoreConfig {
    pub fn from_build(b: &BuildConfig) -> Self {
        ScoreConfig { max_hops: 2, window: b.window, chain_max_gap: b.chain_max_gap, lambda: 1.0, out_edge_extension: true, theta: ThetaMode::Mismatch }
    }
}
