use alloc::string::String;

/// Everything the core can refuse to do.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid binomial: C({n}, {k})")]
    InvalidBinomial { n: u64, k: u64 },
    #[error("need at least 3 distinct timestamps to split, found {0}")]
    TooFewTimestamps(usize),
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("interval ends before it starts: [{start}, {end}]")]
    BadInterval { start: u32, end: u32 },
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: u32 },
    #[error("store is empty")]
    EmptyStore,
    #[error("could not draw a valid perturbation after {0} attempts")]
    InjectionExhausted(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}
