//! The running description length only ever drops.

use anot_core::store::TkgStore;
use anot_core::summarize::{build, Accepted};
use anot_core::synth::{generate, PlantedConfig};
use anot_core::BuildConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse random graph with a few repeated pair patterns so that edges
/// have something to explain.
pub fn random_store(seed: u64) -> TkgStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne = rng.gen_range(4..=30);
    let nr = rng.gen_range(2..=8);
    let nt = rng.gen_range(5..=40);
    let mut s = TkgStore::new();
    for _ in 0..rng.gen_range(20..=300) {
        let a = rng.gen_range(0..ne);
        let b = (a + rng.gen_range(1..ne)) % ne;
        let t = rng.gen_range(0..nt);
        let r = rng.gen_range(0..nr);
        s.insert_labeled(&format!("e{a}"), &format!("r{r}"), &format!("e{b}"), t);
        if rng.gen_bool(0.3) {
            s.insert_labeled(&format!("e{a}"), &format!("r{}", (r + 1) % nr), &format!("e{b}"), t + 1);
        }
    }
    s
}

/// Builds and checks the acceptance sequence. Returns how many
/// acceptances there were.
pub fn check(store: TkgStore, cfg: &BuildConfig) -> Result<usize, String> {
    let (m, stats) = build(store, cfg).map_err(|e| e.to_string())?;
    let mut prev = stats.empty_total;
    for a in &stats.accepted {
        if a.total() >= prev {
            return Err(format!("{a:?} raised the total from {prev}"));
        }
        prev = a.total();
    }
    if prev > stats.empty_total {
        return Err(format!("final {prev} above empty {}", stats.empty_total));
    }
    let r = m.primary().report;
    if (r.total() - prev).abs() > 1e-9 * prev.abs().max(1.0) {
        return Err(format!("report {} vs running {}", r.total(), prev));
    }
    Ok(stats.accepted.len())
}

/// Criterion: 50 seeded random instances and three planted worlds.
pub fn seeded_instances() -> String {
    let mut accepted = 0;
    for seed in 0..50u64 {
        let window = 1 + (seed % 5) as u32;
        let cfg = BuildConfig { window, chain_max_gap: Some(window), ..Default::default() };
        accepted += check(random_store(seed), &cfg).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    }
    for seed in 0..3 {
        let w = generate(&PlantedConfig { timestamps: 800, seed, ..Default::default() });
        let cfg = BuildConfig { window: 2, chain_max_gap: Some(3), ..Default::default() };
        let (_, stats) = build(w.store.clone(), &cfg).unwrap();
        assert!(stats.accepted.iter().any(|a| matches!(a, Accepted::Edge { .. })), "planted seed {seed} accepted no edge");
        accepted += check(w.store, &cfg).unwrap_or_else(|e| panic!("planted seed {seed}: {e}"));
    }
    format!("53 instances, {accepted} acceptances, each strictly lowering the total")
}
