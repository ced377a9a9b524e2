//! Writes a synthetic world with planted rules as TSV on stdout.
//!
//! ```text
//! cargo run --example planted -- [timestamps] [seed] > world.tsv
//! ```

use std::io::Write;

use anot_core::synth::{generate, PlantedConfig};

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let timestamps = args.next().unwrap_or(3200) as u32;
    let seed = args.next().unwrap_or(0);
    let w = generate(&PlantedConfig { timestamps, seed, ..Default::default() });
    let out = std::io::stdout();
    let mut out = out.lock();
    for f in &w.facts {
        let e = |x| w.store.entities().label(x).unwrap_or("?");
        writeln!(out, "{}\t{}\t{}\t{}", e(f.subject), w.store.relations().label(f.relation).unwrap_or("?"), e(f.object), f.time)?;
    }
    Ok(())
}
