//! Recovery of a planted world's rules, edges and anomalies.

use std::time::{Duration, Instant};

use anot_core::eval::{run_protocol, Label, ProtocolConfig, ProtocolOutput};
use anot_core::model::Model;
use anot_core::stream::score_sequential;
use anot_core::synth::{generate, EntityType, PlantedConfig, PlantedWorld};
use anot_core::{CategoryId, RelationId, ScoreConfig};

pub fn protocol() -> ProtocolConfig {
    let mut cfg = ProtocolConfig::default();
    cfg.build.window = 2;
    cfg.build.chain_max_gap = Some(3);
    cfg.score = ScoreConfig::from_build(&cfg.build);
    cfg.score.max_hops = 5;
    cfg
}

pub fn run(seed: u64) -> (PlantedWorld, ProtocolOutput, Duration) {
    let t0 = Instant::now();
    let w = generate(&PlantedConfig { seed, ..Default::default() });
    let oracle = |s, r, o| w.is_valid_triple(s, r, o);
    let out = run_protocol(&w.store, &protocol(), Some(&oracle), &score_sequential).unwrap();
    (w, out, t0.elapsed())
}

/// Whether at least 90% of the entities holding `c` have type `ty`.
pub fn typed(w: &PlantedWorld, m: &Model, c: CategoryId, ty: EntityType) -> bool {
    let members: Vec<u32> = m.categories.assignment().iter().enumerate().filter(|(_, cs)| cs.contains(&c)).map(|(e, _)| e as u32).collect();
    let hits = members.iter().filter(|&&e| w.entity_type(e) == ty).count();
    !members.is_empty() && hits * 10 >= members.len() * 9
}

pub fn has_rule(w: &PlantedWorld, m: &Model, (ts, r, to): (EntityType, RelationId, EntityType)) -> bool {
    m.graph().nodes().iter().any(|n| n.key.relation == r && n.assertions > 0 && typed(w, m, n.key.subject, ts) && typed(w, m, n.key.object, to))
}

pub fn pr_auc(out: &ProtocolOutput, label: Label) -> f64 {
    out.metrics.iter().find(|m| m.label == label).and_then(|m| m.pr_auc).unwrap()
}

pub fn recovered() -> String {
    let mut lines = Vec::new();
    for seed in [1, 2, 3] {
        let (w, out, elapsed) = run(seed);
        assert!(w.facts.len() >= 5000, "only {} facts", w.facts.len());
        assert!(elapsed < Duration::from_secs(60), "seed {seed} took {elapsed:?}");

        let m = &out.model;
        for rule in w.planted_rules() {
            assert!(has_rule(&w, m, rule), "seed {seed}: rule {rule:?} missing");
        }

        let [a, b, c] = w.relations;
        let edges = m.graph().edges();
        let chain = |h, t| edges.iter().any(|e| e.key.middle.is_none() && e.key.head.relation == h && e.key.tail.relation == t);
        assert!(chain(a, b), "seed {seed}: chain a -> b missing");
        assert!(chain(b, a), "seed {seed}: chain b -> a missing");
        let triadic = edges.iter().any(|e| {
            let pair = e.key.middle.map(|mid| (e.key.head.relation, mid.relation));
            e.key.tail.relation == b && (pair == Some((a, c)) || pair == Some((c, a)))
        });
        assert!(triadic, "seed {seed}: triadic (a, c) -> b missing");

        let conceptual = pr_auc(&out, Label::Conceptual);
        let time = pr_auc(&out, Label::Time);
        assert!(conceptual >= 0.90, "seed {seed}: conceptual PR-AUC {conceptual}");
        assert!(time >= 0.80, "seed {seed}: time PR-AUC {time}");
        lines.push(format!("seed {seed}: conceptual {conceptual:.3}, time {time:.3}, {:.1}s", elapsed.as_secs_f64()));
    }
    lines.join("; ")
}
