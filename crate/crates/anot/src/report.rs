//! Plain-text reports.

use std::fmt::Write as _;
use std::time::Duration;

use anot_core::detect::rule_label;
use anot_core::eval::{ClassMetrics, Label, ProtocolOutput};
use anot_core::summarize::BuildStats;
use anot_core::Model;

use crate::settings::Settings;

fn na(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

/// Store size, selection counts and the cost breakdown.
pub fn build_report(model: &Model, stats: &BuildStats, settings: &Settings, elapsed: Option<Duration>) -> String {
    let mut s = String::from("# anot build\n");
    s.push_str(&settings.echo());
    let st = &model.store;
    let timestamps = st.timestamps().count();
    let w = |s: &mut String, k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
    w(&mut s, "facts", st.len().to_string());
    w(&mut s, "entities", st.num_entities().to_string());
    w(&mut s, "relations", st.num_relations().to_string());
    w(&mut s, "timestamps", timestamps.to_string());
    w(&mut s, "categories", model.categories.len().to_string());
    w(&mut s, "rule_candidates", stats.rule_candidates.to_string());
    let g = model.graph();
    w(&mut s, "rules", g.num_static().to_string());
    w(&mut s, "nodes", g.nodes().len().to_string());
    w(&mut s, "empty_model_bits", format!("{:.3}", stats.empty_total));
    for (i, v) in model.views.iter().enumerate() {
        let p = v.projection.name();
        let triadic = v.graph.edges().iter().filter(|e| e.key.is_triadic()).count();
        w(&mut s, &format!("view[{i}] {p} edge_candidates"), stats.edge_candidates.get(i).copied().unwrap_or(0).to_string());
        w(&mut s, &format!("view[{i}] {p} chain_edges"), (v.graph.edges().len() - triadic).to_string());
        w(&mut s, &format!("view[{i}] {p} triadic_edges"), triadic.to_string());
        w(&mut s, &format!("view[{i}] {p} explained_proportion"), format!("{:.6}", v.coverage.explained_proportion()));
        let r = &v.report;
        w(&mut s, &format!("view[{i}] {p} model_bits"), format!("{:.3}", r.model));
        w(&mut s, &format!("view[{i}] {p} assertion_bits"), format!("{:.3}", r.assertions));
        w(&mut s, &format!("view[{i}] {p} unmapped_bits"), format!("{:.3}", r.unmapped));
        w(&mut s, &format!("view[{i}] {p} negative_bits"), format!("{:.3}", r.negative));
        w(&mut s, &format!("view[{i}] {p} total_bits"), format!("{:.3}", r.total()));
    }
    if let Some(t) = elapsed {
        w(&mut s, "build_seconds", format!("{:.3}", t.as_secs_f64()));
    }
    s
}

fn row(s: &mut String, m: &ClassMetrics) {
    writeln!(
        s,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        m.label.as_str(),
        m.positives,
        m.total,
        na(m.threshold),
        na(m.precision),
        na(m.recall),
        na(m.f_beta),
        na(m.pr_auc)
    )
    .unwrap();
}

/// Metrics as TSV, then one summary row per method.
pub fn eval_report(out: &ProtocolOutput, settings: &Settings) -> String {
    let mut s = String::from("# anot evaluate\n");
    s.push_str(&settings.echo());
    s.push_str("class\tpositives\ttotal\tthreshold\tprecision\trecall\tf_beta\tpr_auc\n");
    for m in &out.metrics {
        row(&mut s, m);
    }
    s.push('\n');
    let count = |items: &[anot_core::eval::ScoredItem], l: Label| items.iter().filter(|i| i.label == l).count();
    writeln!(
        s,
        "# stream: {} validation items, {} test items ({} conceptual, {} time), {} missing queries, {} refreshes",
        out.validation.len(),
        out.test.len(),
        count(&out.test, Label::Conceptual),
        count(&out.test, Label::Time),
        count(&out.test, Label::Missing),
        out.refreshes
    )
    .unwrap();
    writeln!(s, "# model: {} rules, {} edges", out.model.graph().num_static(), out.model.graph().edges().len()).unwrap();
    s.push_str("method");
    for m in &out.metrics {
        let c = m.label.as_str();
        write!(s, " | {c} P  {c} F  {c} AUC").unwrap();
    }
    s.push_str("\nAnoT");
    for m in &out.metrics {
        write!(s, " | {}  {}  {}", na(m.precision), na(m.f_beta), na(m.pr_auc)).unwrap();
    }
    s.push('\n');
    s
}

/// Rules and edges with readable labels.
pub fn dump_rules(model: &Model) -> String {
    let mut s = String::new();
    let g = model.graph();
    for (i, n) in g.nodes().iter().enumerate() {
        let kind = if n.static_eligible { "rule" } else { "time-only" };
        writeln!(s, "V\t{i}\t{kind}\t{}\t{}", n.assertions, rule_label(model, &n.key)).unwrap();
    }
    for (vi, v) in model.views.iter().enumerate() {
        let name = v.projection.name();
        for e in v.graph.edges() {
            let head = match e.key.middle {
                Some(m) => format!("{} & {}", rule_label(model, &e.key.head), rule_label(model, &m)),
                None => rule_label(model, &e.key.head),
            };
            let spans = |v: &[u32]| match (v.first(), v.last()) {
                (Some(a), Some(b)) => format!("{a}..{b}"),
                _ => "-".into(),
            };
            let tag = if e.key.is_triadic() { "ET" } else { "EC" };
            writeln!(s, "{tag}\t{vi}\t{name}\t{}\t{head} -> {}\tspans {}", e.assertions, rule_label(model, &e.key.tail), spans(&e.head_spans)).unwrap();
        }
    }
    s
}
