//! Model files.
//!
//! A line format, one record per line, fields separated by tabs. The first
//! line carries the format version, the SHA-256 of the category section
//! and the SHA-256 of everything after the header:
//!
//! ```text
//! anot-model  1  categories=<hex>  body=<hex>
//! time        int 0 24
//! duration    0
//! config      k=3 max_combination_size=3 ...
//! meta        <built facts> <version>
//! E  <label>                         entities by id
//! R  <label>                         relations by id
//! F  <s> <r> <o> <start> <end>       facts by id
//! cf <k> <assigned len> <known len>
//! K  <support> <items>               catalog
//! C  <count> <fallback> <items>      categories by id
//! A  <entity> <categories>
//! N  <entity> <known items>
//! view <index> <head anchor> <tail anchor>
//! V  <cat_s> <rel> <cat_o> <count> <static>
//! EC <head> <tail> <count> <spans>
//! ET <head> <mid> <tail> <count> <head spans> <mid spans>
//! cov <anchor> <len> <counted> <mapped> <explained>
//! neg <term> <universe> <bits>
//! nb <term> <t> <total> <explained>
//! report <model> <assertions> <unmapped> <negative> <with relations>
//! end
//! ```
//!
//! Lists are comma-separated, `-` when empty. Items are packed relation
//! items. Bit vectors are hex with the lowest index in the first nibble's
//! high bit. Floats use the shortest form that reads back exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use anot_core::category::{CatalogEntry, Category};
use anot_core::mdl::{Bucket, CostReport, NegativeTerm};
use anot_core::rules::RuleGraph;
use anot_core::summarize::Coverage;
use anot_core::{Anchor, BuildConfig, CategoryFunction, DurationFact, EdgeKey, Fact, GraphView, Model, Projection, RelItem, RuleKey, TkgStore};
use sha2::{Digest, Sha256};

use crate::error::DataError;
use crate::time::TimeCodec;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "anot-model";

/// A model with the time codec its timestamps were encoded with.
#[derive(Clone, Debug)]
pub struct ModelFile {
    pub model: Model,
    pub codec: TimeCodec,
}

fn list<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    let s: Vec<String> = xs.into_iter().map(|x| x.to_string()).collect();
    if s.is_empty() {
        "-".into()
    } else {
        s.join(",")
    }
}

fn bits_hex(v: &[bool]) -> String {
    let bytes: Vec<u8> = v.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |b, (i, &x)| b | ((x as u8) << (7 - i)))).collect();
    if bytes.is_empty() {
        "-".into()
    } else {
        hex::encode(bytes)
    }
}

fn anchor_name(a: Anchor) -> &'static str {
    match a {
        Anchor::Start => "start",
        Anchor::End => "end",
    }
}

fn opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(|| "-".into(), |v| v.to_string())
}

fn config_line(c: &BuildConfig) -> String {
    format!(
        "k={} max_combination_size={} min_support={} overlap={} max_aggregation_rounds={} max_mined={} max_catalog={} window={} chain_max_gap={} max_edges={}",
        c.k,
        c.max_combination_size,
        opt(c.min_support),
        c.overlap,
        c.max_aggregation_rounds,
        c.max_mined,
        c.max_catalog,
        c.window,
        opt(c.chain_max_gap),
        c.max_edges
    )
}

fn sha(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

fn categories_section(cf: &CategoryFunction) -> String {
    let mut s = String::new();
    let items = |v: &[RelItem]| list(v.iter().map(|i| i.0));
    writeln!(s, "cf\t{}\t{}\t{}", cf.k(), cf.assignment().len(), cf.known().len()).unwrap();
    for e in cf.catalog() {
        writeln!(s, "K\t{}\t{}", e.support, items(&e.items)).unwrap();
    }
    for c in cf.categories() {
        writeln!(s, "C\t{}\t{}\t{}", c.count, c.fallback as u8, items(&c.items)).unwrap();
    }
    for (e, cs) in cf.assignment().iter().enumerate().filter(|(_, cs)| !cs.is_empty()) {
        writeln!(s, "A\t{e}\t{}", list(cs)).unwrap();
    }
    for (e, known) in cf.known().iter().enumerate().filter(|(_, k)| !k.is_empty()) {
        writeln!(s, "N\t{e}\t{}", items(known)).unwrap();
    }
    s
}

fn view_section(s: &mut String, index: usize, v: &GraphView) {
    let p = v.projection;
    writeln!(s, "view\t{index}\t{}\t{}", anchor_name(p.head), anchor_name(p.tail)).unwrap();
    let g = &v.graph;
    for n in g.nodes() {
        writeln!(s, "V\t{}\t{}\t{}\t{}\t{}", n.key.subject, n.key.relation, n.key.object, n.assertions, n.static_eligible as u8).unwrap();
    }
    for e in g.edges() {
        match e.middle {
            None => writeln!(s, "EC\t{}\t{}\t{}\t{}", e.head, e.tail, e.assertions, list(&e.head_spans)).unwrap(),
            Some(m) => writeln!(s, "ET\t{}\t{}\t{}\t{}\t{}\t{}", e.head, m, e.tail, e.assertions, list(&e.head_spans), list(&e.middle_spans)).unwrap(),
        }
    }
    let c = &v.coverage;
    let len = c.counted.len();
    assert!(c.mapped.len() == len && c.explained.len() == len, "coverage vectors disagree in length");
    writeln!(s, "cov\t{}\t{len}\t{}\t{}\t{}", anchor_name(c.anchor), bits_hex(&c.counted), bits_hex(&c.mapped), bits_hex(&c.explained)).unwrap();
    for (name, term) in [("unmapped", &c.unmapped), ("negative", &c.negative)] {
        writeln!(s, "neg\t{name}\t{}\t{}", term.universe(), term.raw_bits()).unwrap();
        for (t, b) in term.buckets() {
            writeln!(s, "nb\t{name}\t{t}\t{}\t{}", b.total, b.explained).unwrap();
        }
    }
    let r = &v.report;
    writeln!(s, "report\t{}\t{}\t{}\t{}\t{}", r.model, r.assertions, r.unmapped, r.negative, r.model_with_relations).unwrap();
}

/// The file contents. Equal models give equal bytes.
pub fn to_string(mf: &ModelFile) -> String {
    let m = &mf.model;
    let mut body = String::new();
    writeln!(body, "time\t{}", mf.codec).unwrap();
    writeln!(body, "duration\t{}", m.store.is_duration() as u8).unwrap();
    writeln!(body, "config\t{}", config_line(&m.config)).unwrap();
    writeln!(body, "meta\t{}\t{}", m.built_facts, m.version).unwrap();
    for l in m.store.entities().labels() {
        writeln!(body, "E\t{l}").unwrap();
    }
    for l in m.store.relations().labels() {
        writeln!(body, "R\t{l}").unwrap();
    }
    for (id, f) in m.store.facts() {
        writeln!(body, "F\t{}\t{}\t{}\t{}\t{}", f.subject, f.relation, f.object, f.time, m.store.end(id)).unwrap();
    }
    let cats = categories_section(&m.categories);
    body.push_str(&cats);
    for (i, v) in m.views.iter().enumerate() {
        view_section(&mut body, i, v);
    }
    body.push_str("end\n");
    format!("{MAGIC}\t{FORMAT_VERSION}\tcategories={}\tbody={}\n{body}", sha(&cats), sha(&body))
}

pub fn write<W: Write>(w: &mut W, mf: &ModelFile) -> std::io::Result<()> {
    w.write_all(to_string(mf).as_bytes())
}

pub fn save(path: &std::path::Path, mf: &ModelFile) -> Result<(), DataError> {
    std::fs::write(path, to_string(mf))?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<ModelFile, DataError> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}

pub fn read<R: BufRead>(mut r: R) -> Result<ModelFile, DataError> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    from_str(&text)
}

struct Lines<'a> {
    it: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

/// `line` counts body lines from 0; the header is file line 1.
fn bad(line: usize, msg: impl std::fmt::Display) -> DataError {
    DataError::Model(format!("line {}: {msg}", line.saturating_add(2)))
}

impl<'a> Lines<'a> {
    /// Next record whose tag is `tag`, split into fields after the tag.
    fn take(&mut self, tag: &str) -> Option<(usize, Vec<&'a str>)> {
        let &(i, l) = self.it.peek()?;
        let mut f = l.split('\t');
        if f.next() != Some(tag) {
            return None;
        }
        self.it.next();
        Some((i, f.collect()))
    }

    fn expect(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>), DataError> {
        match self.take(tag) {
            Some(x) => Ok(x),
            None => {
                let (i, l) = self.it.peek().copied().unwrap_or((usize::MAX - 1, "end of file"));
                Err(bad(i, format!("expected {tag:?}, found {:?}", l.split('\t').next().unwrap_or(""))))
            }
        }
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, DataError> {
    s.parse().map_err(|_| bad(line, format!("bad number {s:?}")))
}

fn nums<T: std::str::FromStr>(line: usize, s: &str) -> Result<Vec<T>, DataError> {
    if s == "-" {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| num(line, x)).collect()
}

fn items(line: usize, s: &str) -> Result<Vec<RelItem>, DataError> {
    Ok(nums::<u32>(line, s)?.into_iter().map(RelItem).collect())
}

fn fields(line: usize, f: &[&str], n: usize) -> Result<(), DataError> {
    if f.len() != n {
        return Err(bad(line, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(())
}

fn anchor(line: usize, s: &str) -> Result<Anchor, DataError> {
    match s {
        "start" => Ok(Anchor::Start),
        "end" => Ok(Anchor::End),
        _ => Err(bad(line, format!("bad anchor {s:?}"))),
    }
}

fn hex_bits(line: usize, s: &str, len: usize) -> Result<Vec<bool>, DataError> {
    let bytes = if s == "-" { Vec::new() } else { hex::decode(s).map_err(|e| bad(line, e))? };
    if bytes.len() != len.div_ceil(8) {
        return Err(bad(line, "bit vector length mismatch"));
    }
    Ok((0..len).map(|i| bytes[i / 8] >> (7 - i % 8) & 1 == 1).collect())
}

fn parse_config(line: usize, s: &str) -> Result<BuildConfig, DataError> {
    let mut c = BuildConfig::default();
    for kv in s.split(' ') {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(line, format!("bad config entry {kv:?}")))?;
        let o = |v: &str| -> Result<Option<u32>, DataError> {
            if v == "-" {
                Ok(None)
            } else {
                num(line, v).map(Some)
            }
        };
        match k {
            "k" => c.k = num(line, v)?,
            "max_combination_size" => c.max_combination_size = num(line, v)?,
            "min_support" => c.min_support = o(v)?.map(|x| x as usize),
            "overlap" => c.overlap = num(line, v)?,
            "max_aggregation_rounds" => c.max_aggregation_rounds = num(line, v)?,
            "max_mined" => c.max_mined = num(line, v)?,
            "max_catalog" => c.max_catalog = num(line, v)?,
            "window" => c.window = num(line, v)?,
            "chain_max_gap" => c.chain_max_gap = o(v)?,
            "max_edges" => c.max_edges = num(line, v)?,
            _ => return Err(bad(line, format!("unknown config key {k:?}"))),
        }
    }
    Ok(c)
}

fn parse_view(lines: &mut Lines<'_>, store_len: usize) -> Result<GraphView, DataError> {
    let (i, f) = lines.expect("view")?;
    fields(i, &f, 3)?;
    let projection = Projection { head: anchor(i, f[1])?, tail: anchor(i, f[2])? };
    let mut graph = RuleGraph::new();
    while let Some((i, f)) = lines.take("V") {
        fields(i, &f, 5)?;
        let key = RuleKey::new(num(i, f[0])?, num(i, f[1])?, num(i, f[2])?);
        let id = graph.add_node(key, num(i, f[3])?, f[4] == "1");
        if id as usize + 1 != graph.nodes().len() {
            return Err(bad(i, "duplicate node"));
        }
    }
    let node = |i: usize, s: &str, g: &RuleGraph| -> Result<RuleKey, DataError> {
        let id: u32 = num(i, s)?;
        g.nodes().get(id as usize).map(|n| n.key).ok_or_else(|| bad(i, format!("unknown node {id}")))
    };
    loop {
        if let Some((i, f)) = lines.take("EC") {
            fields(i, &f, 4)?;
            let key = EdgeKey { head: node(i, f[0], &graph)?, middle: None, tail: node(i, f[1], &graph)? };
            graph.add_edge(key, nums(i, f[3])?, Vec::new(), num(i, f[2])?);
        } else if let Some((i, f)) = lines.take("ET") {
            fields(i, &f, 6)?;
            let key = EdgeKey { head: node(i, f[0], &graph)?, middle: Some(node(i, f[1], &graph)?), tail: node(i, f[2], &graph)? };
            graph.add_edge(key, nums(i, f[4])?, nums(i, f[5])?, num(i, f[3])?);
        } else {
            break;
        }
    }
    let (i, f) = lines.expect("cov")?;
    fields(i, &f, 5)?;
    let len: usize = num(i, f[1])?;
    if len > store_len {
        return Err(bad(i, "coverage longer than the store"));
    }
    let mut coverage = Coverage {
        counted: hex_bits(i, f[2], len)?,
        mapped: hex_bits(i, f[3], len)?,
        explained: hex_bits(i, f[4], len)?,
        anchor: anchor(i, f[0])?,
        ..Coverage::default()
    };
    for name in ["unmapped", "negative"] {
        let (i, f) = lines.expect("neg")?;
        fields(i, &f, 3)?;
        if f[0] != name {
            return Err(bad(i, format!("expected the {name} term")));
        }
        let universe = num(i, f[1])?;
        let bits = num(i, f[2])?;
        let mut buckets = BTreeMap::new();
        while let Some((i, f)) = lines.take("nb") {
            fields(i, &f, 4)?;
            if f[0] != name {
                return Err(bad(i, "bucket of another term"));
            }
            buckets.insert(num(i, f[1])?, Bucket { total: num(i, f[2])?, explained: num(i, f[3])? });
        }
        let term = NegativeTerm::from_parts(universe, buckets, bits);
        if name == "unmapped" {
            coverage.unmapped = term;
        } else {
            coverage.negative = term;
        }
    }
    let (i, f) = lines.expect("report")?;
    fields(i, &f, 5)?;
    let report =
        CostReport { model: num(i, f[0])?, assertions: num(i, f[1])?, unmapped: num(i, f[2])?, negative: num(i, f[3])?, model_with_relations: num(i, f[4])? };
    Ok(GraphView { projection, graph, coverage, report })
}

pub fn from_str(text: &str) -> Result<ModelFile, DataError> {
    let (header, body) = text.split_once('\n').ok_or_else(|| DataError::Model("empty file".into()))?;
    let h: Vec<&str> = header.split('\t').collect();
    if h.len() != 4 || h[0] != MAGIC {
        return Err(DataError::Model("not a model file".into()));
    }
    if h[1] != FORMAT_VERSION.to_string() {
        return Err(DataError::Model(format!("format version {} is not supported", h[1])));
    }
    if h[3].strip_prefix("body=") != Some(sha(body).as_str()) {
        return Err(DataError::Model("body checksum mismatch".into()));
    }
    let mut lines = Lines { it: body.lines().enumerate().peekable() };
    let (i, f) = lines.expect("time")?;
    let codec = f.first().and_then(|s| TimeCodec::parse(s)).ok_or_else(|| bad(i, "bad time codec"))?;
    let (i, f) = lines.expect("duration")?;
    fields(i, &f, 1)?;
    let duration = f[0] == "1";
    let (i, f) = lines.expect("config")?;
    fields(i, &f, 1)?;
    let config = parse_config(i, f[0])?;
    let (i, f) = lines.expect("meta")?;
    fields(i, &f, 2)?;
    let built_facts: usize = num(i, f[0])?;
    let version: u64 = num(i, f[1])?;

    let mut store = if duration { TkgStore::with_durations() } else { TkgStore::new() };
    let mut labels = (0, 0);
    while let Some((i, f)) = lines.take("E") {
        fields(i, &f, 1)?;
        store.intern_entity(f[0]);
        labels.0 += 1;
    }
    while let Some((i, f)) = lines.take("R") {
        fields(i, &f, 1)?;
        store.intern_relation(f[0]);
        labels.1 += 1;
    }
    if labels != (store.entities().len(), store.relations().len()) {
        return Err(DataError::Model("duplicate labels".into()));
    }
    let (ne, nr) = (store.entities().len() as u32, store.relations().len() as u32);
    while let Some((i, f)) = lines.take("F") {
        fields(i, &f, 5)?;
        let (s, r, o): (u32, u32, u32) = (num(i, f[0])?, num(i, f[1])?, num(i, f[2])?);
        if s >= ne || o >= ne || r >= nr {
            return Err(bad(i, "fact refers to an unknown label"));
        }
        let (start, end) = (num(i, f[3])?, num(i, f[4])?);
        let inserted = if duration {
            store.insert_duration(DurationFact { subject: s, relation: r, object: o, start, end })?
        } else {
            store.insert(Fact::new(s, r, o, start))
        };
        if inserted.is_none() {
            return Err(bad(i, "duplicate fact"));
        }
    }
    if built_facts > store.len() {
        return Err(DataError::Model("more built facts than facts".into()));
    }

    let cats_start = body.find("\ncf\t").map(|p| p + 1).ok_or_else(|| DataError::Model("missing category section".into()))?;
    let (i, f) = lines.expect("cf")?;
    fields(i, &f, 3)?;
    let (k, n_assigned, n_known): (usize, usize, usize) = (num(i, f[0])?, num(i, f[1])?, num(i, f[2])?);
    let mut catalog = Vec::new();
    while let Some((i, f)) = lines.take("K") {
        fields(i, &f, 2)?;
        catalog.push(CatalogEntry { support: num(i, f[0])?, items: items(i, f[1])? });
    }
    let mut categories = Vec::new();
    while let Some((i, f)) = lines.take("C") {
        fields(i, &f, 3)?;
        categories.push(Category { count: num(i, f[0])?, fallback: f[1] == "1", items: items(i, f[2])? });
    }
    let mut assignment = vec![Vec::new(); n_assigned];
    while let Some((i, f)) = lines.take("A") {
        fields(i, &f, 2)?;
        let e: usize = num(i, f[0])?;
        let cs: Vec<u32> = nums(i, f[1])?;
        if e >= n_assigned || cs.iter().any(|&c| c as usize >= categories.len()) {
            return Err(bad(i, "assignment out of range"));
        }
        assignment[e] = cs;
    }
    let mut known = vec![Vec::new(); n_known];
    while let Some((i, f)) = lines.take("N") {
        fields(i, &f, 2)?;
        let e: usize = num(i, f[0])?;
        if e >= n_known {
            return Err(bad(i, "known items out of range"));
        }
        known[e] = items(i, f[1])?;
    }
    let cats_len = body[cats_start..].find("\nview\t").map(|p| p + 1).ok_or_else(|| DataError::Model("missing views".into()))?;
    if h[2].strip_prefix("categories=") != Some(sha(&body[cats_start..cats_start + cats_len]).as_str()) {
        return Err(DataError::Model("category checksum mismatch".into()));
    }
    let categories = CategoryFunction::from_parts(k, categories, assignment, known, catalog);

    let mut views = Vec::new();
    while lines.it.peek().is_some_and(|(_, l)| l.starts_with("view\t")) {
        views.push(parse_view(&mut lines, store.len())?);
    }
    if views.is_empty() {
        return Err(DataError::Model("no rule graph".into()));
    }
    lines.expect("end")?;
    if let Some((i, _)) = lines.it.next() {
        return Err(bad(i, "data after the end marker"));
    }
    let model = Model { store, categories, views, config, built_facts, version };
    Ok(ModelFile { model, codec })
}
