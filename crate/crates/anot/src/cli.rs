//! The `anot` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anot_core::detect::classify;
use anot_core::eval::{inject, run_protocol, InjectConfig, Label};
use anot_core::rules::Query;
use anot_core::stream::{Stream, StreamConfig};
use anot_core::summarize::build;
use anot_core::{Detector, DurationFact, Model};
use clap::{Args, Parser, Subcommand};

use crate::error::DataError;
use crate::parallel::{score_parallel, with_threads};
use crate::persist::{self, ModelFile};
use crate::report;
use crate::settings::Settings;
use crate::tsv::{self, Row};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "anot", version, about = "Rule-graph anomaly detection for temporal knowledge graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three comma-separated fractions".to_string())
}

#[derive(Debug, Args)]
pub struct Opts {
    /// TOML file with defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Categories per entity [default: 3].
    #[arg(long = "k", global = true)]
    pub k: Option<usize>,
    /// Recursion depth of the temporal walk [default: 2].
    #[arg(long = "K", global = true)]
    pub hops: Option<u32>,
    /// Timespan window, in dataset time steps. Required to build.
    #[arg(long = "L", global = true)]
    pub window: Option<u32>,
    /// Longest gap between the facts of a chain [default: unbounded].
    #[arg(long, global = true)]
    pub max_gap: Option<u32>,
    /// Cap on edge candidates per view [default: 50000].
    #[arg(long, global = true)]
    pub max_edges: Option<usize>,
    /// Support for frequent relation combinations [default: max(2, 0.1% of entities)].
    #[arg(long, global = true)]
    pub min_support: Option<usize>,
    /// F-beta weight [default: 0.5].
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Seed for anomaly injection [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Facts are `s r o start end` intervals.
    #[arg(long, global = true)]
    pub duration_mode: bool,
    /// Which historical spans count toward the temporal score [default: mismatch]
    #[arg(long, global = true, value_parser = ["mismatch", "literal"])]
    pub theta: Option<String>,
    /// Train, validation and test shares [default: 0.6,0.1,0.3].
    #[arg(long, global = true, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    /// Injected share per anomaly class [default: 0.15].
    #[arg(long, global = true)]
    pub rate: Option<f64>,
    /// Static evidence needed before the temporal score runs [default: 1].
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Static threshold [default: 1].
    #[arg(long = "tau-s", global = true)]
    pub tau_s: Option<f64>,
    /// Temporal threshold [default: 1].
    #[arg(long = "tau-t", global = true)]
    pub tau_t: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Model file to write (build) or read
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Report file; build defaults to stderr, evaluate to stdout
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl Opts {
    fn settings(&self) -> Settings {
        Settings {
            k: self.k,
            hops: self.hops,
            window: self.window,
            max_gap: self.max_gap,
            max_edges: self.max_edges,
            min_support: self.min_support,
            beta: self.beta,
            seed: self.seed,
            duration_mode: self.duration_mode.then_some(true),
            theta: self.theta.clone(),
            split: self.split,
            rate: self.rate,
            lambda: self.lambda,
            tau_s: self.tau_s,
            tau_t: self.tau_t,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a TSV of facts into a model file.
    Build {
        /// Facts, `-` for stdin.
        input: PathBuf,
    },
    /// Score facts against a model without changing it.
    Score {
        input: PathBuf,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Correction hints for facts classed as anomalies.
        #[arg(long)]
        prompts: Option<PathBuf>,
    },
    /// Score, fold and monitor a fact stream in arrival order.
    Stream {
        input: PathBuf,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score only; never fold facts into the model.
        #[arg(long)]
        no_updater: bool,
        /// Rebuild the model whenever the monitor fires.
        #[arg(long)]
        rebuild_on_refresh: bool,
        /// Newline-delimited JSON record of every model change.
        #[arg(long)]
        edit_log: Option<PathBuf>,
        /// Where to write the model after the stream.
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Split by time and write validation and test parts with injected anomalies.
    Inject {
        input: PathBuf,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build, inject, stream and report metrics per anomaly class.
    Evaluate {
        input: PathBuf,
        #[arg(long)]
        no_updater: bool,
        /// Per-item scores as TSV.
        #[arg(long)]
        items: Option<PathBuf>,
    },
    /// Print the rules and edges of a model.
    DumpRules {
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    /// The reader of our output went away, as with `| head`.
    Closed,
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::BrokenPipe => Failure::Closed,
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<anot_core::CoreError> for Failure {
    fn from(e: anot_core::CoreError) -> Self {
        Failure::Data(e.to_string())
    }
}

type Res<T> = Result<T, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

/// Parses `args` (program name first) and runs. Returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.opts.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) | Err(Failure::Closed) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}\n\nRun `anot --help` for usage.");
            EXIT_USAGE
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            EXIT_DATA
        }
    }
}

fn open_input(path: &Path) -> Res<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let f = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

fn open_output(path: Option<&Path>) -> Res<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> Res<()> {
    let mut w = open_output(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn model_path(opts: &Opts) -> Res<&Path> {
    opts.model.as_deref().ok_or_else(|| usage("--model is required"))
}

fn load_model(opts: &Opts) -> Res<ModelFile> {
    let p = model_path(opts)?;
    persist::load(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
}

fn execute(cli: &Cli) -> Res<()> {
    let opts = &cli.opts;
    let file = match &opts.config {
        Some(p) => Settings::from_file(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => Settings::default(),
    };
    let settings = file.overlay(opts.settings());
    let threads = settings.threads();
    match &cli.command {
        Command::Build { input } => with_threads(threads, || cmd_build(opts, &settings, input)),
        Command::Score { input, out, prompts } => with_threads(threads, || cmd_score(opts, &settings, input, out.as_deref(), prompts.as_deref())),
        Command::Stream { input, out, no_updater, rebuild_on_refresh, edit_log, save } => with_threads(threads, || {
            let sc = StreamConfig { updater: !no_updater, thresholds: settings.explicit_thresholds(), rebuild_on_refresh: *rebuild_on_refresh };
            cmd_stream(opts, &settings, input, out.as_deref(), sc, edit_log.as_deref(), save.as_deref())
        }),
        Command::Inject { input, out } => cmd_inject(&settings, input, out.as_deref()),
        Command::Evaluate { input, no_updater, items } => with_threads(threads, || cmd_evaluate(opts, &settings, input, !no_updater, items.as_deref())),
        Command::DumpRules { out } => {
            let mf = load_model(opts)?;
            write_text(out.as_deref(), &report::dump_rules(&mf.model))
        }
    }
}

fn read_input(input: &Path, duration: bool) -> Res<Vec<Row>> {
    Ok(tsv::read_rows(open_input(input)?, duration)?)
}

fn cmd_build(opts: &Opts, settings: &Settings, input: &Path) -> Res<()> {
    let cfg = settings.build().map_err(usage)?;
    let out = model_path(opts)?;
    let duration = settings.duration_mode.unwrap_or(false);
    let rows = read_input(input, duration)?;
    let (store, codec) = tsv::load_store(&rows, duration)?;
    let t0 = Instant::now();
    let (model, stats) = build(store, &cfg)?;
    let elapsed = t0.elapsed();
    log::info!("built in {elapsed:?}");
    persist::save(out, &ModelFile { model, codec }).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
    // read back what was written so the report describes the file
    let mf = persist::load(out)?;
    let text = report::build_report(&mf.model, &stats, settings, Some(elapsed));
    match &opts.report {
        Some(p) => write_text(Some(p), &text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

/// Interns the rows' labels into the model's store and encodes their times.
fn encode_for(mf: &mut ModelFile, rows: &[Row]) -> Res<Vec<DurationFact>> {
    Ok(tsv::encode_rows(&mut mf.model.store, &mf.codec, rows)?)
}

fn write_verdict_row<W: Write>(w: &mut W, m: &Model, codec: &crate::time::TimeCodec, f: &DurationFact, s: f64, t: f64, class: &str) -> io::Result<()> {
    tsv::write_fact(w, &m.store, codec, f, m.is_duration())?;
    write!(w, "\t{s}\t{t}\t{class}")
}

fn cmd_score(opts: &Opts, settings: &Settings, input: &Path, out: Option<&Path>, prompts: Option<&Path>) -> Res<()> {
    let mut mf = load_model(opts)?;
    let duration = mf.model.is_duration() || mf.model.store.is_duration();
    let rows = read_input(input, duration)?;
    let facts = encode_for(&mut mf, &rows)?;
    let score = settings.score(&mf.model.config).map_err(usage)?;
    let th = settings.thresholds();
    let verdicts = score_parallel(&mf.model, &score, &facts);
    let mut w = open_output(out)?;
    let mut p = match prompts {
        Some(path) => Some(open_output(Some(path))?),
        None => None,
    };
    let det = Detector::new(&mf.model, score);
    for ((f, v), row) in facts.iter().zip(&verdicts).zip(&rows) {
        let class = classify(v, &th, false);
        write_verdict_row(&mut w, &mf.model, &mf.codec, f, v.static_score, v.temporal_score, class.as_str())?;
        writeln!(w)?;
        if let (Some(p), false) = (p.as_mut(), class == anot_core::AnomalyClass::Valid) {
            let q = Query { subject: f.subject, relation: f.relation, object: f.object, start: f.start, end: f.end, id: mf.model.store.find_duration(f) };
            for prompt in det.correcting_prompts(&q, v) {
                writeln!(p, "{}\t{}\t{}", row.line, class.as_str(), prompt.render(&mf.model))?;
            }
        }
    }
    w.flush()?;
    if let Some(mut p) = p {
        p.flush()?;
    }
    Ok(())
}

/// Edge index, head, optional middle and tail as `[subject, relation, object]`.
type EdgeRecord = (usize, [u32; 3], Option<[u32; 3]>, [u32; 3]);

#[derive(serde::Serialize)]
struct EditRecord<'a> {
    line: usize,
    fact: Option<u32>,
    version: u64,
    new_entities: &'a [u32],
    categories: &'a [(u32, u32)],
    nodes: Vec<[u32; 3]>,
    edges: Vec<EdgeRecord>,
    spans: usize,
}

fn key3(k: &anot_core::RuleKey) -> [u32; 3] {
    [k.subject, k.relation, k.object]
}

fn cmd_stream(opts: &Opts, settings: &Settings, input: &Path, out: Option<&Path>, sc: StreamConfig, edit_log: Option<&Path>, save: Option<&Path>) -> Res<()> {
    let mut mf = load_model(opts)?;
    let duration = mf.model.is_duration() || mf.model.store.is_duration();
    let rows = read_input(input, duration)?;
    let facts = encode_for(&mut mf, &rows)?;
    let score = settings.score(&mf.model.config).map_err(usage)?;
    let codec = mf.codec;
    let mut stream = Stream::new(mf.model, score, sc);
    let scored = stream.run(&facts, &score_parallel)?;
    stream.finish()?;
    let mut w = open_output(out)?;
    for s in &scored {
        write_verdict_row(&mut w, &stream.model, &codec, &s.fact, s.verdict.static_score, s.verdict.temporal_score, s.verdict.class.as_str())?;
        writeln!(w, "\t{}\t{}", s.folded as u8, s.version)?;
    }
    w.flush()?;
    if let Some(path) = edit_log {
        let mut log = open_output(Some(path))?;
        for (s, row) in scored.iter().zip(&rows) {
            let Some(e) = &s.edits else { continue };
            let rec = EditRecord {
                line: row.line,
                fact: e.fact,
                version: e.version,
                new_entities: &e.new_entities,
                categories: &e.categories,
                nodes: e.nodes.iter().map(key3).collect(),
                edges: e.edges.iter().map(|(v, k)| (*v, key3(&k.head), k.middle.as_ref().map(key3), key3(&k.tail))).collect(),
                spans: e.spans,
            };
            serde_json::to_writer(&mut log, &rec).map_err(|e| Failure::Data(e.to_string()))?;
            writeln!(log)?;
        }
        for r in &stream.refreshes {
            writeln!(
                log,
                "{}",
                serde_json::json!({ "refresh": { "time": codec.decode(r.time), "online_bits": r.online_bits, "baseline_bits": r.baseline_bits } })
            )?;
        }
        log.flush()?;
    }
    for r in &stream.refreshes {
        log::warn!("monitor fired at {}: {:.1} online bits over a {:.1}-bit baseline", codec.decode(r.time), r.online_bits, r.baseline_bits);
    }
    if let Some(path) = save {
        persist::save(path, &ModelFile { model: stream.model, codec })?;
    }
    Ok(())
}

fn cmd_inject(settings: &Settings, input: &Path, out: Option<&Path>) -> Res<()> {
    let duration = settings.duration_mode.unwrap_or(false);
    let rows = read_input(input, duration)?;
    let (store, codec) = tsv::load_store(&rows, duration)?;
    let split = store.split_by_time(settings.split.unwrap_or([0.6, 0.1, 0.3]))?;
    let cfg = settings.inject();
    let mut w = open_output(out)?;
    for (name, ids, seed) in [("valid", &split.valid, cfg.seed), ("test", &split.test, cfg.seed.wrapping_add(1))] {
        let part: Vec<DurationFact> = ids.iter().map(|&i| store.duration_fact(i)).collect();
        let labeled = inject(&store, &part, &InjectConfig { seed, ..cfg }, None)?;
        let mut emit = |f: &DurationFact, label: Label| -> io::Result<()> {
            tsv::write_fact(&mut w, &store, &codec, f, duration)?;
            writeln!(w, "\t{}\t{name}", label.as_str())
        };
        for item in &labeled.items {
            emit(&item.fact, item.label)?;
        }
        for item in &labeled.missing {
            emit(&item.fact, Label::Missing)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(opts: &Opts, settings: &Settings, input: &Path, updater: bool, items: Option<&Path>) -> Res<()> {
    let cfg = settings.protocol(updater).map_err(usage)?;
    let duration = settings.duration_mode.unwrap_or(false);
    let rows = read_input(input, duration)?;
    let (store, codec) = tsv::load_store(&rows, duration)?;
    let out = run_protocol(&store, &cfg, None, &score_parallel)?;
    write_text(opts.report.as_deref(), &report::eval_report(&out, settings))?;
    if let Some(path) = items {
        let mut w = open_output(Some(path))?;
        for (part, list) in [("valid", &out.validation), ("test", &out.test)] {
            for i in list.iter() {
                write_verdict_row(&mut w, &out.model, &codec, &i.fact, i.verdict.static_score, i.verdict.temporal_score, i.label.as_str())?;
                writeln!(w, "\t{part}")?;
            }
        }
        w.flush()?;
    }
    Ok(())
}
