//! Run settings: a TOML file, then command-line flags on top.

use std::fmt::Write as _;
use std::path::Path;

use anot_core::eval::{InjectConfig, ProtocolConfig};
use anot_core::stream::StreamConfig;
use anot_core::{BuildConfig, ScoreConfig, ThetaMode, Thresholds};
use serde::Deserialize;

/// Every knob a subcommand may read. Unset options keep library defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Categories per entity.
    pub k: Option<usize>,
    /// Recursion depth of the temporal walk.
    #[serde(rename = "K")]
    pub hops: Option<u32>,
    /// Timespan window.
    #[serde(rename = "L")]
    pub window: Option<u32>,
    pub max_gap: Option<u32>,
    pub max_edges: Option<usize>,
    pub min_support: Option<usize>,
    pub beta: Option<f64>,
    pub seed: Option<u64>,
    pub duration_mode: Option<bool>,
    pub theta: Option<String>,
    pub split: Option<[f64; 3]>,
    pub rate: Option<f64>,
    pub lambda: Option<f64>,
    pub tau_s: Option<f64>,
    pub tau_t: Option<f64>,
    pub threads: Option<usize>,
}

impl Settings {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(toml::from_str(&text)?)
    }

    /// `other`'s set fields win.
    pub fn overlay(self, other: Settings) -> Settings {
        Settings {
            k: other.k.or(self.k),
            hops: other.hops.or(self.hops),
            window: other.window.or(self.window),
            max_gap: other.max_gap.or(self.max_gap),
            max_edges: other.max_edges.or(self.max_edges),
            min_support: other.min_support.or(self.min_support),
            beta: other.beta.or(self.beta),
            seed: other.seed.or(self.seed),
            duration_mode: other.duration_mode.or(self.duration_mode),
            theta: other.theta.or(self.theta),
            split: other.split.or(self.split),
            rate: other.rate.or(self.rate),
            lambda: other.lambda.or(self.lambda),
            tau_s: other.tau_s.or(self.tau_s),
            tau_t: other.tau_t.or(self.tau_t),
            threads: other.threads.or(self.threads),
        }
    }

    pub fn theta_mode(&self) -> Result<ThetaMode, String> {
        match self.theta.as_deref() {
            None | Some("mismatch") => Ok(ThetaMode::Mismatch),
            Some("literal") => Ok(ThetaMode::Literal),
            Some(other) => Err(format!("unknown theta mode {other:?}, expected mismatch or literal")),
        }
    }

    /// Build knobs. `L` has no default that suits every dataset, so it
    /// must be given.
    pub fn build(&self) -> Result<BuildConfig, String> {
        let window = self.window.ok_or("--L is required: the timespan window depends on the dataset's granularity")?;
        let d = BuildConfig::default();
        Ok(BuildConfig {
            k: self.k.unwrap_or(d.k),
            window,
            chain_max_gap: self.max_gap.or(d.chain_max_gap),
            max_edges: self.max_edges.unwrap_or(d.max_edges),
            min_support: self.min_support.or(d.min_support),
            ..d
        })
    }

    /// Scoring knobs on top of what the model was built with.
    pub fn score(&self, built: &BuildConfig) -> Result<ScoreConfig, String> {
        let mut s = ScoreConfig::from_build(built);
        s.window = self.window.unwrap_or(s.window);
        s.chain_max_gap = self.max_gap.or(s.chain_max_gap);
        s.max_hops = self.hops.unwrap_or(s.max_hops);
        s.lambda = self.lambda.unwrap_or(s.lambda);
        s.theta = self.theta_mode()?;
        Ok(s)
    }

    pub fn thresholds(&self) -> Thresholds {
        let d = Thresholds::default();
        Thresholds { static_score: self.tau_s.unwrap_or(d.static_score), temporal_score: self.tau_t.unwrap_or(d.temporal_score) }
    }

    /// Thresholds only when one was asked for.
    pub fn explicit_thresholds(&self) -> Option<Thresholds> {
        (self.tau_s.is_some() || self.tau_t.is_some()).then(|| self.thresholds())
    }

    pub fn inject(&self) -> InjectConfig {
        let d = InjectConfig::default();
        InjectConfig { rate: self.rate.unwrap_or(d.rate), seed: self.seed.unwrap_or(d.seed), ..d }
    }

    pub fn protocol(&self, updater: bool) -> Result<ProtocolConfig, String> {
        let build = self.build()?;
        let d = ProtocolConfig::default();
        Ok(ProtocolConfig {
            split: self.split.unwrap_or(d.split),
            inject: self.inject(),
            beta: self.beta.unwrap_or(d.beta),
            build,
            score: self.score(&build)?,
            stream: StreamConfig { updater, thresholds: self.explicit_thresholds(), ..StreamConfig::default() },
            ..d
        })
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(0)
    }

    /// Effective values as `# key = value` lines.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let d = BuildConfig::default();
        let p = ProtocolConfig::default();
        let e = |v: Option<String>, dflt: String| v.unwrap_or(dflt);
        let fields = [
            ("k", e(self.k.map(|x| x.to_string()), d.k.to_string())),
            ("K", e(self.hops.map(|x| x.to_string()), p.score.max_hops.to_string())),
            ("L", e(self.window.map(|x| x.to_string()), "unset".into())),
            ("max_gap", e(self.max_gap.map(|x| x.to_string()), "none".into())),
            ("max_edges", e(self.max_edges.map(|x| x.to_string()), d.max_edges.to_string())),
            ("min_support", e(self.min_support.map(|x| x.to_string()), "auto".into())),
            ("beta", e(self.beta.map(|x| x.to_string()), p.beta.to_string())),
            ("seed", e(self.seed.map(|x| x.to_string()), p.inject.seed.to_string())),
            ("duration_mode", self.duration_mode.unwrap_or(false).to_string()),
            ("theta", self.theta.clone().unwrap_or_else(|| "mismatch".into())),
            ("split", format!("{:?}", self.split.unwrap_or(p.split))),
            ("rate", e(self.rate.map(|x| x.to_string()), p.inject.rate.to_string())),
            ("lambda", e(self.lambda.map(|x| x.to_string()), p.score.lambda.to_string())),
            ("tau_s", self.thresholds().static_score.to_string()),
            ("tau_t", self.thresholds().temporal_score.to_string()),
        ];
        for (k, v) in fields {
            writeln!(s, "# {k} = {v}").unwrap();
        }
        s
    }
}
