//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every key belongs to exactly one section and may also be given on the command line
//! as `--key value` (dashes and underscores are interchangeable). Lists are
//! whitespace-separated, since environment ids contain commas; seed lists also accept a
//! half-open range `a..b`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use discor_core::approx::{ApproxSpec, DEFAULT_STEP_SIZE};
use discor_core::diagnostics::CosineMarginal;
use discor_core::trainer::{Exploration, Mode, OracleSide, TrainConfig};
use discor_core::weighting::SchemeKind;

use crate::error::{LabError, LabResult};

pub const OUT_ENV: &str = "DISCOR_LAB_OUT";
pub const DEFAULT_OUT: &str = "discor-lab-out";

pub struct KeySpec {
    pub name: &'static str,
    pub section: &'static str,
    pub default: &'static str,
}

const fn key(section: &'static str, name: &'static str, default: &'static str) -> KeySpec {
    KeySpec { name, section, default }
}

pub const SECTIONS: [&str; 4] = ["experiment", "train", "sweep", "verify"];

/// `auto` defers to the environment or mode.
pub const KEYS: &[KeySpec] = &[
    key("experiment", "env", "grid16onehotsparse"),
    key("experiment", "scheme", "discor"),
    key("experiment", "mode", "sampled"),
    key("experiment", "approx", "tabular"),
    key("experiment", "iters", "auto"),
    key("experiment", "seed", "0"),
    key("experiment", "out", "auto"),
    key("train", "samples_per_iter", "100"),
    key("train", "batch_size", "256"),
    key("train", "budget", "200"),
    key("train", "step_size", "auto"),
    key("train", "temperature", "1"),
    key("train", "temperature_decay", "0.995"),
    key("train", "temperature_floor", "0.01"),
    key("train", "discount", "auto"),
    key("train", "replay_capacity", "auto"),
    key("train", "tau0", "10"),
    key("train", "tau_rate", "0.005"),
    key("train", "delta_rate", "auto"),
    key("train", "per_alpha", "1"),
    key("train", "per_epsilon", "0.001"),
    key("train", "oracle_side", "target"),
    key("train", "cosine_marginal", "state-action"),
    key("sweep", "envs", "auto"),
    key("sweep", "schemes", "uniform per discor"),
    key("sweep", "seeds", "0..5"),
    key("sweep", "baselines", "uniform"),
    key("sweep", "jobs", "1"),
    key("verify", "bound", "thm3"),
    key("verify", "trials", "1000"),
    key("verify", "tol", "auto"),
    key("verify", "depths", "3 4 5 6 7"),
    key("verify", "corrupt_delta", "false"),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// Key/value pairs as written, with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    values: BTreeMap<&'static str, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> LabResult<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<&str> = None;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| LabError::config(n, "section", format!("unterminated header `{line}`")))?
                    .trim();
                section = Some(
                    SECTIONS
                        .iter()
                        .find(|s| **s == name)
                        .copied()
                        .ok_or_else(|| LabError::config(n, name, format!("unknown section; expected one of {}", SECTIONS.join(", "))))?,
                );
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(n, line, "expected `key = value`"))?;
            let k = k.trim();
            let spec = spec(k).ok_or_else(|| LabError::config(n, k, "unknown key"))?;
            match section {
                None => return Err(LabError::config(n, k, format!("key outside a section; it belongs in [{}]", spec.section))),
                Some(s) if s != spec.section => {
                    return Err(LabError::config(n, k, format!("key belongs in [{}], not [{s}]", spec.section)));
                }
                _ => {}
            }
            if raw.values.contains_key(spec.name) {
                return Err(LabError::config(n, k, "duplicate key"));
            }
            raw.values.insert(spec.name, (v.trim().to_string(), n));
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str, line: usize) -> LabResult<()> {
        let spec = spec(key).ok_or_else(|| LabError::config(line, key, "unknown key"))?;
        self.values.insert(spec.name, (value.to_string(), line));
        Ok(())
    }

    /// Apply `--key value` / `--key=value` pairs. Returns the `--config` path if given.
    pub fn apply_overrides(&mut self, args: &[String]) -> LabResult<()> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let body = arg
                .strip_prefix("--")
                .ok_or_else(|| LabError::config(0, arg, "expected `--key value`"))?;
            let (k, v) = match body.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| LabError::config(0, body, "missing value"))?;
                    (body.to_string(), v.clone())
                }
            };
            self.set(&k.replace('-', "_"), &v, 0)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> (&str, usize) {
        match self.values.get(key) {
            Some((v, line)) => (v.as_str(), *line),
            None => (spec(key).expect("known key").default, 0),
        }
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }
}

/// Split `--config <path>` out of an override list.
pub fn take_config_path(args: &[String]) -> LabResult<(Option<PathBuf>, Vec<String>)> {
    let mut path = None;
    let mut rest = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            let p = it.next().ok_or_else(|| LabError::config(0, "config", "missing path"))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a.clone());
        }
    }
    Ok((path, rest))
}

/// Load a config file (if any) and apply command-line overrides on top.
pub fn load(args: &[String]) -> LabResult<ExperimentConfig> {
    let (path, overrides) = take_config_path(args)?;
    let mut raw = match &path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::config(0, "config", format!("{}: {e}", p.display())))?;
            RawConfig::parse(&text)?
        }
        None => RawConfig::default(),
    };
    raw.apply_overrides(&overrides)?;
    ExperimentConfig::from_raw(&raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lemma,
    Thm3,
    Complexity,
}

impl Bound {
    pub fn id(self) -> &'static str {
        match self {
            Bound::Lemma => "lemma",
            Bound::Thm3 => "thm3",
            Bound::Complexity => "complexity",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub scheme: SchemeKind,
    pub mode: Mode,
    pub approx: ApproxSpec,
    pub iters: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub samples_per_iter: usize,
    pub batch_size: usize,
    pub budget: usize,
    pub exploration: Exploration,
    pub discount: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub tau0: f64,
    pub tau_rate: f64,
    pub delta_rate: Option<f64>,
    pub per_alpha: f64,
    pub per_epsilon: f64,
    pub oracle_side: OracleSide,
    pub cosine_marginal: CosineMarginal,
    pub envs: Vec<String>,
    pub schemes: Vec<SchemeKind>,
    pub seeds: Vec<u64>,
    pub baselines: Vec<SchemeKind>,
    pub jobs: usize,
    pub bound: Bound,
    pub trials: usize,
    pub tol: Option<f64>,
    pub depths: Vec<usize>,
    pub corrupt_delta: bool,
}

fn field<T>(raw: &RawConfig, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> LabResult<T> {
    let (v, line) = raw.get(key);
    parse(v).map_err(|m| LabError::config(line, key, m))
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse `{v}`"))
}

fn auto<T>(v: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse(v).map(Some)
    }
}

fn scheme_list(v: &str) -> Result<Vec<SchemeKind>, String> {
    v.split_whitespace()
        .map(|s| s.parse::<SchemeKind>().map_err(|e| e.to_string()))
        .collect()
}

pub fn parse_seeds(v: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = v.trim().split_once("..") {
        let (a, b): (u64, u64) = (num(a.trim())?, num(b.trim())?);
        if a >= b {
            return Err(format!("empty seed range `{v}`"));
        }
        if b - a > 100_000 {
            return Err(format!("seed range `{v}` too large"));
        }
        return Ok((a..b).collect());
    }
    let seeds: Vec<u64> = v.split_whitespace().map(num).collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    Ok(seeds)
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> LabResult<Self> {
        let mode: Mode = field(raw, "mode", |v| v.parse().map_err(|e: discor_core::Error| e.to_string()))?;
        let mut approx = field(raw, "approx", |v| ApproxSpec::parse(v).map_err(|e| e.to_string()))?;
        let step = field(raw, "step_size", |v| auto(v, num::<f64>))?;
        if let Some(s) = step {
            match &mut approx {
                ApproxSpec::Mlp { step_size, .. } if s > 0.0 && s.is_finite() => *step_size = s,
                ApproxSpec::Mlp { .. } => return Err(LabError::config(raw.get("step_size").1, "step_size", "must be positive")),
                _ => return Err(LabError::config(raw.get("step_size").1, "step_size", "only applies to mlp approximators")),
            }
        }
        let env: String = field(raw, "env", |v| Ok(v.to_string()))?;
        let envs = field(raw, "envs", |v| {
            Ok(if v == "auto" { vec![env.clone()] } else { v.split_whitespace().map(str::to_string).collect() })
        })?;
        if envs.is_empty() {
            return Err(LabError::config(raw.get("envs").1, "envs", "no environments"));
        }
        let out = field(raw, "out", |v| {
            Ok(if v == "auto" {
                std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from)
            } else {
                PathBuf::from(v)
            })
        })?;
        let iters = field(raw, "iters", |v| auto(v, num::<usize>))?.unwrap_or(if mode == Mode::Exact { 300 } else { 500 });
        let bound = field(raw, "bound", |v| match v {
            "lemma" => Ok(Bound::Lemma),
            "thm3" => Ok(Bound::Thm3),
            "complexity" => Ok(Bound::Complexity),
            _ => Err(format!("unknown bound `{v}`; expected lemma, thm3 or complexity")),
        })?;
        let cfg = ExperimentConfig {
            scheme: field(raw, "scheme", |v| v.parse().map_err(|e: discor_core::Error| e.to_string()))?,
            mode,
            approx,
            iters,
            seed: field(raw, "seed", num)?,
            out,
            samples_per_iter: field(raw, "samples_per_iter", num)?,
            batch_size: field(raw, "batch_size", num)?,
            budget: field(raw, "budget", num)?,
            exploration: Exploration {
                temperature: field(raw, "temperature", num)?,
                decay: field(raw, "temperature_decay", num)?,
                floor: field(raw, "temperature_floor", num)?,
            },
            discount: field(raw, "discount", |v| auto(v, num))?,
            replay_capacity: field(raw, "replay_capacity", |v| auto(v, num))?,
            tau0: field(raw, "tau0", num)?,
            tau_rate: field(raw, "tau_rate", num)?,
            delta_rate: field(raw, "delta_rate", |v| auto(v, num))?,
            per_alpha: field(raw, "per_alpha", num)?,
            per_epsilon: field(raw, "per_epsilon", num)?,
            oracle_side: field(raw, "oracle_side", |v| v.parse().map_err(|e: discor_core::Error| e.to_string()))?,
            cosine_marginal: field(raw, "cosine_marginal", |v| v.parse().map_err(|e: discor_core::Error| e.to_string()))?,
            envs,
            schemes: field(raw, "schemes", scheme_list)?,
            seeds: field(raw, "seeds", parse_seeds)?,
            baselines: field(raw, "baselines", scheme_list)?,
            jobs: field(raw, "jobs", |v| match num::<usize>(v)? {
                0 => Err("jobs must be at least 1".into()),
                n => Ok(n),
            })?,
            bound,
            trials: field(raw, "trials", num)?,
            tol: field(raw, "tol", |v| auto(v, num))?,
            depths: field(raw, "depths", |v| v.split_whitespace().map(num).collect())?,
            corrupt_delta: field(raw, "corrupt_delta", boolean)?,
            env,
        };
        // the trainer's own checks, reported against the key most likely at fault
        cfg.train_config(&cfg.env, cfg.scheme, cfg.seed)
            .validate()
            .map_err(|e| LabError::config(0, "train", e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for e in &cfg.envs {
            for s in &cfg.schemes {
                if !seen.insert((e.clone(), *s)) {
                    return Err(LabError::config(raw.get("schemes").1, "schemes", format!("duplicate sweep cell {e} × {s}")));
                }
            }
        }
        if cfg.seeds.iter().collect::<std::collections::BTreeSet<_>>().len() != cfg.seeds.len() {
            return Err(LabError::config(raw.get("seeds").1, "seeds", "duplicate seed"));
        }
        Ok(cfg)
    }

    pub fn train_config(&self, env: &str, scheme: SchemeKind, seed: u64) -> TrainConfig {
        let mut c = TrainConfig::new(env, scheme, self.mode);
        c.approx = self.approx.clone();
        c.iterations = self.iters;
        c.samples_per_iter = self.samples_per_iter;
        c.batch_size = self.batch_size;
        c.budget = self.budget;
        c.exploration = self.exploration;
        c.seed = seed;
        c.discount = self.discount;
        c.replay_capacity = self.replay_capacity;
        c.tau0 = self.tau0;
        c.tau_rate = self.tau_rate;
        c.delta_rate = self.delta_rate;
        c.per_alpha = self.per_alpha;
        c.per_epsilon = self.per_epsilon;
        c.oracle_side = self.oracle_side;
        c.cosine_marginal = self.cosine_marginal;
        c
    }

    /// Canonical text of one run's configuration: every key, resolved, in a fixed order.
    /// Feeding it back through `--config` reproduces the run.
    pub fn run_config_text(&self, env: &str, scheme: SchemeKind, seed: u64) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let step = match &self.approx {
            ApproxSpec::Mlp { step_size, .. } if *step_size != DEFAULT_STEP_SIZE => Some(fmt_f64(*step_size)),
            _ => None,
        };
        let value = |k: &str| -> String {
            match k {
                "env" => env.to_string(),
                "scheme" => scheme.id().to_string(),
                "mode" => self.mode.id().to_string(),
                "approx" => self.approx.name(),
                "iters" => self.iters.to_string(),
                "seed" => seed.to_string(),
                "out" => self.out.display().to_string(),
                "samples_per_iter" => self.samples_per_iter.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "budget" => self.budget.to_string(),
                "step_size" => opt(step.clone()),
                "temperature" => fmt_f64(self.exploration.temperature),
                "temperature_decay" => fmt_f64(self.exploration.decay),
                "temperature_floor" => fmt_f64(self.exploration.floor),
                "discount" => opt(self.discount.map(fmt_f64)),
                "replay_capacity" => opt(self.replay_capacity.map(|c| c.to_string())),
                "tau0" => fmt_f64(self.tau0),
                "tau_rate" => fmt_f64(self.tau_rate),
                "delta_rate" => opt(self.delta_rate.map(fmt_f64)),
                "per_alpha" => fmt_f64(self.per_alpha),
                "per_epsilon" => fmt_f64(self.per_epsilon),
                "oracle_side" => self.oracle_side.id().to_string(),
                "cosine_marginal" => self.cosine_marginal.id().to_string(),
                _ => unreachable!("run keys only"),
            }
        };
        let mut out = String::new();
        for section in ["experiment", "train"] {
            out.push_str(&format!("[{section}]\n"));
            for k in KEYS.iter().filter(|k| k.section == section) {
                out.push_str(&format!("{} = {}\n", k.name, value(k.name)));
            }
        }
        out
    }
}

/// Shortest decimal that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
