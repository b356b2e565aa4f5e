//! Flat `key=value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, keys are dotted
//! (`topology.m`, `caden.mu_z`). Every key has a default; unknown or
//! repeated keys are errors. [`ExperimentConfig::to_text`] writes every key
//! in sorted order, so parse → serialize is a fixed point.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use caden::losses::BlobSpec;

use crate::error::{HarnessError, Result};

/// `auto` or an explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coef {
    Auto,
    Value(f64),
}

impl Coef {
    pub fn or(self, fallback: f64) -> f64 {
        match self {
            Coef::Auto => fallback,
            Coef::Value(v) => v,
        }
    }
}

impl fmt::Display for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coef::Auto => f.write_str("auto"),
            Coef::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Random { m: usize, edge_prob: f64 },
    Complete { m: usize },
    Ring { m: usize },
    Path { m: usize },
    EdgeList { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Blobs(BlobSpec),
    /// IDX image/label pair; `limit = 0` keeps every sample.
    Idx { images: PathBuf, labels: PathBuf, limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// `½(x − a_i)ᵀ diag(q)(x − a_i)` with `q` log-spaced on `[1, kappa]`.
    /// Centers are uniform on `[−spread, spread]` unless listed per agent.
    Quadratic { dim: usize, kappa: f64, spread: f64, centers: Option<Vec<f64>> },
    Logistic { data: DataSource, l2: f64 },
    Mlp { data: DataSource, hidden: usize, l2: f64 },
}

impl LossSpec {
    pub fn is_classification(&self) -> bool {
        !matches!(self, LossSpec::Quadratic { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Caden,
    CadenGd,
    Gt,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Caden => "caden",
            Algorithm::CadenGd => "caden_gd",
            Algorithm::Gt => "gt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    /// User-set `μ_y` and `τ`.
    Practice,
    /// Parameters chosen from the rate bound.
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauPlan {
    Constant,
    /// `tau` before `switch_round`, `after` from then on.
    Reduced { switch_round: usize, after: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rounds: usize,
    pub algorithm: Algorithm,
    pub topology: TopologySpec,
    pub loss: LossSpec,
    /// Seed for data sharding and quadratic centers; defaults to `seed`.
    pub shard_seed: Option<u64>,
    pub test_fraction: f64,
    pub mode: ParamMode,
    pub mu_z: Coef,
    pub mu_y: Coef,
    pub tau: usize,
    pub tau_plan: TauPlan,
    pub participation: f64,
    pub memory: usize,
    pub secant_line_search: bool,
    pub gd_step: Coef,
    pub contraction_probe: usize,
    pub gt_step: Coef,
    pub gt_tune_rounds: usize,
    pub warm_start: bool,
    pub warm_epochs: usize,
    pub warm_lr: f64,
    pub probe_epochs: usize,
    pub probe_lr: f64,
    pub zero_init: bool,
    pub metrics_every: usize,
    pub thresholds: Vec<f64>,
    pub acc_thresholds: Vec<f64>,
    pub wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            rounds: 500,
            algorithm: Algorithm::Caden,
            topology: TopologySpec::Random { m: 20, edge_prob: 0.2 },
            loss: LossSpec::Mlp { data: DataSource::Blobs(BlobSpec::default()), hidden: 40, l2: 1e-4 },
            shard_seed: None,
            test_fraction: 0.2,
            mode: ParamMode::Practice,
            mu_z: Coef::Auto,
            mu_y: Coef::Auto,
            tau: 5,
            tau_plan: TauPlan::Constant,
            participation: 1.0,
            memory: 10,
            secant_line_search: false,
            gd_step: Coef::Auto,
            contraction_probe: 5,
            gt_step: Coef::Auto,
            gt_tune_rounds: 100,
            warm_start: true,
            warm_epochs: 20,
            warm_lr: 0.1,
            probe_epochs: 10,
            probe_lr: 1e-7,
            zero_init: false,
            metrics_every: 1,
            thresholds: vec![1e-2, 1e-4, 1e-6],
            acc_thresholds: vec![0.8, 0.9],
            wall_time: true,
        }
    }
}

/// Every recognised key, sorted.
pub fn known_keys() -> Vec<&'static str> {
    let mut keys: Vec<_> = ExperimentConfig::default().to_map().into_keys().collect();
    keys.sort_unstable();
    keys
}

fn list(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl ExperimentConfig {
    /// Parses text over the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| HarnessError::Config {
                line: n + 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if raw.insert(k.clone(), v).is_some() {
                return Err(HarnessError::Config { line: n + 1, msg: format!("duplicate key {k}") });
            }
        }
        Self::from_overrides(&raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Defaults overlaid with `overrides`.
    pub fn from_overrides(overrides: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = ExperimentConfig::default().to_map();
        for (k, v) in overrides {
            match map.get_mut(k.as_str()) {
                Some(slot) => *slot = v.clone(),
                None => return Err(HarnessError::UnknownKey(k.clone())),
            }
        }
        Self::from_map(&map)
    }

    /// A copy with one key replaced.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut map: BTreeMap<String, String> = self.to_map().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        if !map.contains_key(key) {
            return Err(HarnessError::UnknownKey(key.to_string()));
        }
        map.insert(key.to_string(), value.to_string());
        Self::from_overrides(&map)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_map() {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    pub fn shard_seed(&self) -> u64 {
        self.shard_seed.unwrap_or(self.seed)
    }

    pub fn num_agents(&self) -> Option<usize> {
        match &self.topology {
            TopologySpec::Random { m, .. }
            | TopologySpec::Complete { m }
            | TopologySpec::Ring { m }
            | TopologySpec::Path { m } => Some(*m),
            TopologySpec::EdgeList { .. } => None,
        }
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let d = ExperimentConfig::default_blob_and_quadratic();
        let mut m = BTreeMap::new();
        m.insert("seed", self.seed.to_string());
        m.insert("rounds", self.rounds.to_string());
        m.insert("algorithm", self.algorithm.name().to_string());

        let (kind, agents, prob, file) = match &self.topology {
            TopologySpec::Random { m, edge_prob } => ("random", *m, *edge_prob, String::new()),
            TopologySpec::Complete { m } => ("complete", *m, d.edge_prob, String::new()),
            TopologySpec::Ring { m } => ("ring", *m, d.edge_prob, String::new()),
            TopologySpec::Path { m } => ("path", *m, d.edge_prob, String::new()),
            TopologySpec::EdgeList { file } => ("edge_list", d.m, d.edge_prob, path_str(file)),
        };
        m.insert("topology.kind", kind.into());
        m.insert("topology.m", agents.to_string());
        m.insert("topology.edge_prob", prob.to_string());
        m.insert("topology.file", file);

        let mut blobs = d.blobs;
        let mut idx = (String::new(), String::new(), 0usize);
        let mut data_kind = "blobs";
        let (mut hidden, mut l2) = (d.hidden, d.l2);
        let (mut dim, mut kappa, mut spread, mut centers) = (d.dim, d.kappa, d.spread, String::new());
        let mut set_data = |data: &DataSource| match data {
            DataSource::Blobs(b) => blobs = *b,
            DataSource::Idx { images, labels, limit } => {
                data_kind = "idx";
                idx = (path_str(images), path_str(labels), *limit);
            }
        };
        let loss_kind = match &self.loss {
            LossSpec::Quadratic { dim: dd, kappa: k, spread: s, centers: c } => {
                (dim, kappa, spread) = (*dd, *k, *s);
                centers = c.as_deref().map(list).unwrap_or_default();
                "quadratic"
            }
            LossSpec::Logistic { data, l2: r } => {
                set_data(data);
                l2 = *r;
                "logistic"
            }
            LossSpec::Mlp { data, hidden: h, l2: r } => {
                set_data(data);
                (hidden, l2) = (*h, *r);
                "mlp"
            }
        };
        m.insert("loss.kind", loss_kind.into());
        m.insert("loss.data", data_kind.into());
        m.insert("loss.samples", blobs.samples.to_string());
        m.insert("loss.classes", blobs.classes.to_string());
        m.insert("loss.features", blobs.features.to_string());
        m.insert("loss.blob_spread", blobs.center_spread.to_string());
        m.insert("loss.noise", blobs.noise.to_string());
        m.insert("loss.idx_images", idx.0);
        m.insert("loss.idx_labels", idx.1);
        m.insert("loss.idx_limit", idx.2.to_string());
        m.insert("loss.hidden", hidden.to_string());
        m.insert("loss.l2", l2.to_string());
        m.insert("loss.dim", dim.to_string());
        m.insert("loss.kappa", kappa.to_string());
        m.insert("loss.center_spread", spread.to_string());
        m.insert("loss.centers", centers);
        m.insert("loss.shard_seed", self.shard_seed.map_or("auto".into(), |s| s.to_string()));
        m.insert("loss.test_fraction", self.test_fraction.to_string());

        m.insert("caden.mode", match self.mode {
            ParamMode::Practice => "practice",
            ParamMode::Theory => "theory",
        }
        .into());
        m.insert("caden.mu_z", self.mu_z.to_string());
        m.insert("caden.mu_y", self.mu_y.to_string());
        m.insert("caden.tau", self.tau.to_string());
        let (plan, switch, after) = match self.tau_plan {
            TauPlan::Constant => ("constant", 100, 1),
            TauPlan::Reduced { switch_round, after } => ("reduced", switch_round, after),
        };
        m.insert("caden.tau_schedule", plan.into());
        m.insert("caden.tau_switch", switch.to_string());
        m.insert("caden.tau_after", after.to_string());
        m.insert("caden.participation", self.participation.to_string());
        m.insert("caden.memory", self.memory.to_string());
        m.insert("caden.line_search", if self.secant_line_search { "secant" } else { "armijo" }.into());
        m.insert("caden.gd_step", self.gd_step.to_string());
        m.insert("caden.contraction_probe", self.contraction_probe.to_string());
        m.insert("gt.step", self.gt_step.to_string());
        m.insert("gt.tune_rounds", self.gt_tune_rounds.to_string());
        m.insert("init.warm_start", self.warm_start.to_string());
        m.insert("init.warm_epochs", self.warm_epochs.to_string());
        m.insert("init.warm_lr", self.warm_lr.to_string());
        m.insert("init.probe_epochs", self.probe_epochs.to_string());
        m.insert("init.probe_lr", self.probe_lr.to_string());
        m.insert("init.x0", if self.zero_init { "zero" } else { "auto" }.into());
        m.insert("metrics.every", self.metrics_every.to_string());
        m.insert("metrics.thresholds", list(&self.thresholds));
        m.insert("metrics.acc_thresholds", list(&self.acc_thresholds));
        m.insert("metrics.timing", if self.wall_time { "wall" } else { "none" }.into());
        m
    }

    fn from_map(map: &BTreeMap<&'static str, String>) -> Result<Self> {
        let r = Reader(map);
        let topology = match r.str("topology.kind") {
            "random" => TopologySpec::Random { m: r.parse("topology.m")?, edge_prob: r.parse("topology.edge_prob")? },
            "complete" => TopologySpec::Complete { m: r.parse("topology.m")? },
            "ring" => TopologySpec::Ring { m: r.parse("topology.m")? },
            "path" => TopologySpec::Path { m: r.parse("topology.m")? },
            "edge_list" => TopologySpec::EdgeList { file: r.path("topology.file")? },
            other => return Err(r.bad("topology.kind", other)),
        };
        let data = || -> Result<DataSource> {
            match r.str("loss.data") {
                "blobs" => Ok(DataSource::Blobs(BlobSpec {
                    samples: r.parse("loss.samples")?,
                    classes: r.parse("loss.classes")?,
                    features: r.parse("loss.features")?,
                    center_spread: r.parse("loss.blob_spread")?,
                    noise: r.parse("loss.noise")?,
                })),
                "idx" => Ok(DataSource::Idx {
                    images: r.path("loss.idx_images")?,
                    labels: r.path("loss.idx_labels")?,
                    limit: r.parse("loss.idx_limit")?,
                }),
                other => Err(r.bad("loss.data", other)),
            }
        };
        let loss = match r.str("loss.kind") {
            "quadratic" => {
                let centers = r.str("loss.centers");
                LossSpec::Quadratic {
                    dim: r.parse("loss.dim")?,
                    kappa: r.parse("loss.kappa")?,
                    spread: r.parse("loss.center_spread")?,
                    centers: if centers.is_empty() { None } else { Some(r.floats("loss.centers")?) },
                }
            }
            "logistic" => LossSpec::Logistic { data: data()?, l2: r.parse("loss.l2")? },
            "mlp" => LossSpec::Mlp { data: data()?, hidden: r.parse("loss.hidden")?, l2: r.parse("loss.l2")? },
            other => return Err(r.bad("loss.kind", other)),
        };
        let tau_plan = match r.str("caden.tau_schedule") {
            "constant" => TauPlan::Constant,
            "reduced" => TauPlan::Reduced { switch_round: r.parse("caden.tau_switch")?, after: r.parse("caden.tau_after")? },
            other => return Err(r.bad("caden.tau_schedule", other)),
        };
        let cfg = ExperimentConfig {
            seed: r.parse("seed")?,
            rounds: r.parse("rounds")?,
            algorithm: match r.str("algorithm") {
                "caden" => Algorithm::Caden,
                "caden_gd" => Algorithm::CadenGd,
                "gt" => Algorithm::Gt,
                other => return Err(r.bad("algorithm", other)),
            },
            topology,
            loss,
            shard_seed: match r.str("loss.shard_seed") {
                "auto" => None,
                _ => Some(r.parse("loss.shard_seed")?),
            },
            test_fraction: r.parse("loss.test_fraction")?,
            mode: match r.str("caden.mode") {
                "practice" => ParamMode::Practice,
                "theory" => ParamMode::Theory,
                other => return Err(r.bad("caden.mode", other)),
            },
            mu_z: r.coef("caden.mu_z")?,
            mu_y: r.coef("caden.mu_y")?,
            tau: r.parse("caden.tau")?,
            tau_plan,
            participation: r.parse("caden.participation")?,
            memory: r.parse("caden.memory")?,
            secant_line_search: match r.str("caden.line_search") {
                "armijo" => false,
                "secant" => true,
                other => return Err(r.bad("caden.line_search", other)),
            },
            gd_step: r.coef("caden.gd_step")?,
            contraction_probe: r.parse("caden.contraction_probe")?,
            gt_step: r.coef("gt.step")?,
            gt_tune_rounds: r.parse("gt.tune_rounds")?,
            warm_start: r.parse("init.warm_start")?,
            warm_epochs: r.parse("init.warm_epochs")?,
            warm_lr: r.parse("init.warm_lr")?,
            probe_epochs: r.parse("init.probe_epochs")?,
            probe_lr: r.parse("init.probe_lr")?,
            zero_init: match r.str("init.x0") {
                "auto" => false,
                "zero" => true,
                other => return Err(r.bad("init.x0", other)),
            },
            metrics_every: r.parse("metrics.every")?,
            thresholds: r.floats("metrics.thresholds")?,
            acc_thresholds: r.floats("metrics.acc_thresholds")?,
            wall_time: match r.str("metrics.timing") {
                "wall" => true,
                "none" => false,
                other => return Err(r.bad("metrics.timing", other)),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Invalid(msg));
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return fail(format!("caden.participation must lie in (0, 1], got {}", self.participation));
        }
        if self.algorithm == Algorithm::Gt && self.participation < 1.0 {
            return fail("gradient tracking runs with full participation only".into());
        }
        if self.metrics_every == 0 {
            return fail("metrics.every must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return fail(format!("loss.test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        if let Some(m) = self.num_agents() {
            if m < 2 {
                return fail(format!("topology.m must be at least 2, got {m}"));
            }
        }
        if let LossSpec::Quadratic { dim, kappa, centers: Some(c), .. } = &self.loss {
            if *dim == 0 || *kappa < 1.0 {
                return fail("quadratic losses need loss.dim >= 1 and loss.kappa >= 1".into());
            }
            if self.num_agents().is_some_and(|m| m != c.len()) {
                return fail(format!("loss.centers lists {} values for {:?} agents", c.len(), self.num_agents()));
            }
        }
        Ok(())
    }

    fn default_blob_and_quadratic() -> Defaults {
        Defaults { m: 20, edge_prob: 0.2, blobs: BlobSpec::default(), hidden: 40, l2: 1e-4, dim: 10, kappa: 10.0, spread: 1.0 }
    }
}

/// Values used for keys the active variant does not read.
struct Defaults {
    m: usize,
    edge_prob: f64,
    blobs: BlobSpec,
    hidden: usize,
    l2: f64,
    dim: usize,
    kappa: f64,
    spread: f64,
}

struct Reader<'a>(&'a BTreeMap<&'static str, String>);

impl Reader<'_> {
    fn str(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    fn bad(&self, key: &str, value: &str) -> HarnessError {
        HarnessError::Invalid(format!("{key}: unsupported value {value:?}"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key);
        v.parse().map_err(|_| self.bad(key, v))
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        match self.str(key) {
            "" => Err(HarnessError::Invalid(format!("{key} is required"))),
            v => Ok(PathBuf::from(v)),
        }
    }

    fn coef(&self, key: &str) -> Result<Coef> {
        match self.str(key) {
            "auto" => Ok(Coef::Auto),
            _ => self.parse(key).map(Coef::Value),
        }
    }

    fn floats(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.str(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|s| s.trim().parse().map_err(|_| self.bad(key, v))).collect()
    }
}
