//! Run configuration: flat dotted keys in a TOML file, with overrides.
//!
//! ```toml
//! combo = "H+L"
//! mode = "train"
//! episodes = 200
//! seeds = [0]
//! env.capacity = 40
//! demand.quadrant_weights = [0.25, 0.25, 0.25, 0.25]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::demand::{DemandParams, SKEWED_WEIGHTS};
use crate::env::{EpisodeConfig, RestockPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum C2sKind {
    Heuristic,
    Learned,
    /// Learned, trained in two phases.
    Pretrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VrpKind {
    Heuristic,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentCombo {
    pub c2s: C2sKind,
    pub vrp: VrpKind,
}

impl AgentCombo {
    pub const ALL: [AgentCombo; 5] = [
        AgentCombo { c2s: C2sKind::Heuristic, vrp: VrpKind::Heuristic },
        AgentCombo { c2s: C2sKind::Learned, vrp: VrpKind::Heuristic },
        AgentCombo { c2s: C2sKind::Heuristic, vrp: VrpKind::Learned },
        AgentCombo { c2s: C2sKind::Learned, vrp: VrpKind::Learned },
        AgentCombo { c2s: C2sKind::Pretrained, vrp: VrpKind::Learned },
    ];

    pub fn new(c2s: C2sKind, vrp: VrpKind) -> Result<Self> {
        if c2s == C2sKind::Pretrained && vrp == VrpKind::Heuristic {
            return Err(Error::Config(vec!["combo P+H is not defined".into()]));
        }
        Ok(Self { c2s, vrp })
    }

    pub fn learns(&self) -> bool {
        self.c2s != C2sKind::Heuristic || self.vrp == VrpKind::Learned
    }

    pub fn learned_c2s(&self) -> bool {
        self.c2s != C2sKind::Heuristic
    }

    pub fn learned_vrp(&self) -> bool {
        self.vrp == VrpKind::Learned
    }

    /// Same C2S side, heuristic routing.
    pub fn heuristic_routing(&self) -> Self {
        let c2s = if self.c2s == C2sKind::Pretrained { C2sKind::Learned } else { self.c2s };
        Self { c2s, vrp: VrpKind::Heuristic }
    }
}

impl fmt::Display for AgentCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.c2s {
            C2sKind::Heuristic => "H",
            C2sKind::Learned => "L",
            C2sKind::Pretrained => "P",
        };
        let v = match self.vrp {
            VrpKind::Heuristic => "H",
            VrpKind::Learned => "L",
        };
        write!(f, "{c}+{v}")
    }
}

impl FromStr for AgentCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(vec![format!("combo {s:?}: expected one of H+H, L+H, H+L, L+L, P+L")]);
        let (c, v) = s.trim().split_once('+').ok_or_else(bad)?;
        let c2s = match c.trim().to_ascii_uppercase().as_str() {
            "H" => C2sKind::Heuristic,
            "L" => C2sKind::Learned,
            "P" => C2sKind::Pretrained,
            _ => return Err(bad()),
        };
        let vrp = match v.trim().to_ascii_uppercase().as_str() {
            "H" => VrpKind::Heuristic,
            "L" => VrpKind::Learned,
            _ => return Err(bad()),
        };
        Self::new(c2s, vrp).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardParams {
    pub a1: f64,
    pub a2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnParams {
    pub gamma: f64,
    pub c2s_lr: f64,
    pub vrp_lr: f64,
    pub batch: usize,
    pub buffer: usize,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Gradient steps per agent after each wave.
    pub train_steps: usize,
    /// First-phase episodes of two-phase training (0 means `episodes`).
    pub phase1_episodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaeParams {
    pub hidden: usize,
    pub graphs: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub skewed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub combo: AgentCombo,
    pub mode: Mode,
    pub episodes: u64,
    pub seeds: Vec<u64>,
    pub env: EpisodeConfig,
    pub demand: DemandParams,
    pub reward: RewardParams,
    pub learn: LearnParams,
    pub gae: GaeParams,
    pub eval: EvalParams,
    pub out_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            combo: AgentCombo { c2s: C2sKind::Heuristic, vrp: VrpKind::Heuristic },
            mode: Mode::Eval,
            episodes: 200,
            seeds: vec![0],
            env: EpisodeConfig::default(),
            demand: DemandParams::default(),
            reward: RewardParams { a1: 1.0, a2: 1.0 },
            learn: LearnParams {
                gamma: 0.9,
                c2s_lr: 1e-3,
                vrp_lr: 1e-3,
                batch: 512,
                buffer: 100_000,
                epsilon_decay: 0.999,
                epsilon_floor: 0.01,
                train_steps: 4,
                phase1_episodes: 0,
            },
            gae: GaeParams { hidden: 16, graphs: 100, epochs: 50, lr: 0.01, seed: 7 },
            eval: EvalParams { seeds: vec![100, 101, 102], episodes: 20, skewed: true },
            out_dir: PathBuf::from("out"),
            checkpoint_dir: PathBuf::from("checkpoints"),
        }
    }
}

/// Every accepted key.
pub const KEYS: [&str; 40] = [
    "combo",
    "mode",
    "episodes",
    "seeds",
    "env.warehouses",
    "env.wave_period",
    "env.horizon",
    "env.capacity",
    "env.speed",
    "env.service_time",
    "env.max_inventory",
    "env.restock",
    "demand.customers_min",
    "demand.customers_max",
    "demand.demand_min",
    "demand.demand_max",
    "demand.window_offset",
    "demand.window_width",
    "demand.quadrant_weights",
    "reward.a1",
    "reward.a2",
    "learn.gamma",
    "learn.c2s_lr",
    "learn.vrp_lr",
    "learn.batch",
    "learn.buffer",
    "learn.epsilon_decay",
    "learn.epsilon_floor",
    "learn.train_steps",
    "learn.phase1_episodes",
    "gae.hidden",
    "gae.graphs",
    "gae.epochs",
    "gae.lr",
    "gae.seed",
    "eval.seeds",
    "eval.episodes",
    "eval.skewed",
    "paths.out",
    "paths.checkpoints",
];

fn flatten(prefix: &str, table: &Table, out: &mut Vec<(String, Value)>, errors: &mut Vec<String>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) if prefix.is_empty() => flatten(&key, t, out, errors),
            Value::Table(_) => errors.push(format!("{key}: nesting deeper than one level")),
            _ => out.push((key, v.clone())),
        }
    }
}

fn float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn uint(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => None,
    }
}

fn pair(v: &Value) -> Option<(f64, f64)> {
    match v {
        Value::Array(a) if a.len() == 2 => Some((float(&a[0])?, float(&a[1])?)),
        _ => None,
    }
}

fn seeds(v: &Value) -> Option<Vec<u64>> {
    match v {
        Value::Array(a) => a.iter().map(uint).collect(),
        other => uint(other).map(|s| vec![s]),
    }
}

impl RunConfig {
    /// Applies `(key, value)` pairs; collects every problem.
    fn apply(&mut self, entries: &[(String, Value)], errors: &mut Vec<String>) {
        for (key, v) in entries {
            let mut bad = |what: &str| errors.push(format!("{key}: expected {what}, got {v}"));
            match key.as_str() {
                "combo" => match v.as_str().map(str::parse::<AgentCombo>) {
                    Some(Ok(c)) => self.combo = c,
                    _ => bad("one of H+H, L+H, H+L, L+L, P+L"),
                },
                "mode" => match v.as_str() {
                    Some("train") => self.mode = Mode::Train,
                    Some("eval") => self.mode = Mode::Eval,
                    _ => bad("\"train\" or \"eval\""),
                },
                "episodes" => uint(v).map_or_else(|| bad("a non-negative integer"), |x| self.episodes = x),
                "seeds" => seeds(v).map_or_else(|| bad("a list of non-negative integers"), |x| self.seeds = x),
                "env.warehouses" => uint(v).map_or_else(|| bad("an integer"), |x| self.env.n_warehouses = x as usize),
                "env.wave_period" => float(v).map_or_else(|| bad("a number"), |x| self.env.wave_period = x),
                "env.horizon" => float(v).map_or_else(|| bad("a number"), |x| self.env.horizon = x),
                "env.capacity" => match uint(v) {
                    Some(x) if x > 0 && x <= u64::from(u32::MAX) => self.env.vehicle_capacity = x as u32,
                    _ => bad("a positive integer"),
                },
                "env.speed" => float(v).map_or_else(|| bad("a number"), |x| self.env.vehicle_speed = x),
                "env.service_time" => float(v).map_or_else(|| bad("a number"), |x| self.env.service_time = x),
                "env.max_inventory" => match uint(v) {
                    Some(x) if x > 0 && x <= u64::from(u32::MAX) => self.env.max_inventory = x as u32,
                    _ => bad("a positive integer"),
                },
                "env.restock" => match v.as_str() {
                    Some("wave") => self.env.restock = RestockPolicy::EveryWave,
                    Some("half-wave") => self.env.restock = RestockPolicy::HalfWave,
                    _ => bad("\"wave\" or \"half-wave\""),
                },
                "demand.customers_min" => uint(v).map_or_else(|| bad("an integer"), |x| self.demand.customers_per_wave.0 = x as u32),
                "demand.customers_max" => uint(v).map_or_else(|| bad("an integer"), |x| self.demand.customers_per_wave.1 = x as u32),
                "demand.demand_min" => uint(v).map_or_else(|| bad("an integer"), |x| self.demand.demand_range.0 = x as u32),
                "demand.demand_max" => uint(v).map_or_else(|| bad("an integer"), |x| self.demand.demand_range.1 = x as u32),
                "demand.window_offset" => pair(v).map_or_else(|| bad("[low, high]"), |x| self.demand.window_offset = x),
                "demand.window_width" => pair(v).map_or_else(|| bad("[low, high]"), |x| self.demand.window_width = x),
                "demand.quadrant_weights" => match v {
                    Value::Array(a) if a.len() == 4 => match a.iter().map(float).collect::<Option<Vec<f64>>>() {
                        Some(w) => self.demand.quadrant_weights = [w[0], w[1], w[2], w[3]],
                        None => bad("four numbers"),
                    },
                    _ => bad("four numbers"),
                },
                "reward.a1" => float(v).map_or_else(|| bad("a number"), |x| self.reward.a1 = x),
                "reward.a2" => float(v).map_or_else(|| bad("a number"), |x| self.reward.a2 = x),
                "learn.gamma" => float(v).map_or_else(|| bad("a number"), |x| self.learn.gamma = x),
                "learn.c2s_lr" => float(v).map_or_else(|| bad("a number"), |x| self.learn.c2s_lr = x),
                "learn.vrp_lr" => float(v).map_or_else(|| bad("a number"), |x| self.learn.vrp_lr = x),
                "learn.batch" => uint(v).map_or_else(|| bad("an integer"), |x| self.learn.batch = x as usize),
                "learn.buffer" => uint(v).map_or_else(|| bad("an integer"), |x| self.learn.buffer = x as usize),
                "learn.epsilon_decay" => float(v).map_or_else(|| bad("a number"), |x| self.learn.epsilon_decay = x),
                "learn.epsilon_floor" => float(v).map_or_else(|| bad("a number"), |x| self.learn.epsilon_floor = x),
                "learn.train_steps" => uint(v).map_or_else(|| bad("an integer"), |x| self.learn.train_steps = x as usize),
                "learn.phase1_episodes" => uint(v).map_or_else(|| bad("an integer"), |x| self.learn.phase1_episodes = x),
                "gae.hidden" => uint(v).map_or_else(|| bad("an integer"), |x| self.gae.hidden = x as usize),
                "gae.graphs" => uint(v).map_or_else(|| bad("an integer"), |x| self.gae.graphs = x as usize),
                "gae.epochs" => uint(v).map_or_else(|| bad("an integer"), |x| self.gae.epochs = x as usize),
                "gae.lr" => float(v).map_or_else(|| bad("a number"), |x| self.gae.lr = x),
                "gae.seed" => uint(v).map_or_else(|| bad("an integer"), |x| self.gae.seed = x),
                "eval.seeds" => seeds(v).map_or_else(|| bad("a list of non-negative integers"), |x| self.eval.seeds = x),
                "eval.episodes" => uint(v).map_or_else(|| bad("an integer"), |x| self.eval.episodes = x),
                "eval.skewed" => v.as_bool().map_or_else(|| bad("true or false"), |x| self.eval.skewed = x),
                "paths.out" => v.as_str().map_or_else(|| bad("a path string"), |x| self.out_dir = PathBuf::from(x)),
                "paths.checkpoints" => {
                    v.as_str().map_or_else(|| bad("a path string"), |x| self.checkpoint_dir = PathBuf::from(x))
                }
                _ => errors.push(format!("unknown key {key:?}")),
            }
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.env.violations();
        v.extend(self.demand.violations());
        if self.mode == Mode::Train && !self.combo.learns() {
            v.push(format!("combo {} has nothing to train", self.combo));
        }
        if self.seeds.is_empty() {
            v.push("seeds must not be empty".into());
        }
        if self.eval.seeds.is_empty() {
            v.push("eval.seeds must not be empty".into());
        }
        if !(0.0..=1.0).contains(&self.learn.gamma) {
            v.push(format!("learn.gamma {} outside [0, 1]", self.learn.gamma));
        }
        if !(0.0..=1.0).contains(&self.learn.epsilon_decay) || !(0.0..=1.0).contains(&self.learn.epsilon_floor) {
            v.push("epsilon decay and floor must lie in [0, 1]".into());
        }
        if self.learn.c2s_lr < 0.0 || self.learn.vrp_lr < 0.0 || self.gae.lr < 0.0 {
            v.push("learning rates must be non-negative".into());
        }
        if self.learn.batch == 0 || self.learn.buffer < self.learn.batch {
            v.push(format!("learn.buffer {} must hold at least one batch of {}", self.learn.buffer, self.learn.batch));
        }
        if self.gae.hidden == 0 || self.gae.graphs == 0 {
            v.push("gae.hidden and gae.graphs must be positive".into());
        }
        v
    }

    /// Parses config text and then `overrides` (`key = value` in TOML value
    /// syntax; bare words are taken as strings).
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let mut errors = Vec::new();
        let mut entries = Vec::new();
        flatten("", &table, &mut entries, &mut errors);
        for (k, raw) in overrides {
            let value = format!("v = {raw}")
                .parse::<Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| Value::String(raw.clone()));
            entries.push((k.clone(), value));
        }
        let mut cfg = Self::default();
        cfg.apply(&entries, &mut errors);
        errors.extend(cfg.violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text, overrides)
    }

    pub fn epsilon(&self, episode: u64) -> f64 {
        self.learn.epsilon_decay.powf(episode as f64).max(self.learn.epsilon_floor)
    }

    pub fn phase1_episodes(&self) -> u64 {
        if self.learn.phase1_episodes == 0 {
            self.episodes
        } else {
            self.learn.phase1_episodes
        }
    }

    /// Demand used for evaluation: the training demand, skewed if asked.
    pub fn eval_demand(&self) -> DemandParams {
        let mut d = self.demand.clone();
        if self.eval.skewed {
            d.quadrant_weights = SKEWED_WEIGHTS;
        }
        d
    }
}
