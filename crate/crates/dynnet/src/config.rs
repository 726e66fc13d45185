//! Experiment configuration: a JSON object, optionally read from a file, with
//! command-line flags patched over it before deserialisation.

use std::path::{Path, PathBuf};

use dynnet_core::bjr::{IterationOptions, DEFAULT_PANELS, DEFAULT_POINTS};
use dynnet_core::sim::{RunOptions, StopRule};
use dynnet_core::{ModelConfig, ModelParams, RngStream, SocialIndexDistribution};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stop {
    Population(usize),
    Time(f64),
}

impl From<Stop> for StopRule {
    fn from(s: Stop) -> Self {
        match s {
            Stop::Population(n) => StopRule::Population(n),
            Stop::Time(t) => StopRule::Time(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub panels: usize,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { panels: DEFAULT_PANELS, points: DEFAULT_POINTS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    Mu,
    Alpha,
    Beta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Mu => "mu",
            SweepParam::Alpha => "alpha",
            SweepParam::Beta => "beta",
        }
    }

    pub fn apply(self, mut p: ModelParams, v: f64) -> ModelParams {
        match self {
            SweepParam::Lambda => p.lambda = v,
            SweepParam::Mu => p.mu = v,
            SweepParam::Alpha => p.alpha = v,
            SweepParam::Beta => p.beta = v,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// `steps` values from `from` to `to` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.from + t * (self.to - self.from),
                    Spacing::Log => (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp(),
                }
            })
            .collect()
    }

    fn check(&self) -> Result<(), String> {
        if self.steps == 0 {
            return Err("sweep needs at least one step".into());
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err("sweep bounds must be finite".into());
        }
        if self.spacing == Spacing::Log && (self.from <= 0.0 || self.to <= 0.0) {
            return Err("log sweep needs positive bounds".into());
        }
        Ok(())
    }
}

/// `param:from:to:steps[:log]`
impl std::str::FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || format!("bad sweep `{s}` (expected param:from:to:steps[:log])");
        if !(4..=5).contains(&parts.len()) {
            return Err(bad());
        }
        let param = serde_json::from_value(Value::String(parts[0].to_ascii_lowercase())).map_err(|_| bad())?;
        let spacing = match parts.get(4) {
            None | Some(&"lin") | Some(&"linear") => Spacing::Linear,
            Some(&"log") => Spacing::Log,
            _ => return Err(bad()),
        };
        let spec = SweepSpec {
            param,
            from: parts[1].parse().map_err(|_| bad())?,
            to: parts[2].parse().map_err(|_| bad())?,
            steps: parts[3].parse().map_err(|_| bad())?,
            spacing,
        };
        spec.check()?;
        Ok(spec)
    }
}

fn default_stop() -> Stop {
    Stop::Population(10_000)
}
fn default_replicas() -> u32 {
    1
}
fn default_restarts() -> u32 {
    RunOptions::default().max_restarts
}
fn default_tolerance() -> f64 {
    IterationOptions::default().tolerance
}
fn default_iterations() -> usize {
    IterationOptions::default().max_iterations
}
fn default_margin() -> f64 {
    dynnet_core::critical::DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_stop")]
    pub stop: Stop,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_restarts")]
    pub max_restarts: u32,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Back analytic answers with simulation where a subcommand supports it.
    #[serde(default)]
    pub simulate: bool,
    /// Largest degree in pmf tables; chosen from the law when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(params: ModelParams, dist: SocialIndexDistribution) -> Self {
        let value = serde_json::to_value(ModelConfig { params, social_index: dist }).expect("model serialises");
        serde_json::from_value(value).expect("defaults fill the rest")
    }

    pub fn params(&self) -> ModelParams {
        self.model.params
    }

    pub fn dist(&self) -> &SocialIndexDistribution {
        &self.model.social_index
    }

    pub fn base_stream(&self) -> RngStream {
        RngStream::new(self.seed, 0)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { max_restarts: self.max_restarts }
    }

    pub fn iteration(&self) -> IterationOptions {
        IterationOptions { tolerance: self.tolerance, max_iterations: self.max_iterations }
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::InvalidConfig(m));
        self.model.params.validate_dynamics().map_err(|e| Failure::InvalidConfig(e.to_string()))?;
        self.model.social_index.validate().map_err(|e| Failure::InvalidConfig(e.to_string()))?;
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        match self.stop {
            Stop::Population(0) => return bad("stop population must be positive".into()),
            Stop::Time(t) if !(t.is_finite() && t >= 0.0) => return bad("stop time must be finite and >= 0".into()),
            _ => {}
        }
        if self.grid.panels == 0 || self.grid.points == 0 {
            return bad("grid needs at least one panel and one point".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive".into());
        }
        if let Some(s) = &self.sweep {
            s.check().map_err(Failure::InvalidConfig)?;
        }
        Ok(())
    }
}

/// Flag values that override the config file. `None` leaves a key alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub version: Option<String>,
    pub social_index: Option<SocialIndexDistribution>,
    pub seed: Option<u64>,
    pub stop: Option<Stop>,
    pub replicas: Option<u32>,
    pub out: Option<PathBuf>,
    pub max_restarts: Option<u32>,
    pub panels: Option<usize>,
    pub points: Option<usize>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub margin: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub simulate: Option<bool>,
    pub kmax: Option<u64>,
}

fn put<T: Serialize>(map: &mut Map<String, Value>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        map.insert(key.to_owned(), serde_json::to_value(v).expect("flag values serialise"));
    }
}

impl Overrides {
    fn apply(&self, map: &mut Map<String, Value>) {
        put(map, "lambda", &self.lambda);
        put(map, "mu", &self.mu);
        put(map, "alpha", &self.alpha);
        put(map, "beta", &self.beta);
        put(map, "version", &self.version.as_ref().map(|v| v.to_ascii_uppercase()));
        put(map, "social_index", &self.social_index);
        put(map, "seed", &self.seed);
        put(map, "stop", &self.stop);
        put(map, "replicas", &self.replicas);
        put(map, "out", &self.out);
        put(map, "max_restarts", &self.max_restarts);
        for (key, v) in [("panels", self.panels), ("points", self.points)] {
            if let Some(v) = v {
                let grid = map.entry("grid").or_insert_with(|| serde_json::to_value(GridSpec::default()).unwrap());
                if let Value::Object(g) = grid {
                    g.insert(key.to_owned(), v.into());
                }
            }
        }
        put(map, "tolerance", &self.tolerance);
        put(map, "max_iterations", &self.max_iterations);
        put(map, "margin", &self.margin);
        put(map, "sweep", &self.sweep);
        put(map, "simulate", &self.simulate);
        put(map, "kmax", &self.kmax);
    }
}

/// Reads `file` (if any), applies `overrides`, and validates the result. The
/// version defaults to U.
pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, Failure> {
    let mut map = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Failure::InvalidConfig("config must be a JSON object".into())),
                Err(e) => return Err(Failure::InvalidConfig(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    overrides.apply(&mut map);
    map.entry("version").or_insert_with(|| Value::String("U".into()));
    let cfg: ExperimentConfig =
        serde_json::from_value(Value::Object(map)).map_err(|e| Failure::InvalidConfig(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
