//! Run configuration: one JSON document, every field also settable as a
//! `--kebab-case` flag.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use galins::ekf::EkfVariant;
use galins::noise::{NoiseParams, PriorSigmas};
use galins::simulator::{SensorConfig, TrajectoryConfig};
use galins::twobody::TwoBodyConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Simulate,
    Replay,
    Twobody,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FilterKind {
    Eqf,
    EkfNoDelay,
    EkfFixed(f64),
    EkfOnline,
}

impl FilterKind {
    pub fn ekf_variant(&self) -> Option<EkfVariant> {
        match *self {
            FilterKind::Eqf => None,
            FilterKind::EkfNoDelay => Some(EkfVariant::NoDelay),
            FilterKind::EkfFixed(d) => Some(EkfVariant::FixedDelay(d)),
            FilterKind::EkfOnline => Some(EkfVariant::OnlineDelay),
        }
    }

    /// Dimension used for NEES.
    pub fn dim(&self) -> usize {
        self.ekf_variant().map_or(20, |v| v.dim())
    }

    /// Name safe for file names.
    pub fn file_tag(&self) -> String {
        self.to_string().replace(':', "_")
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterKind::Eqf => write!(f, "eqf"),
            FilterKind::EkfNoDelay => write!(f, "ekf-no-delay"),
            FilterKind::EkfFixed(d) => write!(f, "ekf-fixed:{d}"),
            FilterKind::EkfOnline => write!(f, "ekf-online"),
        }
    }
}

impl FromStr for FilterKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "eqf" => Ok(FilterKind::Eqf),
            "ekf-no-delay" => Ok(FilterKind::EkfNoDelay),
            "ekf-online" => Ok(FilterKind::EkfOnline),
            _ => {
                let d = s
                    .strip_prefix("ekf-fixed:")
                    .ok_or_else(|| format!("unknown filter '{s}'"))?
                    .parse::<f64>()
                    .map_err(|e| format!("bad delay in '{s}': {e}"))?;
                if !(d >= 0.0) {
                    return Err(format!("fixed delay must be non-negative, got {d}"));
                }
                Ok(FilterKind::EkfFixed(d))
            }
        }
    }
}

impl TryFrom<String> for FilterKind {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<FilterKind> for String {
    fn from(k: FilterKind) -> String {
        k.to_string()
    }
}

/// Settings of the filter driver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    /// Preintegration window, s. Must cover the largest delay estimate.
    pub horizon: f64,
    /// A run whose position error exceeds this is counted as diverged, m.
    pub divergence_ape: f64,
    /// Initial delay estimate, s.
    pub initial_delay: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self { horizon: 1.0, divergence_ape: 50.0, initial_delay: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub filters: Vec<FilterKind>,
    /// Delays simulated by `montecarlo`, one scenario each, ms.
    pub delays_ms: Vec<f64>,
    pub trajectory: TrajectoryConfig,
    pub sensor: SensorConfig,
    /// Filter noise model. The lever arm is always taken from `sensor`.
    pub noise: NoiseParams,
    pub prior: PriorSigmas,
    pub driver: DriverConfig,
    pub twobody: TwoBodyConfig,
    pub output_dir: PathBuf,
    pub log_dir: Option<PathBuf>,
    pub n_runs: usize,
    pub base_seed: u64,
    /// Length of the trailing window for NEES and delay-error medians, s.
    pub final_window: f64,
    /// Also write per-run CSVs in `montecarlo`.
    pub write_runs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: Scenario::Simulate,
            filters: vec![FilterKind::Eqf, FilterKind::EkfOnline],
            delays_ms: vec![100.0],
            trajectory: TrajectoryConfig::default(),
            sensor: SensorConfig::default(),
            noise: NoiseParams::default(),
            prior: PriorSigmas::default(),
            driver: DriverConfig::default(),
            twobody: TwoBodyConfig::default(),
            output_dir: PathBuf::from("galins-out"),
            log_dir: None,
            n_runs: 50,
            base_seed: 0,
            final_window: 30.0,
            write_runs: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scenario == Scenario::Replay && self.log_dir.is_none() {
            return Err(HarnessError::Config("replay needs log_dir".into()));
        }
        if self.filters.is_empty() {
            return Err(HarnessError::Config("at least one filter is required".into()));
        }
        if self.n_runs == 0 {
            return Err(HarnessError::Config("n_runs must be at least 1".into()));
        }
        if self.delays_ms.iter().any(|d| !(*d >= 0.0)) {
            return Err(HarnessError::Config("delays must be non-negative".into()));
        }
        if !(self.driver.horizon > 0.0) {
            return Err(HarnessError::Config("driver.horizon must be positive".into()));
        }
        self.trajectory.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.sensor.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Filter noise with the sensor's lever arm.
    pub fn filter_noise(&self) -> NoiseParams {
        NoiseParams { lever_arm: self.sensor.lever_arm, ..self.noise.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A configurable leaf of the JSON document, exposed as a CLI flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// JSON object path.
    pub path: Vec<String>,
    pub flag: String,
    pub is_array: bool,
}

/// Every leaf of the default configuration.
pub fn leaves() -> Vec<Leaf> {
    fn walk(v: &Value, path: &mut Vec<String>, out: &mut Vec<Leaf>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    path.push(k.clone());
                    walk(child, path, out);
                    path.pop();
                }
            }
            _ => out.push(Leaf {
                path: path.clone(),
                flag: path.join("-").replace('_', "-"),
                is_array: v.is_array(),
            }),
        }
    }
    let v = serde_json::to_value(RunConfig::default()).expect("config serializes");
    let mut out = Vec::new();
    walk(&v, &mut Vec::new(), &mut out);
    out
}

fn parse_scalar(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Sets a leaf from its command-line text. Arrays take comma-separated items.
pub fn apply_override(doc: &mut Value, leaf: &Leaf, raw: &str) -> Result<(), HarnessError> {
    let value = if leaf.is_array {
        if raw.trim_start().starts_with('[') {
            parse_scalar(raw)
        } else {
            Value::Array(raw.split(',').filter(|s| !s.is_empty()).map(|s| parse_scalar(s.trim())).collect())
        }
    } else {
        parse_scalar(raw)
    };
    let mut node = doc;
    for key in &leaf.path[..leaf.path.len() - 1] {
        node = node
            .as_object_mut()
            .and_then(|m| Some(m.entry(key.clone()).or_insert_with(|| Value::Object(Default::default()))))
            .ok_or_else(|| HarnessError::Config(format!("--{} does not address an object", leaf.flag)))?;
    }
    let last = leaf.path.last().expect("leaf path is never empty");
    node.as_object_mut()
        .ok_or_else(|| HarnessError::Config(format!("--{} does not address an object", leaf.flag)))?
        .insert(last.clone(), value);
    Ok(())
}

pub fn from_value(v: Value) -> Result<RunConfig, HarnessError> {
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| HarnessError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
