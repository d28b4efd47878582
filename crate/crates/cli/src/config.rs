//! Experiment configuration: a flat `key=value` file, overridden by flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;
use wpisac_core::{Scenario, Scheme, SolverConfig, SystemParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected key=value, got {text:?}")]
    Syntax {
        path: String,
        line: usize,
        text: String,
    },

    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),

    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("give either a seed or a scenario file, not both")]
    TwoScenarioSources,

    #[error("{0} cannot be changed on a scenario loaded from file")]
    FrozenParam(String),

    #[error("sweep values must be positive and strictly increasing, got {0:?}")]
    SweepValues(Vec<f64>),

    #[error("sweep needs both an axis and a value list")]
    IncompleteSweep,

    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Scenario(#[from] wpisac_core::scenario::ScenarioError),
}

/// Seed used when neither a seed nor a scenario file is given.
pub const DEFAULT_SEED: u64 = 7;

/// Top-level keys accepted in a config file, spelled like the flags.
const KEYS: [&str; 12] = [
    "seed",
    "scenario",
    "scheme",
    "sweep-axis",
    "sweep-values",
    "out",
    "format",
    "jobs",
    "max-outer-iters",
    "lambda-th",
    "timing",
    "grid-points",
];

/// Parameters that shape geometry or channels and so are fixed once a
/// scenario exists.
const GEOMETRY_PARAMS: [&str; 5] = ["num_users", "num_targets", "kappa", "nu", "deploy_radius"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeSel {
    One(Scheme),
    All,
}

impl SchemeSel {
    pub fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeSel::One(s) => vec![s],
            SchemeSel::All => Scheme::ALL.to_vec(),
        }
    }
}

impl FromStr for SchemeSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            Ok(SchemeSel::All)
        } else {
            s.parse().map(SchemeSel::One)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Eta,
    P0,
}

impl SweepAxis {
    pub fn apply(self, params: &mut SystemParams, value: f64) {
        match self {
            SweepAxis::Eta => params.eta = value,
            SweepAxis::P0 => params.p0 = value,
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eta" => Ok(SweepAxis::Eta),
            "p0" => Ok(SweepAxis::P0),
            other => Err(format!("unknown sweep axis {other:?} (eta | p0)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (csv | json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    Seed(u64),
    File(PathBuf),
}

/// Raw settings before resolution, keyed like the flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub values: BTreeMap<String, String>,
    /// `params.<name>` overrides in the order they were given.
    pub params: Vec<(String, String)>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut out = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: path.display().to_string(),
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            out.set(k.trim(), v.trim())?;
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Some(name) = key.strip_prefix("params.") {
            self.params.push((name.to_string(), value.to_string()));
            return Ok(());
        }
        let key = key.replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: Settings) {
        self.values.extend(other.values);
        self.params.extend(other.params);
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse().map_err(|e: T::Err| ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.clone(),
                    reason: e.to_string(),
                })
            })
            .transpose()
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let source = match (self.get::<u64>("seed")?, self.values.get("scenario")) {
            (Some(_), Some(_)) => return Err(ConfigError::TwoScenarioSources),
            (Some(seed), None) => ScenarioSource::Seed(seed),
            (None, Some(path)) => ScenarioSource::File(path.into()),
            (None, None) => ScenarioSource::Seed(DEFAULT_SEED),
        };
        let sweep = match (
            self.get::<SweepAxis>("sweep-axis")?,
            self.values.get("sweep-values"),
        ) {
            (Some(axis), Some(list)) => Some((axis, parse_sweep_values(list)?)),
            (None, None) => None,
            _ => return Err(ConfigError::IncompleteSweep),
        };
        Ok(ExperimentConfig {
            source,
            param_overrides: self.params.clone(),
            scheme: self
                .get("scheme")?
                .unwrap_or(SchemeSel::One(Scheme::Proposed)),
            sweep,
            out: self.values.get("out").map(PathBuf::from),
            format: self.get("format")?.unwrap_or(Format::Json),
            jobs: self.get("jobs")?.unwrap_or(0),
            max_outer_iters: self.get("max-outer-iters")?,
            lambda_th: self.get("lambda-th")?,
            timing: self.get("timing")?.unwrap_or(false),
            grid_points: self.get("grid-points")?,
        })
    }
}

fn parse_sweep_values(list: &str) -> Result<Vec<f64>, ConfigError> {
    let values = list
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|e| ConfigError::BadValue {
                key: "sweep-values".into(),
                value: v.to_string(),
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    if values.is_empty() || !increasing || values.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return Err(ConfigError::SweepValues(values));
    }
    Ok(values)
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: ScenarioSource,
    pub param_overrides: Vec<(String, String)>,
    pub scheme: SchemeSel,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Worker threads; 0 picks the number of processors.
    pub jobs: usize,
    pub max_outer_iters: Option<usize>,
    pub lambda_th: Option<f64>,
    /// Keep wall-clock timings in reports (makes output non-reproducible).
    pub timing: bool,
    pub grid_points: Option<usize>,
}

impl ExperimentConfig {
    /// Builds or loads the scenario and applies the parameter overrides.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        match &self.source {
            ScenarioSource::Seed(seed) => {
                let mut params = SystemParams::default();
                apply_overrides(&mut params, &self.param_overrides)?;
                Ok(Scenario::generate(*seed, params)?)
            }
            ScenarioSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let mut scenario = Scenario::from_json(&text)?;
                if let Some((k, _)) = self
                    .param_overrides
                    .iter()
                    .find(|(k, _)| GEOMETRY_PARAMS.contains(&k.as_str()))
                {
                    return Err(ConfigError::FrozenParam(format!("params.{k}")));
                }
                apply_overrides(&mut scenario.params, &self.param_overrides)?;
                scenario.validate()?;
                Ok(scenario)
            }
        }
    }

    pub fn solver_config(&self, params: &SystemParams) -> SolverConfig {
        let mut cfg = SolverConfig::from_params(params);
        if let Some(n) = self.max_outer_iters {
            cfg.max_outer_iters = n;
        }
        if let Some(l) = self.lambda_th {
            cfg.lambda_th = l;
        }
        cfg
    }
}

/// Sets `params.<name>` values through the serialized form. `zeta` takes a
/// comma list or a single value broadcast to every user; a user-count
/// change resizes `zeta` first.
pub fn apply_overrides(
    params: &mut SystemParams,
    overrides: &[(String, String)],
) -> Result<(), ConfigError> {
    let bad = |k: &str, v: &str, reason: String| ConfigError::BadValue {
        key: format!("params.{k}"),
        value: v.to_string(),
        reason,
    };
    // sizes first so a later zeta override sees the final user count
    let mut ordered: Vec<&(String, String)> =
        overrides.iter().filter(|(k, _)| k == "num_users").collect();
    ordered.extend(overrides.iter().filter(|(k, _)| k != "num_users"));
    for (k, v) in ordered {
        match k.as_str() {
            "num_users" => {
                let n = v
                    .parse()
                    .map_err(|e: std::num::ParseIntError| bad(k, v, e.to_string()))?;
                params.resize_users(n);
            }
            "zeta" => {
                let z = v
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| bad(k, v, e.to_string()))?;
                params.zeta = if z.len() == 1 {
                    vec![z[0]; params.num_users]
                } else {
                    z
                };
            }
            _ => {
                let mut doc = serde_json::to_value(&*params).expect("params serialize");
                let slot = doc
                    .get_mut(k.as_str())
                    .ok_or_else(|| ConfigError::UnknownKey(format!("params.{k}")))?;
                *slot = if slot.is_u64() {
                    Value::from(v.parse::<u64>().map_err(|e| bad(k, v, e.to_string()))?)
                } else {
                    Value::from(v.parse::<f64>().map_err(|e| bad(k, v, e.to_string()))?)
                };
                *params = serde_json::from_value(doc).map_err(|e| bad(k, v, e.to_string()))?;
            }
        }
    }
    Ok(())
}
