//! Run configuration: one JSON document, defaults for every key, dotted
//! `--set` overrides applied before validation.

use std::path::{Path, PathBuf};

use fibxy::manybody::Quantity;
use fibxy::oracle::OracleGrid;
use fibxy::potential::{PotentialKind, PotentialSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "FIBXY_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "fibxy-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start: 10.0, stop: 300.0, count: 40, spacing: Spacing::Log }
    }
}

impl TimeGrid {
    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        TimeGrid { start, stop, count, spacing: Spacing::Linear }
    }

    pub fn expand(&self) -> Vec<f64> {
        let last = (self.count.max(2) - 1) as f64;
        let mut times: Vec<f64> = (0..self.count)
            .map(|i| {
                let s = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * s,
                    Spacing::Log => self.start * (self.stop / self.start).powf(s),
                }
            })
            .collect();
        if let Some(t) = times.last_mut() {
            *t = self.stop;
        }
        times
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::config(format!("{field}: {msg}")));
        if self.count < 2 {
            return bad("count must be >= 2");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start < 0.0 {
            return bad("start and stop must be finite, start >= 0");
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return bad("log spacing needs start > 0");
        }
        if self.expand().windows(2).any(|w| !(w[1] > w[0])) {
            return bad("times are not strictly increasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    /// Also fit Abel-averaged moments on a linear grid from 0 to ten times
    /// the end of the fit window.
    pub averaged: bool,
    pub averaged_step: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig { averaged: false, averaged_step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub quantities: Vec<Quantity>,
    pub thresholds: Vec<f64>,
    /// Threshold whose fits feed `report`.
    pub report_threshold: f64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        ConeConfig {
            quantities: vec![Quantity::Lower, Quantity::Fermi, Quantity::Spin],
            thresholds: vec![1.0, 1e-6],
            report_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TracemapConfig {
    pub energy: f64,
    pub eps: f64,
    pub m_max: usize,
    /// Real `z` of the phase-independence check.
    pub phase_z: f64,
    pub phase_count: usize,
    pub phase_m_max: usize,
}

impl Default for TracemapConfig {
    fn default() -> Self {
        TracemapConfig { energy: 0.0, eps: 1.0, m_max: 20, phase_z: 0.3, phase_count: 10, phase_m_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaPrimeConfig {
    pub k_min: usize,
    pub k_max: usize,
}

impl Default for AlphaPrimeConfig {
    fn default() -> Self {
        AlphaPrimeConfig { k_min: 8, k_max: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimerConfig {
    pub lambda: f64,
    pub n: usize,
    pub ensemble_size: usize,
    pub t_grid: TimeGrid,
}

impl Default for DimerConfig {
    fn default() -> Self {
        DimerConfig { lambda: 0.5, n: 800, ensemble_size: 16, t_grid: TimeGrid::linear(0.0, 150.0, 61) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub n: usize,
    pub t_grid: TimeGrid,
    pub p_grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub fit_window: (f64, f64),
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads; unset uses every core. Not part of the config hash.
    pub jobs: Option<usize>,
    pub transport: TransportConfig,
    pub cone: ConeConfig,
    pub tracemap: TracemapConfig,
    pub alphaprime: AlphaPrimeConfig,
    pub oracle: OracleGrid,
    pub dimer: DimerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: PotentialSpec::default(),
            n: 2000,
            t_grid: TimeGrid::default(),
            p_grid: vec![1.0, 2.0, 4.0],
            thresholds: vec![1e-4, 1e-6, 1e-8],
            fit_window: (10.0, 300.0),
            output_dir: None,
            seed: 0,
            jobs: None,
            transport: TransportConfig::default(),
            cone: ConeConfig::default(),
            tracemap: TracemapConfig::default(),
            alphaprime: AlphaPrimeConfig::default(),
            oracle: OracleGrid::default(),
            dimer: DimerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::config(format!("{field}: {msg}")));
        if !(self.potential.lambda.is_finite() && self.potential.lambda >= 0.0) {
            return bad("potential.lambda", format!("must be finite and >= 0, got {}", self.potential.lambda));
        }
        if let Err(e) = self.potential.validate() {
            return bad("potential", e.to_string());
        }
        if self.n < 2 {
            return bad("n", format!("must be >= 2, got {}", self.n));
        }
        self.t_grid.validate("t_grid")?;
        if self.p_grid.is_empty() || self.p_grid.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return bad("p_grid", "entries must be positive".into());
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad("thresholds", "entries must lie in (0, 1)".into());
        }
        let (a, b) = self.fit_window;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return bad("fit_window", format!("need 0 < start < stop, got [{a}, {b}]"));
        }
        if self.jobs == Some(0) {
            return bad("jobs", "must be >= 1".into());
        }
        if !(self.transport.averaged_step > 0.0) {
            return bad("transport.averaged_step", "must be > 0".into());
        }
        if self.cone.quantities.is_empty() {
            return bad("cone.quantities", "must not be empty".into());
        }
        if self.cone.thresholds.is_empty() || self.cone.thresholds.iter().any(|e| !(*e > 0.0)) {
            return bad("cone.thresholds", "entries must be positive".into());
        }
        if !(self.tracemap.eps > 0.0 && self.tracemap.eps <= 1.0) {
            return bad("tracemap.eps", "must lie in (0, 1]".into());
        }
        if self.tracemap.phase_count == 0 {
            return bad("tracemap.phase_count", "must be >= 1".into());
        }
        if self.alphaprime.k_max < self.alphaprime.k_min + 2 {
            return bad("alphaprime.k_max", "must be >= k_min + 2".into());
        }
        if !(self.dimer.lambda >= 0.0 && self.dimer.lambda < 1.0) {
            return bad("dimer.lambda", format!("must lie in [0, 1), got {}", self.dimer.lambda));
        }
        self.dimer.t_grid.validate("dimer.t_grid")?;
        self.oracle.validate().map_err(|e| CliError::config(format!("oracle: {e}")))
    }

    /// Output root: `output_dir`, else `$FIBXY_OUTPUT_ROOT`, else `fibxy-out`.
    pub fn output_root(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
    }

    /// The configuration with the keys that may not affect results cleared.
    pub fn hashed_view(&self) -> RunConfig {
        RunConfig { output_dir: None, jobs: None, ..self.clone() }
    }

    /// SHA-256 of the canonical JSON of [`RunConfig::hashed_view`].
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(&self.hashed_view()).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn is_fibonacci(&self) -> bool {
        self.potential.kind == PotentialKind::Fibonacci
    }
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("malformed override key '{path}'")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("override '{path}': '{key}' is inside a non-object")))?;
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::config(format!("override '{path}' targets a non-object")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Reads `path` (an empty file means all defaults), applies `key.path=value`
/// overrides (values parsed as JSON, else taken as strings), fills
/// defaults, rejects unknown keys and validates.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", p.display())))?;
            if text.trim().is_empty() {
                Value::Object(Default::default())
            } else {
                serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("malformed config {}: {e}", p.display())))?
            }
        }
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(CliError::config("config must be a JSON object"));
    }
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override '{item}' is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut doc, key.trim(), value)?;
    }
    let config: RunConfig =
        serde_json::from_value(doc).map_err(|e| CliError::config(format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}
