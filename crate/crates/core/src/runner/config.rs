//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::rx::classical::ClassicalRxConfig;
use crate::rx::quantum::QuantumRxConfig;
use crate::tx::TxPlan;

/// Bundled presets, addressable by name instead of a path.
pub const PRESETS: &[(&str, &str)] = &[("metro_15km", include_str!("../../presets/metro_15km.toml"))];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSchedule {
    /// Data blocks between successive calibration groups.
    pub data_blocks_per_group: usize,
    /// Calibration captures are this many times longer than data blocks.
    pub length_factor: usize,
}

impl Default for CalibrationSchedule {
    fn default() -> Self {
        CalibrationSchedule {
            data_blocks_per_group: 5,
            length_factor: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecurityConfig {
    pub beta: f64,
}

impl Default for SecurityConfig {
    fn default() -> Self {
        SecurityConfig { beta: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write the first data block's captures as raw IQ.
    pub dump_iq: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            dump_iq: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Number of data blocks.
    #[serde(default = "default_blocks")]
    pub block_count: usize,
    /// Nominal data block length; rounded down to whole quantum symbols.
    #[serde(default = "default_samples")]
    pub samples_per_block: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Correlation time of the spacing jitter, in data-block durations.
    #[serde(default = "default_jitter_blocks")]
    pub jitter_correlation_blocks: f64,
    #[serde(default)]
    pub tx: TxPlan,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub classical_rx: ClassicalRxConfig,
    #[serde(default)]
    pub quantum_rx: QuantumRxConfig,
    #[serde(default)]
    pub calibration: CalibrationSchedule,
    #[serde(default)]
    pub security: SecurityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    1
}
fn default_blocks() -> usize {
    20
}
fn default_samples() -> usize {
    1_000_000
}
fn default_workers() -> usize {
    1
}
fn default_jitter_blocks() -> f64 {
    1.0
}

fn config_err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err("<document>", e.message()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: ExperimentConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            let key = quoted_after(&msg, "unknown field")
                .or_else(|| quoted_after(&msg, "missing field"))
                .unwrap_or_else(|| "<document>".into());
            config_err(&key, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    pub fn quantum_symbols_per_block(&self) -> Result<usize> {
        Ok(self.samples_per_block / self.tx.quantum_sps()?)
    }

    pub fn block_duration_s(&self) -> Result<f64> {
        Ok(self.quantum_symbols_per_block()? as f64 / self.tx.quantum.channel.baud_hz)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |key: &str, r: Result<()>| r.map_err(|e| config_err(key, e.to_string()));
        if self.name.trim().is_empty() {
            return Err(config_err("name", "must not be empty"));
        }
        wrap("tx", self.tx.validate())?;
        wrap("channel", self.channel.validate())?;
        wrap("classical_rx.cma", self.classical_rx.cma.validate())?;
        if self.block_count == 0 {
            return Err(config_err("block_count", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_err("workers", "must be at least 1"));
        }
        let n_q = wrap("tx", self.quantum_symbols_per_block().map(|_| ()));
        n_q?;
        if self.quantum_symbols_per_block()? < 400 {
            return Err(config_err("samples_per_block", "too short for parameter estimation"));
        }
        if self.classical_rx.cma.input_sps != self.tx.classical_sps()? {
            return Err(config_err(
                "classical_rx.cma.input_sps",
                "must equal the classical samples per symbol",
            ));
        }
        let f = self.quantum_rx.revealed_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(config_err("quantum_rx.revealed_fraction", "must lie in (0, 1]"));
        }
        if !(self.security.beta > 0.0 && self.security.beta <= 1.0) {
            return Err(config_err("security.beta", "must lie in (0, 1]"));
        }
        if self.calibration.data_blocks_per_group == 0 || self.calibration.length_factor == 0 {
            return Err(config_err(
                "calibration",
                "group size and length factor must be positive",
            ));
        }
        if !(self.jitter_correlation_blocks > 0.0) {
            return Err(config_err("jitter_correlation_blocks", "must be positive"));
        }
        Ok(())
    }
}

fn quoted_after(msg: &str, marker: &str) -> Option<String> {
    let rest = &msg[msg.find(marker)? + marker.len()..];
    let start = rest.find('`')? + 1;
    let end = rest[start..].find('`')? + start;
    Some(rest[start..end].to_string())
}

/// Reads a config file, or a bundled preset when `path` names one.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let name = path.to_string_lossy();
    if let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) {
        return ExperimentConfig::from_toml_str(text);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml_str(&text)
}

/// Sets `dotted.key` in a TOML table, parsing `value` as a TOML value
/// (falling back to a string).
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| config_err(key, "empty key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

pub fn config_table(cfg: &ExperimentConfig) -> Result<toml::Table> {
    toml::Table::try_from(cfg).map_err(|e| config_err("<document>", e.to_string()))
}
