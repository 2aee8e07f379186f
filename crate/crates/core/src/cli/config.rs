//! Flat run configuration with dotted keys such as `potential.k = 30`.
//! Unknown keys are rejected; command-line flags override file values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dynamics::RelaxSettings;
use crate::potential::PotentialConfig;
use crate::scanner::{default_bond_types, DEFAULT_FRAMES, DEFAULT_JUMP_THRESHOLD};
use crate::trainer::{DatasetConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSettings {
    pub frames: usize,
    /// Element pairs such as `C-C`; empty selects the default table.
    pub bond_types: Vec<String>,
    pub reject_single_atom: bool,
    /// eV; negative disables the reference energy-jump filter.
    pub jump_threshold: f64,
    /// 0 keeps every scan.
    pub max_per_type: usize,
    pub seed: u64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        Self {
            frames: DEFAULT_FRAMES,
            bond_types: default_bond_types().iter().map(ToString::to_string).collect(),
            reject_single_atom: false,
            jump_threshold: DEFAULT_JUMP_THRESHOLD,
            max_per_type: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MdSettings {
    /// fs
    pub dt: f64,
    pub steps: usize,
    /// Initial (NVE) or bath (Langevin) temperature, K.
    pub temperature: f64,
    /// 1/fs
    pub friction: f64,
    pub seed: u64,
    /// Langevin trajectories per run.
    pub seeds: usize,
    /// Langevin equilibration before the recorded steps, fs.
    pub equilibration: f64,
    /// fs
    pub jump_window: f64,
    /// Relax the input structure before NVE.
    pub relax: bool,
    pub relax_tolerance: f64,
    pub relax_max_steps: usize,
    /// meV/atom; `md nve` reports whether the drift stays below it.
    pub drift_budget: f64,
}

impl Default for MdSettings {
    fn default() -> Self {
        let r = RelaxSettings::default();
        Self {
            dt: 1.0,
            steps: 1000,
            temperature: 300.0,
            friction: 1e-3,
            seed: 0,
            seeds: 1,
            equilibration: 500.0,
            jump_window: 10.0,
            relax: true,
            relax_tolerance: r.tolerance,
            relax_max_steps: r.max_steps,
            drift_budget: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub train: TrainConfig,
    pub dataset: DatasetConfig,
    pub scan: ScanSettings,
    pub md: MdSettings,
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn override_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Usage(format!("empty key '{key}'")))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| CliError::Usage(format!("'{p}' in '{key}' is not a section")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses configuration text and applies `key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Failed(format!("configuration: {e}")))?;
        for (k, v) in overrides {
            set_dotted(&mut table, k, override_value(v))?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Failed(format!("configuration: {}", e.message())))?;
        cfg.potential.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Failed(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    /// Every key with its value, one `key = value` line each.
    pub fn to_flat(&self) -> String {
        let v = toml::Value::try_from(self).expect("configuration serializes");
        let mut out = String::new();
        flatten("", &v, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut String) {
    match v {
        toml::Value::Table(t) => {
            for (k, x) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        other => out.push_str(&format!("{prefix} = {other}\n")),
    }
}
