//! Run configuration: one TOML document with flat sections, plus
//! `section.key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_core::analysis::{AnalysisSettings, SweepSettings};
use vfd_core::{DriveConfig, Load, PlantConfig, PwmScheme, RlLoad};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Simulated time, s.
    pub duration: f64,
    pub sample_hz: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            duration: 0.1,
            sample_hz: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Highest harmonic order; 0 means min(100, Nyquist).
    pub harmonics: usize,
    pub cycles: u32,
    pub max_drift: f64,
    pub m_list: Vec<f64>,
    pub schemes: Vec<PwmScheme>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let a = AnalysisSettings::default();
        Self {
            harmonics: a.harmonics,
            cycles: a.cycles,
            max_drift: a.max_drift,
            m_list: vec![0.4],
            schemes: PwmScheme::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub trace: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub drive: DriveConfig,
    pub load: Load,
    pub plant: PlantConfig,
    pub run: RunSettings,
    pub analysis: AnalysisConfig,
    pub sweep: SweepSettings,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            drive: DriveConfig::default(),
            load: Load::Rl(RlLoad::default()),
            plant: PlantConfig::default(),
            run: RunSettings::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepSettings::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses `text` and applies `overrides` (`section.key=value`, later
    /// entries win).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        for ov in overrides {
            apply_override(&mut doc, ov)?;
        }
        // A `[load]` section without `kind` refines the default RL load.
        if let Some(toml::Value::Table(load)) = doc.get_mut("load") {
            load.entry("kind").or_insert_with(|| "rl".into());
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        self.load.validate()?;
        if self.analysis.schemes.is_empty() || self.analysis.m_list.is_empty() {
            return Err(CliError::Config(
                "analysis.schemes and analysis.m_list must be non-empty".into(),
            ));
        }
        Ok(())
    }

    pub fn analysis_settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            duration: self.run.duration,
            sample_hz: self.run.sample_hz,
            harmonics: self.analysis.harmonics,
            cycles: self.analysis.cycles,
            max_drift: self.analysis.max_drift,
        }
    }

    /// Serialized form of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }
}

fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{path}`")));
    }
    let raw = raw.trim();
    // Values are TOML literals; bare words fall back to strings.
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut table = doc;
    for key in parents {
        table = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{key}` in `{path}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
