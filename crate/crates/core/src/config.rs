//! Run configuration and its canonical hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::interferometer::BenchConfig;
use crate::physics::{CavityModel, EmitterConfig};
use crate::source::PulseTrain;

/// Histogramming and correction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// [ps]
    #[serde(default = "default_bin_width")]
    pub bin_width: u64,
    /// Histogram half-range in pulse periods.
    #[serde(default = "default_range_periods")]
    pub range_periods: u32,
    /// Multi-photon correction factor B ∈ [1, 2].
    #[serde(default = "default_b")]
    pub b_factor: f64,
}

fn default_bin_width() -> u64 {
    4
}
fn default_range_periods() -> u32 {
    4
}
fn default_b() -> f64 {
    1.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bin_width: default_bin_width(),
            range_periods: default_range_periods(),
            b_factor: default_b(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bin_width == 0 {
            return Err(Error::config("analysis.bin_width", "must be >= 1"));
        }
        if self.range_periods < 3 {
            return Err(Error::config("analysis.range_periods", "must be >= 3"));
        }
        if !(1.0..=2.0).contains(&self.b_factor) {
            return Err(Error::config("analysis.b_factor", "must lie in [1, 2]"));
        }
        Ok(())
    }

    /// Histogram half-range for `train` [ps].
    pub fn range_ps(&self, train: &PulseTrain) -> u64 {
        (self.range_periods as f64 * train.period_ps()).ceil() as u64
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub emitter: EmitterConfig,
    #[serde(default)]
    pub cavity: CavityModel,
    pub train: PulseTrain,
    #[serde(default)]
    pub bench: BenchConfig,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

/// Dotted key (or table) on the line where a TOML error span starts.
fn field_at(text: &str, offset: usize) -> String {
    let start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("").trim();
    let unbracket = |l: &str| l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
    if line.starts_with('[') {
        return unbracket(line);
    }
    let key = line.split('=').next().unwrap_or(line).trim();
    let section = text[..start]
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['));
    match section {
        Some(h) => format!("{}.{key}", unbracket(h)),
        None => key.to_string(),
    }
}

impl RunConfig {
    pub fn new(emitter: EmitterConfig, train: PulseTrain, seed: u64) -> Self {
        RunConfig {
            emitter,
            cavity: CavityModel::default(),
            train,
            bench: BenchConfig::default(),
            detector: DetectorModel::default(),
            analysis: AnalysisConfig::default(),
            seed,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .filter(|s| s.start <= text.len())
                .map(|s| field_at(text, s.start))
                .filter(|f| !f.is_empty())
                .unwrap_or_else(|| "document".into());
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.emitter.validate()?;
        self.cavity.validate()?;
        self.train.validate()?;
        self.bench.validate()?;
        self.detector.validate()?;
        self.analysis.validate()
    }

    /// Sorted-key compact JSON; the output directory is excluded so that relocating a run
    /// does not change its identity.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
        }
        // serde_json's default map is ordered by key
        serde_json::to_string(&v).expect("value serialises")
    }

    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.canonical_json().as_bytes()).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }
}
