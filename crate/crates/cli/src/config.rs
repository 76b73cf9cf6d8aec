//! Run configuration: one TOML file, selectable via `--config` or the
//! `VMUSPROD_CONFIG` environment variable; command-line flags override file
//! values. Unknown keys are rejected by name.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use vmusprod::pipeline::{StageConfig, StageRole};

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub train: TrainSection,
    pub sampling: SamplingSection,
    pub motion: MotionSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `desk`, `full`, or `tiny`.
    pub profile: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { profile: "desk".to_string() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Fraction of pieces held out for validation.
    pub val_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { epochs: 100, lr: 1e-3, batch_size: 8, seed: 0, val_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { temperature: 1.0, top_p: 0.9 }
    }
}

/// Corpus motion statistics; per-video extremes are used when absent.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MotionSection {
    pub m_min: Option<f64>,
    pub m_max: Option<f64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os("VMUSPROD_CONFIG").map(Into::into),
        };
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn stage_config(&self, role: StageRole) -> Result<StageConfig> {
        match self.model.profile.as_str() {
            "desk" => Ok(StageConfig::desk(role)),
            "full" => Ok(StageConfig::full(role)),
            "tiny" => Ok(StageConfig::tiny(role)),
            other => anyhow::bail!("unknown model profile `{other}` (desk, full, or tiny)"),
        }
    }

    pub fn tempo_map(&self) -> vmusprod::video::TempoMap {
        vmusprod::video::TempoMap {
            m_min: self.motion.m_min,
            m_max: self.motion.m_max,
            ..Default::default()
        }
    }

    /// SHA-256 over the canonical JSON form, recorded in provenance.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
