//! Provenance records: every artifact carries the config hash, seeds, and
//! checkpoint hashes that produced it, so reruns are verifiable.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::util::write_json;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub checkpoint_hashes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_hash: Option<String>,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        Provenance {
            command: command.to_string(),
            config_hash: config.hash(),
            seed,
            checkpoint_hashes: BTreeMap::new(),
            output_hash: None,
            details: serde_json::Value::Null,
        }
    }

    pub fn add_checkpoint(&mut self, name: &str, path: &Path) -> Result<()> {
        let hash = vmusprod::nn::checkpoint::file_hash(path)?;
        self.checkpoint_hashes.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn set_output(&mut self, path: &Path) -> Result<()> {
        self.output_hash = Some(vmusprod::nn::checkpoint::file_hash(path)?);
        Ok(())
    }

    /// Writes `<artifact>.provenance.json` next to the artifact.
    pub fn write_beside(&self, artifact: &Path) -> Result<()> {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".provenance.json");
        write_json(&artifact.with_file_name(name), self)
    }
}
