//! Dataset manifest: the JSON index of a corpus.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub midi_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Loads and validates a manifest: ids unique, referenced inputs present.
    /// Relative paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in &mut manifest.entries {
            entry.midi_path = resolve(base, &entry.midi_path);
            entry.annotation_path = entry.annotation_path.take().map(|p| resolve(base, &p));
            entry.semantic_path = entry.semantic_path.take().map(|p| resolve(base, &p));
            entry.frames_path = entry.frames_path.take().map(|p| resolve(base, &p));
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            bail!("manifest has no entries");
        }
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            if !seen.insert(&entry.id) {
                bail!("duplicate manifest id `{}`", entry.id);
            }
            if !entry.midi_path.exists() {
                bail!("{}: missing MIDI file {}", entry.id, entry.midi_path.display());
            }
            for path in [&entry.semantic_path, &entry.frames_path].into_iter().flatten() {
                if !path.exists() {
                    bail!("{}: missing file {}", entry.id, path.display());
                }
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// The index written by `tokenize` and consumed by `train`/`evaluate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizedManifest {
    pub pieces: Vec<TokenizedEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizedEntry {
    pub id: String,
    pub split: Split,
    pub tempo_bpm: f64,
    pub n_bars: u32,
    pub midi_path: PathBuf,
    pub chord_tokens: PathBuf,
    pub melody_tokens: PathBuf,
    pub accomp_tokens: PathBuf,
    pub merged_tokens: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
}

impl TokenizedManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading tokenized manifest {}", path.display()))?;
        let mut manifest: TokenizedManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing tokenized manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for entry in &mut manifest.pieces {
            entry.midi_path = resolve(base, &entry.midi_path);
            entry.chord_tokens = resolve(base, &entry.chord_tokens);
            entry.melody_tokens = resolve(base, &entry.melody_tokens);
            entry.accomp_tokens = resolve(base, &entry.accomp_tokens);
            entry.merged_tokens = resolve(base, &entry.merged_tokens);
            entry.semantic_path = entry.semantic_path.take().map(|p| resolve(base, &p));
            entry.frames_path = entry.frames_path.take().map(|p| resolve(base, &p));
        }
        if manifest.pieces.is_empty() {
            bail!("tokenized manifest has no pieces");
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let midi = dir.path().join("a.mid");
        std::fs::write(&midi, vmusprod::midi::write_midi(&vmusprod::toy::random_score(0, 4)))
            .unwrap();
        let manifest = dir.path().join("manifest.json");
        std::fs::write(
            &manifest,
            serde_json::json!({"entries": [
                {"id": "a", "midi_path": "a.mid", "split": "train"},
                {"id": "a", "midi_path": "a.mid", "split": "test"},
            ]})
            .to_string(),
        )
        .unwrap();
        let err = DatasetManifest::load(&manifest).unwrap_err();
        assert!(format!("{err:#}").contains("duplicate"));
    }

    #[test]
    fn missing_files_fail_fast() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("manifest.json");
        std::fs::write(
            &manifest,
            serde_json::json!({"entries": [
                {"id": "a", "midi_path": "nope.mid", "split": "train"},
            ]})
            .to_string(),
        )
        .unwrap();
        assert!(DatasetManifest::load(&manifest).is_err());
    }
}
