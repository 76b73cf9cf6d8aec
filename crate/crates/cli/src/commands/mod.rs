pub mod analyze;
pub mod annotate;
pub mod evaluate;
pub mod generate;
pub mod tokenize;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};

use vmusprod::midi::{parse_midi, Score};

/// Reads and parses one MIDI file.
pub fn load_midi(path: &Path) -> Result<Score> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_midi(&bytes).with_context(|| format!("parsing {}", path.display()))
}
