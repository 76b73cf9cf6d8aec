//! `annotate`: quantize, split, and label every piece of a corpus.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use vmusprod::annotate::{detect_tonality, extract_chords, skyline_split, Annotation, ChordRecord};
use vmusprod::midi::{quantize, write_midi, DEFAULT_GRID};

use crate::config::RunConfig;
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::util::{atomic_write, write_json};
use crate::{data_err, CliResult};

/// Builds the annotation artifacts for one entry.
pub fn annotate_entry(entry: &ManifestEntry, out_dir: &Path) -> Result<()> {
    let score = super::load_midi(&entry.midi_path)?;
    let quantized = quantize(&score, DEFAULT_GRID);
    let split = skyline_split(&quantized);
    let chords = extract_chords(&quantized);
    let tonality = detect_tonality(&quantized)?;

    let melody_name = format!("{}.melody.mid", entry.id);
    let accomp_name = format!("{}.accomp.mid", entry.id);
    atomic_write(&out_dir.join(&melody_name), &write_midi(&split.melody))?;
    atomic_write(&out_dir.join(&accomp_name), &write_midi(&split.accompaniment))?;

    let annotation = Annotation {
        tonality,
        tempo_bpm: quantized.tempo_bpm,
        chords: chords.iter().map(ChordRecord::from).collect(),
        melody_midi_path: melody_name,
        accomp_midi_path: accomp_name,
    };
    let annotation_path = entry
        .annotation_path
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{}.json", entry.id)));
    write_json(&annotation_path, &annotation)?;
    Ok(())
}

pub fn run(manifest_path: &Path, out_dir: &Path, _config: &RunConfig) -> CliResult {
    let manifest = DatasetManifest::load(manifest_path).map_err(data_err)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(anyhow::Error::from(e)))?;

    let results: Vec<(String, Result<()>)> = manifest
        .entries
        .par_iter()
        .map(|entry| (entry.id.clone(), annotate_entry(entry, out_dir)))
        .collect();

    let mut ok = 0usize;
    for (id, result) in &results {
        match result {
            Ok(()) => ok += 1,
            Err(err) => log::warn!("{id}: {err:#}"),
        }
    }
    println!("annotated {ok}/{} pieces into {}", results.len(), out_dir.display());
    if ok == 0 {
        return Err(data_err(anyhow::anyhow!("every entry failed to annotate")));
    }
    Ok(())
}
