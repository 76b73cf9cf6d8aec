//! `analyze`: corpus statistics on key-normalized scores — chord frequency
//! per genre, the directional chord transition matrix, and BPM histograms.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use vmusprod::annotate::{
    detect_tonality, extract_chords, transpose_to_reference, Chord, ChordSymbol,
};
use vmusprod::midi::{quantize, DEFAULT_GRID};

use crate::config::RunConfig;
use crate::manifest::{DatasetManifest, ManifestEntry};
use crate::util::atomic_write;
use crate::{data_err, internal_err, CliResult};

struct PieceStats {
    genre: String,
    tempo_bpm: f64,
    chords: Vec<ChordSymbol>,
}

fn piece_stats(entry: &ManifestEntry) -> Result<PieceStats> {
    let score = super::load_midi(&entry.midi_path)?;
    let quantized = quantize(&score, DEFAULT_GRID);
    // Normalize the key first, so a D-major piece counts its I chord as CM.
    let tonality = detect_tonality(&quantized)?;
    let normalized = transpose_to_reference(&quantized, tonality);
    Ok(PieceStats {
        genre: entry.genre.clone().unwrap_or_else(|| "unknown".to_string()),
        tempo_bpm: quantized.tempo_bpm,
        chords: extract_chords(&normalized),
    })
}

/// Directional transition counts over consecutive sounding beats; the
/// diagonal (self transitions) is collected separately.
pub fn transition_counts(
    chords: &[ChordSymbol],
) -> (BTreeMap<(String, String), usize>, BTreeMap<String, usize>) {
    let mut matrix = BTreeMap::new();
    let mut diagonal = BTreeMap::new();
    let sounding: Vec<&Chord> = chords
        .iter()
        .filter_map(|c| match &c.chord {
            Chord::Rest => None,
            chord => Some(chord),
        })
        .collect();
    for pair in sounding.windows(2) {
        if pair[0] == pair[1] {
            *diagonal.entry(pair[0].name()).or_insert(0) += 1;
        } else {
            *matrix.entry((pair[0].name(), pair[1].name())).or_insert(0) += 1;
        }
    }
    (matrix, diagonal)
}

pub fn run(manifest_path: &Path, out_dir: &Path, _config: &RunConfig) -> CliResult {
    let manifest = DatasetManifest::load(manifest_path).map_err(data_err)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(anyhow::Error::from(e)))?;

    let results: Vec<(String, Result<PieceStats>)> = manifest
        .entries
        .par_iter()
        .map(|entry| (entry.id.clone(), piece_stats(entry)))
        .collect();

    let mut stats = Vec::new();
    for (id, result) in results {
        match result {
            Ok(s) => stats.push(s),
            Err(err) => log::warn!("{id}: {err:#}"),
        }
    }
    if stats.is_empty() {
        return Err(data_err(anyhow::anyhow!("every entry failed to analyze")));
    }

    // Per-genre chord frequency over sounding beats.
    let mut frequency: BTreeMap<(String, String), usize> = BTreeMap::new();
    // Directional transitions, diagonal reported separately.
    let mut transitions: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut diagonal: BTreeMap<String, usize> = BTreeMap::new();
    // Integer-BPM histogram per genre.
    let mut bpm: BTreeMap<(String, u32), usize> = BTreeMap::new();

    for piece in &stats {
        for symbol in &piece.chords {
            if !matches!(symbol.chord, Chord::Rest) {
                *frequency.entry((piece.genre.clone(), symbol.chord.name())).or_insert(0) += 1;
            }
        }
        let (matrix, diag) = transition_counts(&piece.chords);
        for (key, count) in matrix {
            *transitions.entry(key).or_insert(0) += count;
        }
        for (key, count) in diag {
            *diagonal.entry(key).or_insert(0) += count;
        }
        *bpm.entry((piece.genre.clone(), piece.tempo_bpm.round() as u32)).or_insert(0) += 1;
    }

    let freq_csv = std::iter::once("genre,chord,count".to_string())
        .chain(frequency.iter().map(|((g, c), n)| format!("{g},{c},{n}")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    atomic_write(&out_dir.join("chord_frequency.csv"), freq_csv.as_bytes())
        .map_err(internal_err)?;

    let trans_csv = std::iter::once("from,to,count".to_string())
        .chain(transitions.iter().map(|((a, b), n)| format!("{a},{b},{n}")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    atomic_write(&out_dir.join("chord_transitions.csv"), trans_csv.as_bytes())
        .map_err(internal_err)?;

    let diag_csv = std::iter::once("chord,count".to_string())
        .chain(diagonal.iter().map(|(c, n)| format!("{c},{n}")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    atomic_write(&out_dir.join("chord_transitions_diagonal.csv"), diag_csv.as_bytes())
        .map_err(internal_err)?;

    let bpm_csv = std::iter::once("genre,bpm,count".to_string())
        .chain(bpm.iter().map(|((g, b), n)| format!("{g},{b},{n}")))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    atomic_write(&out_dir.join("bpm_histogram.csv"), bpm_csv.as_bytes()).map_err(internal_err)?;

    println!(
        "analyzed {} pieces: {} chord types, {} transitions -> {}",
        stats.len(),
        frequency.keys().map(|(_, c)| c).collect::<std::collections::BTreeSet<_>>().len(),
        transitions.values().sum::<usize>(),
        out_dir.display()
    );
    Ok(())
}
