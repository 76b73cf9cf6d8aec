//! `tokenize`: encode a corpus into per-stage token caches plus an index.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;

use vmusprod::pipeline::TokenizedPiece;
use vmusprod::tokenize::{save_tokens, Sidecar, Stage, StageVocab};

use crate::config::RunConfig;
use crate::manifest::{DatasetManifest, ManifestEntry, TokenizedEntry, TokenizedManifest};
use crate::util::write_json;
use crate::{data_err, CliResult};

fn tokenize_entry(entry: &ManifestEntry, out_dir: &Path) -> Result<TokenizedEntry> {
    let score = super::load_midi(&entry.midi_path)?;
    let piece = TokenizedPiece::from_score(&entry.id, &score, None)?;

    let chord_vocab = StageVocab::for_stage(Stage::Chord);
    let note_vocab = StageVocab::for_stage(Stage::Melody);
    let accomp_vocab = StageVocab::for_stage(Stage::Accomp);

    let chord_tokens = out_dir.join(format!("{}.chord.vmtk", entry.id));
    let melody_tokens = out_dir.join(format!("{}.melody.vmtk", entry.id));
    let accomp_tokens = out_dir.join(format!("{}.accomp.vmtk", entry.id));
    let merged_tokens = out_dir.join(format!("{}.merged.vmtk", entry.id));
    save_tokens(&chord_tokens, &chord_vocab, &piece.chord_tokens)?;
    save_tokens(&melody_tokens, &note_vocab, &piece.melody_tokens)?;
    save_tokens(&accomp_tokens, &accomp_vocab, &piece.accomp_tokens)?;
    save_tokens(&merged_tokens, &accomp_vocab, &piece.merged_tokens)?;

    Ok(TokenizedEntry {
        id: entry.id.clone(),
        split: entry.split,
        tempo_bpm: piece.tempo_bpm,
        n_bars: piece.n_bars,
        midi_path: entry.midi_path.clone(),
        chord_tokens,
        melody_tokens,
        accomp_tokens,
        merged_tokens,
        semantic_path: entry.semantic_path.clone(),
        frames_path: entry.frames_path.clone(),
        genre: entry.genre.clone(),
    })
}

pub fn run(manifest_path: &Path, out_dir: &Path, _config: &RunConfig) -> CliResult {
    let manifest = DatasetManifest::load(manifest_path).map_err(data_err)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(anyhow::Error::from(e)))?;

    for stage in [Stage::Chord, Stage::Melody, Stage::Accomp] {
        let sidecar = Sidecar::for_vocab(&StageVocab::for_stage(stage));
        write_json(&out_dir.join(format!("{}.vocab.json", stage.name())), &sidecar)
            .map_err(data_err)?;
    }

    let results: Vec<(String, Result<TokenizedEntry>)> = manifest
        .entries
        .par_iter()
        .map(|entry| (entry.id.clone(), tokenize_entry(entry, out_dir)))
        .collect();

    let mut pieces = Vec::new();
    for (id, result) in results {
        match result {
            Ok(entry) => pieces.push(entry),
            Err(err) => log::warn!("{id}: {err:#}"),
        }
    }
    println!("tokenized {}/{} pieces into {}", pieces.len(), manifest.entries.len(), out_dir.display());
    if pieces.is_empty() {
        return Err(data_err(anyhow::anyhow!("every entry failed to tokenize")));
    }
    write_json(&out_dir.join("tokenized.json"), &TokenizedManifest { pieces }).map_err(data_err)?;
    Ok(())
}
