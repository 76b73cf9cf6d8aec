//! `train`: fit one generation stage or the retrieval encoders.

use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;

use vmusprod::metrics::{music_beat_features, train_vmcp, VmcpConfig, VmcpTrainConfig};
use vmusprod::midi::{quantize, DEFAULT_GRID};
use vmusprod::pipeline::{train_stage, StageDataset, StageRole, TokenizedPiece, TrainConfig};
use vmusprod::tokenize::{
    decode_chord_tokens, decode_tokens, load_tokens, pad_chords, Stage, StageVocab,
};
use vmusprod::video::{ingest_semantic, load_frames, motion_tempo, FeatureBundle, TempoMap};

use crate::config::RunConfig;
use crate::manifest::{Split, TokenizedEntry, TokenizedManifest};
use crate::provenance::Provenance;
use crate::util::write_json;
use crate::{data_err, internal_err, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    Chord,
    Melody,
    Accomp,
    Vmcp,
    Video2music,
    Video2chord2music,
}

impl StageArg {
    fn role(&self) -> Option<StageRole> {
        match self {
            StageArg::Chord => Some(StageRole::Chord),
            StageArg::Melody => Some(StageRole::Melody),
            StageArg::Accomp => Some(StageRole::Accomp),
            StageArg::Video2music => Some(StageRole::MusicFromVideo),
            StageArg::Video2chord2music => Some(StageRole::MusicFromChords),
            StageArg::Vmcp => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            StageArg::Chord => "chord",
            StageArg::Melody => "melody",
            StageArg::Accomp => "accomp",
            StageArg::Vmcp => "vmcp",
            StageArg::Video2music => "music_from_video",
            StageArg::Video2chord2music => "music_from_chords",
        }
    }
}

#[derive(Debug, Default)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub unconditional: bool,
}

/// Assembles a controller feature bundle from the entry's feature files.
pub fn build_bundle(
    semantic_path: Option<&Path>,
    frames_path: Option<&Path>,
    tempo_map: &TempoMap,
) -> Result<Option<FeatureBundle>> {
    if semantic_path.is_none() && frames_path.is_none() {
        return Ok(None);
    }
    let semantic = match semantic_path {
        Some(path) => {
            let mut rows = ingest_semantic(path)?;
            rows.truncate(vmusprod::video::MAX_SEMANTIC_TOKENS);
            rows
        }
        None => Vec::new(),
    };

    let (color, motion_mean, tempo_bpm, duration_sec) = match frames_path {
        Some(path) => {
            let frames = load_frames(path)?;
            let (motion, tempo) = motion_tempo(&frames, tempo_map)?;
            // One histogram per second of video, like the semantic rate.
            let step = (frames.fps.round() as usize).max(1);
            let color: Vec<Vec<f32>> = frames
                .frames
                .iter()
                .step_by(step)
                .take(vmusprod::video::MAX_SEMANTIC_TOKENS)
                .enumerate()
                .map(|(i, _)| vmusprod::video::color_histogram(&frames.frame(i * step), 32))
                .collect();
            (color, motion, tempo, frames.duration_sec())
        }
        None => (Vec::new(), 0.0, (tempo_map.lo + tempo_map.hi) / 2.0, semantic.len() as f64),
    };

    Ok(Some(FeatureBundle { semantic, color, motion_mean, tempo_bpm, duration_sec }))
}

/// Rebuilds a training piece from its token caches.
fn load_piece(
    entry: &TokenizedEntry,
    tempo_map: &TempoMap,
    with_bundle: bool,
) -> Result<TokenizedPiece> {
    let chord_vocab = StageVocab::for_stage(Stage::Chord);
    let note_vocab = StageVocab::for_stage(Stage::Melody);
    let accomp_vocab = StageVocab::for_stage(Stage::Accomp);

    let chord_tokens = load_tokens(&entry.chord_tokens, &chord_vocab)
        .with_context(|| format!("{}: chord cache", entry.id))?;
    let melody_tokens = load_tokens(&entry.melody_tokens, &note_vocab)
        .with_context(|| format!("{}: melody cache", entry.id))?;
    let accomp_tokens = load_tokens(&entry.accomp_tokens, &accomp_vocab)
        .with_context(|| format!("{}: accomp cache", entry.id))?;
    let merged_tokens = load_tokens(&entry.merged_tokens, &accomp_vocab)
        .with_context(|| format!("{}: merged cache", entry.id))?;

    let chords = pad_chords(&decode_chord_tokens(&chord_tokens)?, entry.n_bars);
    let melody_score = decode_tokens(&melody_tokens, entry.tempo_bpm)?;
    let bundle = if with_bundle {
        build_bundle(entry.semantic_path.as_deref(), entry.frames_path.as_deref(), tempo_map)?
    } else {
        None
    };

    Ok(TokenizedPiece {
        id: entry.id.clone(),
        tempo_bpm: entry.tempo_bpm,
        n_bars: entry.n_bars,
        chords,
        chord_tokens,
        melody_tokens,
        accomp_tokens,
        merged_tokens,
        melody_score,
        bundle,
    })
}

pub fn run(
    stage: StageArg,
    tokenized: &Path,
    out_dir: &Path,
    config: &RunConfig,
    overrides: &Overrides,
) -> CliResult {
    let manifest = TokenizedManifest::load(tokenized).map_err(data_err)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(anyhow::Error::from(e)))?;
    let seed = overrides.seed.unwrap_or(config.train.seed);
    let checkpoint_path = out_dir.join(format!("{}.ckpt", stage.name()));

    match stage.role() {
        Some(role) => {
            // Variants with controller input want feature bundles.
            let with_bundles =
                matches!(role, StageRole::Chord | StageRole::MusicFromVideo)
                    && !overrides.unconditional;
            let tempo_map = config.tempo_map();
            let mut train_pieces = Vec::new();
            let mut val_pieces = Vec::new();
            for entry in &manifest.pieces {
                let piece =
                    load_piece(entry, &tempo_map, with_bundles).map_err(data_err)?;
                match entry.split {
                    Split::Val => val_pieces.push(piece),
                    Split::Test => {}
                    Split::Train => train_pieces.push(piece),
                }
            }
            let dataset = StageDataset::new(train_pieces, val_pieces);

            let mut stage_config = config.stage_config(role).map_err(data_err)?;
            if overrides.unconditional {
                stage_config = stage_config.unconditional();
            }
            let train_config = TrainConfig {
                epochs: overrides.epochs.unwrap_or(config.train.epochs),
                lr: overrides.lr.unwrap_or(config.train.lr),
                batch_size: config.train.batch_size,
                seed,
                target_accuracy: None,
                checkpoint_dir: Some(out_dir.join(format!("{}_epochs", stage.name()))),
            };
            let (model, report) =
                train_stage(stage_config, &dataset, &train_config).map_err(internal_err)?;
            model.save(&checkpoint_path, report.train_losses.len() as u64).map_err(internal_err)?;

            let mut provenance = Provenance::new("train", config, seed);
            provenance.add_checkpoint(stage.name(), &checkpoint_path).map_err(internal_err)?;
            provenance.details = serde_json::json!({
                "stage": stage.name(),
                "epochs": report.train_losses.len(),
                "best_epoch": report.best_epoch,
                "final_train_loss": report.train_losses.last(),
                "final_val_loss": report.val_losses.last(),
                "final_accuracy": report.accuracies.last(),
                "unconditional": overrides.unconditional,
            });
            provenance.write_beside(&checkpoint_path).map_err(internal_err)?;
            write_json(&out_dir.join(format!("{}.losses.json", stage.name())), &report.train_losses)
                .map_err(internal_err)?;
            println!(
                "trained {} for {} epochs (best epoch {}, final loss {:.4}) -> {}",
                stage.name(),
                report.train_losses.len(),
                report.best_epoch,
                report.train_losses.last().unwrap_or(&f64::NAN),
                checkpoint_path.display()
            );
        }
        None => {
            // Retrieval encoders: semantic rows against beat descriptors.
            let mut pairs = Vec::new();
            for entry in &manifest.pieces {
                let Some(semantic) = &entry.semantic_path else { continue };
                let video = ingest_semantic(semantic).map_err(data_err)?;
                let score = super::load_midi(&entry.midi_path).map_err(data_err)?;
                let music = music_beat_features(&quantize(&score, DEFAULT_GRID));
                pairs.push((video, music));
            }
            if pairs.is_empty() {
                return Err(data_err(anyhow::anyhow!(
                    "no entries carry semantic features; vmcp training needs paired videos"
                )));
            }
            let vmcp_config = VmcpConfig::default();
            let train_config = VmcpTrainConfig {
                epochs: overrides.epochs.unwrap_or(config.train.epochs),
                lr: overrides.lr.unwrap_or(config.train.lr),
                batch_size: config.train.batch_size.max(2),
                seed,
                checkpoint_dir: None,
            };
            let (model, losses) =
                train_vmcp(&pairs, vmcp_config, &train_config).map_err(internal_err)?;
            model.save(&checkpoint_path, losses.len() as u64).map_err(internal_err)?;

            let mut provenance = Provenance::new("train", config, seed);
            provenance.add_checkpoint("vmcp", &checkpoint_path).map_err(internal_err)?;
            provenance.details = serde_json::json!({
                "stage": "vmcp",
                "pairs": pairs.len(),
                "epochs": losses.len(),
                "final_loss": losses.last(),
            });
            provenance.write_beside(&checkpoint_path).map_err(internal_err)?;
            println!(
                "trained vmcp encoders on {} pairs ({} epochs) -> {}",
                pairs.len(),
                losses.len(),
                checkpoint_path.display()
            );
        }
    }
    Ok(())
}
