//! `generate`: run the pipeline for one generation manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use vmusprod::midi::write_midi;
use vmusprod::nn::SamplingParams;
use vmusprod::pipeline::{
    generate, Ablations, GenMode, GenRequest, GeneratorModels, StageModel,
};

use crate::config::RunConfig;
use crate::provenance::Provenance;
use crate::util::atomic_write;
use crate::{data_err, internal_err, CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VideoFeaturePaths {
    pub semantic: Option<PathBuf>,
    pub frames: Option<PathBuf>,
}

/// Generation manifest: inputs, sampling knobs, mode, and output path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenManifest {
    #[serde(default)]
    pub video_features: VideoFeaturePaths,
    #[serde(default)]
    pub n_bars: Option<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub top_p: Option<f64>,
    pub mode: GenMode,
    /// Subset of `semantic`, `color`, `motion`.
    #[serde(default)]
    pub ablations: Vec<String>,
    pub output: PathBuf,
    /// Explicit checkpoint paths per stage; missing stages fall back to
    /// `<models>/<stage>.ckpt`.
    #[serde(default)]
    pub checkpoints: BTreeMap<String, PathBuf>,
}

fn parse_ablations(flags: &[String]) -> Result<Ablations> {
    let mut ablations = Ablations::default();
    for flag in flags {
        match flag.as_str() {
            "semantic" => ablations.no_semantic = true,
            "color" => ablations.no_color = true,
            "motion" => ablations.no_motion = true,
            other => anyhow::bail!("unknown ablation flag `{other}`"),
        }
    }
    Ok(ablations)
}

fn stage_paths(mode: GenMode) -> &'static [&'static str] {
    match mode {
        GenMode::Full | GenMode::Unconditional => &["chord", "melody", "accomp"],
        GenMode::Video2Music => &["music_from_video"],
        GenMode::Video2Chord2Music => &["chord", "music_from_chords"],
    }
}

fn resolve_checkpoint(
    manifest: &GenManifest,
    models_dir: Option<&Path>,
    base: &Path,
    stage: &str,
) -> Result<PathBuf> {
    if let Some(path) = manifest.checkpoints.get(stage) {
        let path = if path.is_absolute() { path.clone() } else { base.join(path) };
        return Ok(path);
    }
    if let Some(dir) = models_dir {
        return Ok(dir.join(format!("{stage}.ckpt")));
    }
    anyhow::bail!("no checkpoint for stage `{stage}`: set it in the manifest or pass --models")
}

pub fn run(manifest_path: &Path, models_dir: Option<&Path>, config: &RunConfig) -> CliResult {
    let text = std::fs::read_to_string(manifest_path)
        .with_context(|| format!("reading {}", manifest_path.display()))
        .map_err(data_err)?;
    let manifest: GenManifest = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", manifest_path.display()))
        .map_err(data_err)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let ablations = parse_ablations(&manifest.ablations).map_err(data_err)?;

    // Load exactly the stages the mode needs.
    let mut models = GeneratorModels::default();
    let mut checkpoint_files: BTreeMap<String, PathBuf> = BTreeMap::new();
    for &stage in stage_paths(manifest.mode) {
        let path = resolve_checkpoint(&manifest, models_dir, base, stage).map_err(data_err)?;
        let model = StageModel::load(&path)
            .with_context(|| format!("loading checkpoint {}", path.display()))
            .map_err(data_err)?;
        checkpoint_files.insert(stage.to_string(), path);
        match stage {
            "chord" => models.chord = Some(model),
            "melody" => models.melody = Some(model),
            "accomp" => models.accomp = Some(model),
            "music_from_video" => models.music_from_video = Some(model),
            "music_from_chords" => models.music_from_chords = Some(model),
            _ => unreachable!(),
        }
    }

    let bundle = if manifest.mode == GenMode::Unconditional {
        None
    } else {
        let resolve = |p: &Option<PathBuf>| {
            p.as_ref().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) })
        };
        super::train::build_bundle(
            resolve(&manifest.video_features.semantic).as_deref(),
            resolve(&manifest.video_features.frames).as_deref(),
            &config.tempo_map(),
        )
        .map_err(data_err)?
    };
    if bundle.is_none() && manifest.mode != GenMode::Unconditional {
        return Err(CliError::Usage(
            "conditional modes need video_features.semantic and/or .frames".into(),
        ));
    }

    let n_bars = manifest
        .n_bars
        .or_else(|| bundle.as_ref().map(|b| b.n_bars()))
        .unwrap_or(4)
        .max(1);
    let sampling = SamplingParams {
        temperature: manifest.temperature.unwrap_or(config.sampling.temperature),
        top_p: manifest.top_p.unwrap_or(config.sampling.top_p),
        argmax: false,
    };
    let request = GenRequest { n_bars, sampling, seed: manifest.seed, mode: manifest.mode, ablations };
    let output = generate(&models, bundle.as_ref(), &request).map_err(internal_err)?;

    let out_path = if manifest.output.is_absolute() {
        manifest.output.clone()
    } else {
        base.join(&manifest.output)
    };
    atomic_write(&out_path, &write_midi(&output.score)).map_err(internal_err)?;

    let mut provenance = Provenance::new("generate", config, manifest.seed);
    for (stage, path) in &checkpoint_files {
        provenance.add_checkpoint(stage, path).map_err(internal_err)?;
    }
    provenance.set_output(&out_path).map_err(internal_err)?;
    provenance.details = serde_json::json!({
        "mode": manifest.mode.name(),
        "ablations": ablations.flags(),
        "n_bars": n_bars,
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "tempo_bpm": output.tempo_bpm,
        "notes": output.score.notes.len(),
    });
    provenance.write_beside(&out_path).map_err(internal_err)?;

    println!(
        "generated {} bars, {} notes at {:.0} BPM -> {}",
        n_bars,
        output.score.notes.len(),
        output.tempo_bpm,
        out_path.display()
    );
    Ok(())
}
