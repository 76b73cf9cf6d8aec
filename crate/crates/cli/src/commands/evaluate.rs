//! `evaluate`: music quality tables and retrieval precision.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Subcommand;

use vmusprod::metrics::{
    mean_report, music_segment_features, quality_metrics, split_segments, vmcp_eval,
    MetricReport, VmcpModel,
};
use vmusprod::midi::{quantize, DEFAULT_GRID};
use vmusprod::video::ingest_semantic;

use crate::config::RunConfig;
use crate::manifest::{DatasetManifest, TokenizedManifest};
use crate::util::{atomic_write, write_json};
use crate::{data_err, internal_err, CliResult};

#[derive(Debug, Subcommand)]
pub enum EvaluateCmd {
    /// SC/PE/PCE/EBR/IOI table for a generated set against a real set.
    Quality {
        /// Directory of generated `.mid` files.
        #[arg(long)]
        generated: PathBuf,
        /// Manifest of the real corpus for the reference row.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Write the CSV here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieval precision of generated music against the candidate videos.
    Vmcp {
        /// Tokenized corpus manifest; entries with semantic features form
        /// the candidate pool.
        #[arg(long)]
        tokenized: PathBuf,
        /// Trained dual-encoder checkpoint.
        #[arg(long)]
        encoders: PathBuf,
        /// Directory of generated `<id>.mid` files; the entry's own MIDI is
        /// evaluated when a file is absent.
        #[arg(long)]
        generated: Option<PathBuf>,
        /// Comma-separated precision cutoffs.
        #[arg(long, default_value = "5,10,20")]
        ks: String,
        /// Write the retrieval report JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the piece-by-candidate similarity matrix as a VMFT tensor.
        #[arg(long)]
        similarity_out: Option<PathBuf>,
    },
}

fn metric_cell(value: Option<f64>) -> String {
    value.map_or("na".to_string(), |v| format!("{v:.4}"))
}

fn csv_row(label: &str, report: &MetricReport) -> String {
    format!(
        "{label},{},{},{},{},{}",
        metric_cell(report.sc),
        metric_cell(report.pe),
        metric_cell(report.pce),
        metric_cell(report.ebr),
        metric_cell(report.ioi)
    )
}

fn dir_reports(dir: &Path) -> Result<Vec<MetricReport>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "mid"))
        .collect();
    paths.sort();
    anyhow::ensure!(!paths.is_empty(), "no .mid files in {}", dir.display());
    paths
        .iter()
        .map(|p| Ok(quality_metrics(&quantize(&super::load_midi(p)?, DEFAULT_GRID))))
        .collect()
}

fn quality(generated: &Path, manifest: Option<&Path>, out: Option<&Path>) -> CliResult {
    let mut lines = vec!["set,sc,pe,pce,ebr,ioi".to_string()];
    if let Some(manifest_path) = manifest {
        let manifest = DatasetManifest::load(manifest_path).map_err(data_err)?;
        let reports: Vec<MetricReport> = manifest
            .entries
            .iter()
            .map(|e| Ok(quality_metrics(&quantize(&super::load_midi(&e.midi_path)?, DEFAULT_GRID))))
            .collect::<Result<_>>()
            .map_err(data_err)?;
        lines.push(csv_row("real", &mean_report(&reports)));
    }
    let generated_reports = dir_reports(generated).map_err(data_err)?;
    lines.push(csv_row("generated", &mean_report(&generated_reports)));

    let csv = lines.join("\n") + "\n";
    print!("{csv}");
    if let Some(out) = out {
        atomic_write(out, csv.as_bytes()).map_err(internal_err)?;
    }
    Ok(())
}

fn vmcp(
    tokenized: &Path,
    encoders: &Path,
    generated: Option<&Path>,
    ks: &str,
    out: Option<&Path>,
    similarity_out: Option<&Path>,
) -> CliResult {
    let manifest = TokenizedManifest::load(tokenized).map_err(data_err)?;
    let model = VmcpModel::load(encoders).map_err(data_err)?;
    let ks: Vec<usize> = ks
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("parsing --ks"))
        .collect::<Result<_>>()
        .map_err(data_err)?;

    let mut video_segments = Vec::new();
    let mut music_segments = Vec::new();
    for entry in &manifest.pieces {
        let Some(semantic) = &entry.semantic_path else { continue };
        let video = ingest_semantic(semantic).map_err(data_err)?;
        video_segments.push(split_segments(&video, model.config.segments));

        let midi_path = generated
            .map(|dir| dir.join(format!("{}.mid", entry.id)))
            .filter(|p| p.exists())
            .unwrap_or_else(|| entry.midi_path.clone());
        let score = quantize(&super::load_midi(&midi_path).map_err(data_err)?, DEFAULT_GRID);
        music_segments.push(music_segment_features(&score, model.config.segments));
    }
    if video_segments.is_empty() {
        return Err(data_err(anyhow::anyhow!("no entries carry semantic features")));
    }

    let truth: Vec<usize> = (0..video_segments.len()).collect();
    let report =
        vmcp_eval(&music_segments, &video_segments, &truth, &model, &ks).map_err(internal_err)?;

    for (&k, &p) in &report.p_at {
        println!("P@{k} = {p:.4}");
    }
    println!("AR = {:.3} over {} candidates", report.average_rank, video_segments.len());
    if let Some(out) = out {
        write_json(out, &report).map_err(internal_err)?;
    }
    if let Some(path) = similarity_out {
        let rows: Vec<Vec<f32>> = report
            .similarity
            .iter()
            .map(|r| r.iter().map(|&v| v as f32).collect())
            .collect();
        vmusprod::vmft::save_tensor(path, &vmusprod::vmft::Tensor::from_rows(&rows))
            .map_err(internal_err)?;
    }
    Ok(())
}

pub fn run(cmd: EvaluateCmd, _config: &RunConfig) -> CliResult {
    match cmd {
        EvaluateCmd::Quality { generated, manifest, out } => {
            quality(&generated, manifest.as_deref(), out.as_deref())
        }
        EvaluateCmd::Vmcp { tokenized, encoders, generated, ks, out, similarity_out } => {
            vmcp(
                &tokenized,
                &encoders,
                generated.as_deref(),
                &ks,
                out.as_deref(),
                similarity_out.as_deref(),
            )
        }
    }
}
