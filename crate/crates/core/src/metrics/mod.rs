//! Objective evaluation: pitch/rhythm quality metrics and the retrieval-based
//! video-music correspondence metric.

mod features;
mod vmcp;

pub use features::{music_beat_features, music_segment_features, split_segments};
pub use vmcp::{
    embed_pair, infonce_loss, synthetic_pairs, train_vmcp, vmcp_eval, vmcp_eval_pooled,
    RetrievalReport, SegmentEmbeddings, VideoMusicEmbedder, VmcpConfig, VmcpModel,
    VmcpTrainConfig,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::beat_grid;
use crate::midi::Score;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("segment count mismatch: video {video}, music {music}")]
    SegmentMismatch { video: usize, music: usize },
    #[error("need at least {need} items, have {have}")]
    TooFew { need: usize, have: usize },
    #[error("K = {k} exceeds the candidate pool M = {m}")]
    BadK { k: usize, m: usize },
    #[error("ground-truth index {index} outside the {m} candidates")]
    TruthOutOfRange { index: usize, m: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// The five music-quality numbers. Fields are `None` for an empty score so
/// degenerate pieces do not pollute corpus means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Scale consistency: best fraction of notes fitting one major/minor scale.
    pub sc: Option<f64>,
    /// Pitch entropy (bits) over the 128 MIDI pitches.
    pub pe: Option<f64>,
    /// Pitch-class entropy (bits) over the 12 classes.
    pub pce: Option<f64>,
    /// Empty beat rate: fraction of beats without a note onset.
    pub ebr: Option<f64>,
    /// Mean inter-onset interval in seconds (None with fewer than 2 onsets).
    pub ioi: Option<f64>,
}

impl MetricReport {
    pub fn empty() -> Self {
        MetricReport { sc: None, pe: None, pce: None, ebr: None, ioi: None }
    }
}

fn entropy_bits(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

const MAJOR_SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const MINOR_SCALE: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];

/// Computes SC, PE, PCE, EBR, and IOI for one score.
pub fn quality_metrics(score: &Score) -> MetricReport {
    if score.notes.is_empty() {
        return MetricReport::empty();
    }

    let mut pitch_counts = [0.0f64; 128];
    let mut class_counts = [0.0f64; 12];
    for n in &score.notes {
        pitch_counts[n.pitch as usize] += 1.0;
        class_counts[n.pitch_class() as usize] += 1.0;
    }

    // Best in-scale fraction over the 24 rotated major/minor scales.
    let total = score.notes.len() as f64;
    let mut sc = 0.0f64;
    for tonic in 0..12u8 {
        for scale in [MAJOR_SCALE, MINOR_SCALE] {
            let mut member = [false; 12];
            for &s in &scale {
                member[((tonic + s) % 12) as usize] = true;
            }
            let in_scale: f64 =
                (0..12).filter(|&pc| member[pc]).map(|pc| class_counts[pc]).sum();
            sc = sc.max(in_scale / total);
        }
    }

    let grid = beat_grid(score);
    let tpq = score.ticks_per_quarter;
    let empty_beats = grid
        .iter()
        .filter(|b| !score.notes.iter().any(|n| n.onset >= b.tick && n.onset < b.tick + tpq))
        .count();
    let ebr = (!grid.is_empty()).then(|| empty_beats as f64 / grid.len() as f64);

    let mut onsets: Vec<u32> = score.notes.iter().map(|n| n.onset).collect();
    onsets.sort_unstable();
    onsets.dedup();
    let ioi = (onsets.len() >= 2).then(|| {
        let spt = score.seconds_per_tick();
        onsets.windows(2).map(|w| (w[1] - w[0]) as f64 * spt).sum::<f64>()
            / (onsets.len() - 1) as f64
    });

    MetricReport {
        sc: Some(sc),
        pe: Some(entropy_bits(&pitch_counts)),
        pce: Some(entropy_bits(&class_counts)),
        ebr,
        ioi,
    }
}

/// Mean of the per-piece reports, skipping `None` fields per metric.
pub fn mean_report(reports: &[MetricReport]) -> MetricReport {
    fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
        let vals: Vec<f64> = values.flatten().collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
    MetricReport {
        sc: mean(reports.iter().map(|r| r.sc)),
        pe: mean(reports.iter().map(|r| r.pe)),
        pce: mean(reports.iter().map(|r| r.pce)),
        ebr: mean(reports.iter().map(|r| r.ebr)),
        ioi: mean(reports.iter().map(|r| r.ioi)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::NoteEvent;

    #[test]
    fn single_repeated_pitch_degenerates() {
        let s = Score::from_notes(
            480,
            120.0,
            (0..4).map(|i| NoteEvent::new(i * 480, 480, 60, 64)).collect(),
        );
        let r = quality_metrics(&s);
        assert_eq!(r.pe, Some(0.0));
        assert_eq!(r.pce, Some(0.0));
        assert_eq!(r.sc, Some(1.0));
    }

    #[test]
    fn uniform_pitch_classes_hit_log2_12() {
        let s = Score::from_notes(
            480,
            120.0,
            (0..12).map(|pc| NoteEvent::new(pc as u32 * 480, 480, 60 + pc, 64)).collect(),
        );
        let r = quality_metrics(&s);
        assert!((r.pce.unwrap() - 12f64.log2()).abs() < 1e-6);
    }

    #[test]
    fn onset_every_beat_at_120_bpm() {
        let s = Score::from_notes(
            480,
            120.0,
            (0..8).map(|i| NoteEvent::new(i * 480, 480, 60 + (i % 5) as u8, 64)).collect(),
        );
        let r = quality_metrics(&s);
        assert_eq!(r.ebr, Some(0.0));
        assert!((r.ioi.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_score_reports_all_na() {
        assert_eq!(quality_metrics(&Score::empty(480, 120.0)), MetricReport::empty());
    }

    #[test]
    fn octave_transposition_leaves_the_report_unchanged() {
        for seed in 0..10 {
            let s = crate::toy::random_quantized_score(seed, 3);
            let up = s.transposed(12);
            assert_eq!(quality_metrics(&s), quality_metrics(&up), "seed {seed}");
        }
    }

    /// Independent brute-force re-implementation of all five metrics.
    #[test]
    fn matches_brute_force_oracle_on_random_scores() {
        for seed in 0..100u64 {
            let s = crate::toy::random_quantized_score(seed, 3);
            let got = quality_metrics(&s);

            // SC oracle: enumerate all 24 scales explicitly.
            let mut best = 0.0f64;
            for tonic in 0..12u8 {
                for minor in [false, true] {
                    let steps: &[u8] = if minor {
                        &[0, 2, 3, 5, 7, 8, 10]
                    } else {
                        &[0, 2, 4, 5, 7, 9, 11]
                    };
                    let count = s
                        .notes
                        .iter()
                        .filter(|n| steps.iter().any(|&st| (tonic + st) % 12 == n.pitch % 12))
                        .count();
                    best = best.max(count as f64 / s.notes.len() as f64);
                }
            }
            assert!((got.sc.unwrap() - best).abs() < 1e-9, "sc seed {seed}");

            // Entropy oracles from scratch.
            let mut by_pitch = std::collections::BTreeMap::new();
            let mut by_class = std::collections::BTreeMap::new();
            for n in &s.notes {
                *by_pitch.entry(n.pitch).or_insert(0.0f64) += 1.0;
                *by_class.entry(n.pitch % 12).or_insert(0.0f64) += 1.0;
            }
            let n = s.notes.len() as f64;
            let pe: f64 = by_pitch.values().map(|c| -(c / n) * (c / n).log2()).sum();
            let pce: f64 = by_class.values().map(|c| -(c / n) * (c / n).log2()).sum();
            assert!((got.pe.unwrap() - pe).abs() < 1e-9, "pe seed {seed}");
            assert!((got.pce.unwrap() - pce).abs() < 1e-9, "pce seed {seed}");

            // EBR oracle over explicit beat windows.
            let n_beats = s.end_tick().div_ceil(s.ticks_per_quarter);
            let mut empty = 0usize;
            for b in 0..n_beats {
                let lo = b * s.ticks_per_quarter;
                let hi = lo + s.ticks_per_quarter;
                if !s.notes.iter().any(|note| note.onset >= lo && note.onset < hi) {
                    empty += 1;
                }
            }
            assert!(
                (got.ebr.unwrap() - empty as f64 / n_beats as f64).abs() < 1e-9,
                "ebr seed {seed}"
            );

            // IOI oracle.
            let mut onsets: Vec<u32> = s.notes.iter().map(|x| x.onset).collect();
            onsets.sort_unstable();
            onsets.dedup();
            if onsets.len() >= 2 {
                let spb = 60.0 / s.tempo_bpm;
                let expect = onsets
                    .windows(2)
                    .map(|w| (w[1] - w[0]) as f64 / s.ticks_per_quarter as f64 * spb)
                    .sum::<f64>()
                    / (onsets.len() - 1) as f64;
                assert!((got.ioi.unwrap() - expect).abs() < 1e-9, "ioi seed {seed}");
            }
        }
    }

    #[test]
    fn mean_report_skips_na_fields() {
        let a = MetricReport { sc: Some(1.0), pe: Some(2.0), pce: None, ebr: Some(0.0), ioi: None };
        let b = MetricReport::empty();
        let m = mean_report(&[a, b]);
        assert_eq!(m.sc, Some(1.0));
        assert_eq!(m.pce, None);
    }
}
