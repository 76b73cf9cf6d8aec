//! Symbolic segment descriptors: the desk-scale stand-in for audio features
//! on the music side of the retrieval model.

use crate::annotate::beat_grid;
use crate::midi::Score;

/// Width of one per-beat descriptor row: a 12-bin chroma histogram plus a
/// 4-bin onset-position histogram.
pub const MUSIC_FEATURE_DIM: usize = 16;

/// Splits feature rows into `l` contiguous segments of near-equal length.
/// Segments short on rows are padded with a zero row so every segment is
/// nonempty.
pub fn split_segments(rows: &[Vec<f32>], l: usize) -> Vec<Vec<Vec<f32>>> {
    assert!(l >= 1);
    let dim = rows.first().map_or(1, Vec::len);
    let per = rows.len().div_ceil(l).max(1);
    (0..l)
        .map(|s| {
            let lo = (s * per).min(rows.len());
            let hi = ((s + 1) * per).min(rows.len());
            if lo == hi {
                vec![vec![0.0; dim]]
            } else {
                rows[lo..hi].to_vec()
            }
        })
        .collect()
}

/// One descriptor row per beat: duration-weighted chroma over the sounding
/// pitch classes and counts of onsets in each 16th slot of the beat, both
/// L1-normalized.
pub fn music_beat_features(score: &Score) -> Vec<Vec<f32>> {
    let tpq = score.ticks_per_quarter;
    beat_grid(score)
        .into_iter()
        .map(|beat| {
            let lo = beat.tick;
            let hi = beat.tick + tpq;
            let mut row = vec![0.0f32; MUSIC_FEATURE_DIM];
            for n in &score.notes {
                if n.onset < hi && n.offset() > lo {
                    let overlap = n.offset().min(hi) - n.onset.max(lo);
                    row[(n.pitch % 12) as usize] += overlap as f32;
                }
                if n.onset >= lo && n.onset < hi {
                    let slot = ((n.onset - lo) * 4 / tpq).min(3) as usize;
                    row[12 + slot] += 1.0;
                }
            }
            let (chroma, rhythm) = row.split_at_mut(12);
            for block in [chroma, rhythm] {
                let sum: f32 = block.iter().sum();
                if sum > 0.0 {
                    block.iter_mut().for_each(|v| *v /= sum);
                }
            }
            row
        })
        .collect()
}

/// Per-beat descriptors already split into `l` segments.
pub fn music_segment_features(score: &Score, l: usize) -> Vec<Vec<Vec<f32>>> {
    split_segments(&music_beat_features(score), l)
}
