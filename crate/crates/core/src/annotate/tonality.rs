//! Krumhansl-Schmuckler key detection.

use crate::midi::Score;

use super::{AnnotateError, Mode, Tonality};

// Krumhansl-Kessler probe-tone profiles (Krumhansl, "Cognitive Foundations of
// Musical Pitch", 1990). Index 0 is the tonic.
pub const KK_MAJOR: [f64; 12] =
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88];
pub const KK_MINOR: [f64; 12] =
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17];

/// Duration-weighted pitch-class histogram.
fn pitch_class_weights(score: &Score) -> [f64; 12] {
    let mut hist = [0.0f64; 12];
    for note in &score.notes {
        hist[note.pitch_class() as usize] += note.duration as f64;
    }
    hist
}

fn pearson(x: &[f64; 12], y: &[f64; 12]) -> f64 {
    let mx = x.iter().sum::<f64>() / 12.0;
    let my = y.iter().sum::<f64>() / 12.0;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..12 {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Correlation of the score's pitch-class histogram with each of the 24
/// rotated major/minor profiles, in (tonic 0 major, ..., tonic 11 major,
/// tonic 0 minor, ..., tonic 11 minor) order.
pub fn key_correlations(score: &Score) -> [f64; 24] {
    let hist = pitch_class_weights(score);
    let mut out = [0.0f64; 24];
    for tonic in 0..12usize {
        let mut maj = [0.0f64; 12];
        let mut min = [0.0f64; 12];
        for pc in 0..12usize {
            maj[pc] = KK_MAJOR[(pc + 12 - tonic) % 12];
            min[pc] = KK_MINOR[(pc + 12 - tonic) % 12];
        }
        out[tonic] = pearson(&hist, &maj);
        out[12 + tonic] = pearson(&hist, &min);
    }
    out
}

/// Best-correlated key, ties broken by major before minor, then lower tonic.
pub fn detect_tonality(score: &Score) -> Result<Tonality, AnnotateError> {
    if score.notes.is_empty() {
        return Err(AnnotateError::EmptyScore);
    }
    let corr = key_correlations(score);
    let mut best = 0usize;
    for i in 1..24 {
        if corr[i] > corr[best] {
            best = i;
        }
    }
    Ok(Tonality {
        tonic: (best % 12) as u8,
        mode: if best < 12 { Mode::Major } else { Mode::Minor },
    })
}
