//! Log-chroma color histograms.
//!
//! Each channel is projected into a 2D log-ratio space against the other two
//! channels and accumulated into an intensity-weighted histogram. Log ratios
//! are invariant to a global scaling of all channels, which makes the feature
//! robust to illumination changes.

use super::FrameRef;

/// Guards the log ratios against zero channels.
pub const EPSILON: f64 = 1e-4;
/// Log-ratio coordinates are histogrammed over `[-RANGE, RANGE]^2`.
pub const RANGE: f64 = 3.0;

/// Computes the concatenated log-chroma histogram of a frame.
///
/// For each channel `c` the coordinates are `u = ln((c+eps)/(c1+eps))` and
/// `v = ln((c+eps)/(c2+eps))` with `(c1, c2)` the other two channels; each
/// pixel contributes its intensity to a `bins x bins` grid over `[-3, 3]^2`.
/// The three grids are normalized to sum 1 and concatenated, so the default
/// 32 bins give a 3072-dimensional feature.
pub fn color_histogram(frame: &FrameRef<'_>, bins: usize) -> Vec<f32> {
    assert!(bins >= 1);
    let block = bins * bins;
    let mut hist = vec![0.0f64; 3 * block];

    // (channel, other1, other2) index triples for the three projections.
    const PROJ: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 0, 2), (2, 0, 1)];

    let mut totals = [0.0f64; 3];
    for px in frame.rgb.chunks_exact(3) {
        let c = [px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0];
        let intensity = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        for (p, (a, b1, b2)) in PROJ.iter().enumerate() {
            let u = ((c[*a] + EPSILON) / (c[*b1] + EPSILON)).ln();
            let v = ((c[*a] + EPSILON) / (c[*b2] + EPSILON)).ln();
            let idx = p * block + bin_index(u, bins) * bins + bin_index(v, bins);
            hist[idx] += intensity;
            totals[p] += intensity;
        }
    }

    // An all-black frame carries no intensity; fall back to counting pixels so
    // each block still sums to 1.
    for p in 0..3 {
        if totals[p] == 0.0 && !frame.rgb.is_empty() {
            let n = (frame.rgb.len() / 3) as f64;
            for px in frame.rgb.chunks_exact(3) {
                let c = [px[0] as f64 / 255.0, px[1] as f64 / 255.0, px[2] as f64 / 255.0];
                let (a, b1, b2) = PROJ[p];
                let u = ((c[a] + EPSILON) / (c[b1] + EPSILON)).ln();
                let v = ((c[a] + EPSILON) / (c[b2] + EPSILON)).ln();
                hist[p * block + bin_index(u, bins) * bins + bin_index(v, bins)] += 1.0 / n;
            }
            totals[p] = 1.0;
        }
    }

    hist.chunks_mut(block)
        .zip(&totals)
        .flat_map(|(chunk, &total)| {
            let norm = if total > 0.0 { total } else { 1.0 };
            chunk.iter().map(move |&v| (v / norm) as f32)
        })
        .collect()
}

fn bin_index(coord: f64, bins: usize) -> usize {
    let clamped = coord.clamp(-RANGE, RANGE);
    (((clamped + RANGE) / (2.0 * RANGE) * bins as f64) as usize).min(bins - 1)
}
