//! Deterministic synthetic corpora for tests, docs, and quick experiments.
//!
//! Everything here is seeded: the same seed always yields the same scores,
//! frames, and feature bundles.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::annotate::Mode;
use crate::midi::{NoteEvent, Score, DEFAULT_TICKS_PER_QUARTER};
use crate::video::{FeatureBundle, FrameSequence};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random unquantized polyphonic score: arbitrary tick onsets and durations.
pub fn random_score(seed: u64, n_notes: usize) -> Score {
    let mut rng = rng(seed);
    let notes = (0..n_notes)
        .map(|_| {
            NoteEvent::new(
                rng.random_range(0..8 * 1920),
                rng.random_range(1..=1920),
                rng.random_range(21..=108),
                rng.random_range(1..=127),
            )
        })
        .collect();
    Score::from_notes(DEFAULT_TICKS_PER_QUARTER, 90.0 + (seed % 41) as f64, notes)
}

/// Random polyphonic score already on the 16th grid, durations at most two bars.
pub fn random_quantized_score(seed: u64, n_bars: u32) -> Score {
    let mut rng = rng(seed);
    let sixteenth = DEFAULT_TICKS_PER_QUARTER / 4;
    let positions = n_bars * 16;
    let n_notes = (n_bars * rng.random_range(4..=12)) as usize;
    let notes = (0..n_notes)
        .map(|_| {
            let pos = rng.random_range(0..positions);
            let max_dur = (positions - pos).min(32);
            NoteEvent::new(
                pos * sixteenth,
                rng.random_range(1..=max_dur) * sixteenth,
                rng.random_range(21..=108),
                rng.random_range(1..=127),
            )
        })
        .collect();
    Score::from_notes(DEFAULT_TICKS_PER_QUARTER, 90.0 + (seed % 41) as f64, notes)
}

const MAJOR_STEPS: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];
const NATURAL_MINOR_STEPS: [u8; 7] = [0, 2, 3, 5, 7, 8, 10];

/// Scale degrees (semitones above the tonic) of a major or natural minor scale.
pub fn scale_steps(mode: Mode) -> [u8; 7] {
    match mode {
        Mode::Major => MAJOR_STEPS,
        Mode::Minor => NATURAL_MINOR_STEPS,
    }
}

/// One ascending octave of a scale in quarter notes, tonic sounding twice.
pub fn scale_score(tonic: u8, mode: Mode) -> Score {
    let tpq = DEFAULT_TICKS_PER_QUARTER;
    let base = 60 + tonic % 12;
    let mut notes: Vec<NoteEvent> = scale_steps(mode)
        .iter()
        .enumerate()
        .map(|(i, &step)| NoteEvent::new(i as u32 * tpq, tpq, base + step, 80))
        .collect();
    notes.push(NoteEvent::new(7 * tpq, tpq, base + 12, 80));
    Score::from_notes(tpq, 120.0, notes)
}

/// Small tonal piece: a I–vi–IV–V style progression with a scalewise melody.
///
/// Chord tones sound on every beat in the accompaniment register while the
/// melody walks the scale on eighth notes, which makes these pieces useful
/// for overfitting tests and for exercising the full annotation pipeline.
pub fn tonal_piece(seed: u64, n_bars: u32) -> Score {
    let mut rng = rng(seed);
    let tpq = DEFAULT_TICKS_PER_QUARTER;
    let tonic = rng.random_range(0..12u8);
    let mode = if rng.random_bool(0.5) { Mode::Major } else { Mode::Minor };
    let steps = scale_steps(mode);
    let degrees: [usize; 4] = [0, 5, 3, 4]; // I vi IV V (degree indices)

    let mut notes = Vec::new();
    for bar in 0..n_bars {
        let degree = degrees[(bar as usize + rng.random_range(0..2)) % 4];
        for beat in 0..4u32 {
            let onset = (bar * 4 + beat) * tpq;
            // Triad stacked in thirds from the scale degree.
            for third in 0..3 {
                let step = steps[(degree + 2 * third) % 7];
                let octave_up = if (degree + 2 * third) >= 7 { 12 } else { 0 };
                notes.push(NoteEvent::new(onset, tpq, 48 + tonic + step + octave_up, 64));
            }
            // Eighth-note melody above.
            for half in 0..2u32 {
                let deg = rng.random_range(0..7usize);
                notes.push(NoteEvent::new(
                    onset + half * tpq / 2,
                    tpq / 2,
                    72 + tonic + steps[deg],
                    96,
                ));
            }
        }
    }
    Score::from_notes(tpq, 90.0 + (seed % 41) as f64, notes)
}

/// Deterministic RGB frame sequence with a moving gradient.
pub fn random_frames(seed: u64, n_frames: usize, width: u32, height: u32) -> FrameSequence {
    let mut rng = rng(seed);
    let speed: u8 = rng.random_range(0..=32);
    let base: [u8; 3] = [rng.random(), rng.random(), rng.random()];
    let frames = (0..n_frames)
        .map(|t| {
            let mut frame = Vec::with_capacity((width * height * 3) as usize);
            for y in 0..height {
                for x in 0..width {
                    let drift = (t as u32 * speed as u32) as u8;
                    frame.push(base[0].wrapping_add((x as u8).wrapping_add(drift)));
                    frame.push(base[1].wrapping_add(y as u8));
                    frame.push(base[2].wrapping_add(drift));
                }
            }
            frame
        })
        .collect();
    FrameSequence { width, height, fps: 25.0, frames }
}

/// Random semantic feature matrix (`rows` tokens of width 512) plus frames,
/// assembled into a [`FeatureBundle`] usable by the controller.
pub fn feature_bundle(seed: u64, semantic_rows: usize, color_rows: usize) -> FeatureBundle {
    let mut rng = rng(seed);
    let semantic: Vec<Vec<f32>> = (0..semantic_rows)
        .map(|_| (0..crate::video::SEMANTIC_DIM).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let frames = random_frames(seed ^ 0x5eed, color_rows.max(1), 16, 12);
    let color: Vec<Vec<f32>> =
        (0..color_rows).map(|i| crate::video::color_histogram(&frames.frame(i), 32)).collect();
    FeatureBundle {
        semantic,
        color,
        motion_mean: 0.1,
        tempo_bpm: 90.0 + (seed % 41) as f64,
        duration_sec: semantic_rows as f64,
    }
}
