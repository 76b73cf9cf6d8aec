//! Score model and Standard MIDI File I/O.
//!
//! A [`Score`] is the quantized symbolic representation everything else in
//! the crate consumes: one merged piano track, a single global tempo and
//! time signature, and a list of note events in tick units.

mod smf;

pub use smf::{parse_midi, write_midi};

use thiserror::Error;

/// Default ticks per quarter note used when synthesizing new scores.
pub const DEFAULT_TICKS_PER_QUARTER: u32 = 480;

/// Default quantization grid: 4 positions per quarter, i.e. a 16th-note grid.
pub const DEFAULT_GRID: u32 = 4;

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("malformed MIDI at byte {offset}: {what}")]
    Malformed { offset: usize, what: String },
    #[error("unsupported MIDI feature: {0}")]
    Unsupported(String),
}

/// One note: onset and duration in ticks, MIDI pitch, velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NoteEvent {
    pub onset: u32,
    pub duration: u32,
    pub pitch: u8,
    pub velocity: u8,
}

impl NoteEvent {
    pub fn new(onset: u32, duration: u32, pitch: u8, velocity: u8) -> Self {
        debug_assert!(duration > 0, "note duration must be positive");
        debug_assert!(pitch <= 127);
        debug_assert!((1..=127).contains(&velocity));
        NoteEvent { onset, duration, pitch, velocity }
    }

    /// Tick at which the note stops sounding.
    pub fn offset(&self) -> u32 {
        self.onset + self.duration
    }

    pub fn pitch_class(&self) -> u8 {
        self.pitch % 12
    }
}

/// A quantizable single-track score with one global tempo and meter.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub ticks_per_quarter: u32,
    pub tempo_bpm: f64,
    /// (numerator, denominator); denominator restricted to {2, 4, 8}.
    pub time_signature: (u8, u8),
    /// Sorted by (onset, pitch).
    pub notes: Vec<NoteEvent>,
}

impl Score {
    /// Empty 4/4 score at the given tempo.
    pub fn empty(ticks_per_quarter: u32, tempo_bpm: f64) -> Self {
        Score { ticks_per_quarter, tempo_bpm, time_signature: (4, 4), notes: Vec::new() }
    }

    /// Builds a score from notes, enforcing the sort invariant.
    pub fn from_notes(ticks_per_quarter: u32, tempo_bpm: f64, mut notes: Vec<NoteEvent>) -> Self {
        sort_notes(&mut notes);
        Score { ticks_per_quarter, tempo_bpm, time_signature: (4, 4), notes }
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    /// Tick of the last note offset, 0 for an empty score.
    pub fn end_tick(&self) -> u32 {
        self.notes.iter().map(NoteEvent::offset).max().unwrap_or(0)
    }

    /// Ticks per bar under the score's meter.
    pub fn ticks_per_bar(&self) -> u32 {
        let (num, den) = self.time_signature;
        self.ticks_per_quarter * 4 * num as u32 / den as u32
    }

    /// Number of bars needed to cover all notes.
    pub fn n_bars(&self) -> u32 {
        let tpb = self.ticks_per_bar();
        self.end_tick().div_ceil(tpb.max(1))
    }

    /// Seconds per tick at the score's tempo.
    pub fn seconds_per_tick(&self) -> f64 {
        60.0 / (self.tempo_bpm * self.ticks_per_quarter as f64)
    }

    /// Shifts every pitch by `semitones`, folding by octaves at the range ends.
    pub fn transposed(&self, semitones: i32) -> Score {
        let mut out = self.clone();
        for note in &mut out.notes {
            let mut p = note.pitch as i32 + semitones;
            while p < 0 {
                p += 12;
            }
            while p > 127 {
                p -= 12;
            }
            note.pitch = p as u8;
        }
        sort_notes(&mut out.notes);
        out
    }
}

pub(crate) fn sort_notes(notes: &mut [NoteEvent]) {
    notes.sort_by_key(|n| (n.onset, n.pitch, n.duration, n.velocity));
}

/// Resolves same-pitch overlaps, which a single-channel MIDI stream cannot
/// represent: a retriggered pitch truncates the note still sounding, and
/// duplicates at one onset collapse to the longest (then loudest) note.
/// Scores without same-pitch overlap pass through unchanged.
pub fn normalize_overlaps(score: &Score) -> Score {
    let mut notes = score.notes.clone();
    // Same onset and pitch: keep longest duration, then highest velocity.
    notes.sort_by_key(|n| (n.pitch, n.onset, std::cmp::Reverse((n.duration, n.velocity))));
    notes.dedup_by(|next, kept| next.pitch == kept.pitch && next.onset == kept.onset);
    // A later onset of the same pitch cuts the sounding note short.
    for i in 0..notes.len().saturating_sub(1) {
        if notes[i].pitch == notes[i + 1].pitch && notes[i].offset() > notes[i + 1].onset {
            notes[i].duration = notes[i + 1].onset - notes[i].onset;
        }
    }
    sort_notes(&mut notes);
    Score { notes, ..score.clone() }
}

/// Snaps onsets and durations to a grid of `grid` positions per quarter note.
///
/// Onsets round to the nearest grid line; durations round but never collapse
/// below one grid unit, so quantization cannot produce zero-length notes.
/// The operation is idempotent.
pub fn quantize(score: &Score, grid: u32) -> Score {
    assert!(grid >= 1, "grid must be at least 1 position per quarter");
    let step = score.ticks_per_quarter as f64 / grid as f64;
    let snap = |ticks: u32| -> u32 { ((ticks as f64 / step).round() * step).round() as u32 };
    let mut notes: Vec<NoteEvent> = score
        .notes
        .iter()
        .map(|n| {
            let onset = snap(n.onset);
            let steps = (n.duration as f64 / step).round().max(1.0);
            let duration = ((steps * step).round() as u32).max(1);
            NoteEvent { onset, duration, ..*n }
        })
        .collect();
    sort_notes(&mut notes);
    Score { notes, ..score.clone() }
}
