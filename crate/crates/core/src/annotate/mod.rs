//! Musical annotations derived from a quantized [`Score`]: melody/accompaniment
//! split, per-beat chord symbols, tonality, the beat grid, and key
//! normalization.

mod chords;
mod skyline;
mod tonality;

pub use chords::{extract_chords, ChordTemplate, CHORD_TEMPLATES};
pub use skyline::skyline_split;
pub use tonality::{detect_tonality, key_correlations};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::midi::Score;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("no pitch content: score has no notes")]
    EmptyScore,
}

/// The ten chord qualities recognized by the extractor, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChordQuality {
    Maj,
    Min,
    Dim,
    Aug,
    Sus2,
    Sus4,
    Maj7,
    Min7,
    Dom7,
    HalfDim7,
}

impl ChordQuality {
    pub const ALL: [ChordQuality; 10] = [
        ChordQuality::Maj,
        ChordQuality::Min,
        ChordQuality::Dim,
        ChordQuality::Aug,
        ChordQuality::Sus2,
        ChordQuality::Sus4,
        ChordQuality::Maj7,
        ChordQuality::Min7,
        ChordQuality::Dom7,
        ChordQuality::HalfDim7,
    ];

    /// Interval template: semitone offsets from the root.
    pub fn intervals(&self) -> &'static [u8] {
        match self {
            ChordQuality::Maj => &[0, 4, 7],
            ChordQuality::Min => &[0, 3, 7],
            ChordQuality::Dim => &[0, 3, 6],
            ChordQuality::Aug => &[0, 4, 8],
            ChordQuality::Sus2 => &[0, 2, 7],
            ChordQuality::Sus4 => &[0, 5, 7],
            ChordQuality::Maj7 => &[0, 4, 7, 11],
            ChordQuality::Min7 => &[0, 3, 7, 10],
            ChordQuality::Dom7 => &[0, 4, 7, 10],
            ChordQuality::HalfDim7 => &[0, 3, 6, 10],
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|q| q == self).expect("quality in ALL")
    }

    /// Conventional suffix used in chord names (`CM`, `Am7`, `G7`, ...).
    pub fn suffix(&self) -> &'static str {
        match self {
            ChordQuality::Maj => "M",
            ChordQuality::Min => "m",
            ChordQuality::Dim => "dim",
            ChordQuality::Aug => "aug",
            ChordQuality::Sus2 => "sus2",
            ChordQuality::Sus4 => "sus4",
            ChordQuality::Maj7 => "M7",
            ChordQuality::Min7 => "m7",
            ChordQuality::Dom7 => "7",
            ChordQuality::HalfDim7 => "m7b5",
        }
    }
}

pub const PITCH_CLASS_NAMES: [&str; 12] =
    ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// Chord content of one beat: either silence or a root plus quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chord {
    Rest,
    Sounding { root: u8, quality: ChordQuality },
}

impl Chord {
    /// 12-bit chromagram: ones at the pitch classes of the chord template.
    /// A rest is all zeros.
    pub fn chroma(&self) -> [u8; 12] {
        let mut bits = [0u8; 12];
        if let Chord::Sounding { root, quality } = self {
            for &iv in quality.intervals() {
                bits[((root + iv) % 12) as usize] = 1;
            }
        }
        bits
    }

    pub fn name(&self) -> String {
        match self {
            Chord::Rest => "rest".to_string(),
            Chord::Sounding { root, quality } => {
                format!("{}{}", PITCH_CLASS_NAMES[*root as usize], quality.suffix())
            }
        }
    }

    /// Stable index used by analysis tables: 120 sounding chords then rest.
    pub fn table_index(&self) -> usize {
        match self {
            Chord::Rest => 120,
            Chord::Sounding { root, quality } => *root as usize * 10 + quality.index(),
        }
    }
}

/// One beat of the chord progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordSymbol {
    pub bar_index: u32,
    pub beat_index: u8,
    pub chord: Chord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

/// Tonic pitch class plus mode; 24 possible values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tonality {
    pub tonic: u8,
    pub mode: Mode,
}

impl Tonality {
    pub fn name(&self) -> String {
        let mode = match self.mode {
            Mode::Major => "major",
            Mode::Minor => "minor",
        };
        format!("{} {mode}", PITCH_CLASS_NAMES[self.tonic as usize])
    }
}

/// Melody/accompaniment split of a score.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSplit {
    pub melody: Score,
    pub accompaniment: Score,
}

/// One beat slot of the metric grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeatPos {
    pub bar_index: u32,
    pub beat_index: u8,
    pub tick: u32,
}

/// Enumerates beats from tick 0 to the last note offset, four beats per bar
/// with one quarter note per beat.
pub fn beat_grid(score: &Score) -> Vec<BeatPos> {
    let tpq = score.ticks_per_quarter;
    let end = score.end_tick();
    let mut grid = Vec::new();
    let mut tick = 0u32;
    let mut index = 0u32;
    while tick < end {
        grid.push(BeatPos { bar_index: index / 4, beat_index: (index % 4) as u8, tick });
        index += 1;
        tick = index * tpq;
    }
    grid
}

/// Signed semitone shift in [-6, 6] that maps `tonality` onto the reference
/// key (C major or A minor).
pub fn reference_offset(tonality: Tonality) -> i32 {
    let target: i32 = match tonality.mode {
        Mode::Major => 0,
        Mode::Minor => 9,
    };
    let mut offset = (target - tonality.tonic as i32).rem_euclid(12);
    if offset > 6 {
        offset -= 12;
    }
    offset
}

/// Transposes a score so that major keys land on C major and minor keys on
/// A minor. Intervals are preserved; out-of-range pitches fold by octaves.
pub fn transpose_to_reference(score: &Score, tonality: Tonality) -> Score {
    score.transposed(reference_offset(tonality))
}

/// Per-piece annotation document written next to the split MIDI files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Annotation {
    pub tonality: Tonality,
    pub tempo_bpm: f64,
    pub chords: Vec<ChordRecord>,
    pub melody_midi_path: String,
    pub accomp_midi_path: String,
}

/// JSON form of a [`ChordSymbol`]; a rest has `root` and `quality` null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordRecord {
    pub bar: u32,
    pub beat: u8,
    pub root: Option<u8>,
    pub quality: Option<ChordQuality>,
}

impl From<&ChordSymbol> for ChordRecord {
    fn from(sym: &ChordSymbol) -> Self {
        let (root, quality) = match sym.chord {
            Chord::Rest => (None, None),
            Chord::Sounding { root, quality } => (Some(root), Some(quality)),
        };
        ChordRecord { bar: sym.bar_index, beat: sym.beat_index, root, quality }
    }
}

impl ChordRecord {
    pub fn chord(&self) -> Chord {
        match (self.root, self.quality) {
            (Some(root), Some(quality)) => Chord::Sounding { root, quality },
            _ => Chord::Rest,
        }
    }

    pub fn symbol(&self) -> ChordSymbol {
        ChordSymbol { bar_index: self.bar, beat_index: self.beat, chord: self.chord() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::NoteEvent;

    #[test]
    fn beat_grid_covers_one_bar() {
        let s = Score::from_notes(480, 120.0, vec![NoteEvent::new(1440, 480, 60, 64)]);
        let grid = beat_grid(&s);
        assert_eq!(grid.len(), 4);
        assert_eq!(grid[3], BeatPos { bar_index: 0, beat_index: 3, tick: 1440 });
    }

    #[test]
    fn beat_grid_of_empty_score_is_empty() {
        assert!(beat_grid(&Score::empty(480, 120.0)).is_empty());
    }

    #[test]
    fn beat_grid_spacing_equals_ticks_per_quarter() {
        for seed in 0..20 {
            let s = crate::toy::random_score(seed, 30);
            let grid = beat_grid(&s);
            for pair in grid.windows(2) {
                assert_eq!(pair[1].tick - pair[0].tick, s.ticks_per_quarter);
            }
        }
    }

    #[test]
    fn reference_offsets() {
        // D major shifts down a whole tone; A minor stays put.
        assert_eq!(reference_offset(Tonality { tonic: 2, mode: Mode::Major }), -2);
        assert_eq!(reference_offset(Tonality { tonic: 9, mode: Mode::Minor }), 0);
        // F# major is a tritone away; the offset stays in [-6, 6].
        assert_eq!(reference_offset(Tonality { tonic: 6, mode: Mode::Major }).abs(), 6);
    }

    #[test]
    fn transpose_preserves_intervals() {
        let s = crate::toy::random_score(7, 30);
        let t = transpose_to_reference(&s, Tonality { tonic: 2, mode: Mode::Major });
        for (a, b) in s.notes.iter().zip(&t.notes) {
            assert_eq!(b.pitch as i32 - a.pitch as i32, -2);
        }
    }

    #[test]
    fn chroma_of_c_major_triad() {
        let chord = Chord::Sounding { root: 0, quality: ChordQuality::Maj };
        let mut expect = [0u8; 12];
        expect[0] = 1;
        expect[4] = 1;
        expect[7] = 1;
        assert_eq!(chord.chroma(), expect);
        assert_eq!(Chord::Rest.chroma(), [0u8; 12]);
    }

    #[test]
    fn chord_names_match_convention() {
        assert_eq!(Chord::Sounding { root: 0, quality: ChordQuality::Maj }.name(), "CM");
        assert_eq!(Chord::Sounding { root: 9, quality: ChordQuality::Min7 }.name(), "Am7");
        assert_eq!(Chord::Sounding { root: 7, quality: ChordQuality::Dom7 }.name(), "G7");
    }

    #[test]
    fn chord_record_round_trip() {
        let sym = ChordSymbol {
            bar_index: 3,
            beat_index: 2,
            chord: Chord::Sounding { root: 5, quality: ChordQuality::Sus4 },
        };
        assert_eq!(ChordRecord::from(&sym).symbol(), sym);
        let rest = ChordSymbol { bar_index: 0, beat_index: 0, chord: Chord::Rest };
        assert_eq!(ChordRecord::from(&rest).symbol(), rest);
    }
}
