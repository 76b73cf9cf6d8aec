//! Compound event tokens and the per-stage vocabularies.
//!
//! A [`CompoundToken`] is one event column: a `Type` plus a stack of
//! attributes (`BarBeat`, `Pitch`, `Duration`, `Root`, `Quality`). The chord
//! stage models `Rhythm` and `Chord` tokens on a 4-beat grid; the melody and
//! accompaniment stages model `Rhythm` and `Note` tokens on a 16-position
//! grid. Unset attributes encode as the reserved `NA` id 0 of each table.

mod cache;
mod codec;
mod validate;

pub use cache::{load_tokens, read_tokens, save_tokens, write_tokens, Sidecar, SidecarAttr};
pub use codec::{
    decode_chord_tokens, decode_tokens, encode_accomp_condition, encode_chord_stage,
    encode_note_stage, encode_notes, merge_tracks, pad_chords, Part,
};
pub use validate::{validate_sequence, SequenceValidator};

use std::io;

use thiserror::Error;

use crate::annotate::{Chord, ChordQuality};

/// Sub-beat positions per bar in the note stages (16th-note grid in 4/4).
pub const POSITIONS_PER_BAR: u8 = 16;
/// Beat positions per bar in the chord stage.
pub const BEATS_PER_BAR: u8 = 4;
/// Durations are expressed in sixteenths and clipped to two bars.
pub const MAX_DURATION: u8 = 32;
/// Ticks per quarter used when decoding token sequences back to scores.
pub const DECODE_TPQ: u32 = 480;
/// Velocity assigned to decoded notes; tokens carry no velocity attribute.
pub const DECODE_VELOCITY: u8 = 64;

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("unsupported meter {num}/{den}: the token grid is 4/4 only")]
    UnsupportedMeter { num: u8, den: u8 },
    #[error("chord list covers {got} beats but {expected} are required")]
    BarCoverage { expected: usize, got: usize },
    #[error("note token at index {index} appears before any position marker")]
    OrphanNote { index: usize },
    #[error("chord token at index {index} appears before any beat marker")]
    OrphanChord { index: usize },
    #[error("decreasing position at token index {index}")]
    PositionOrder { index: usize },
    #[error("sequence does not start with BOS")]
    MissingBos,
    #[error("unexpected token at index {index}: {what}")]
    UnexpectedToken { index: usize, what: String },
    #[error("unknown {attr} id {id} at token index {index}")]
    UnknownId { index: usize, attr: &'static str, id: u16 },
    #[error("grammar violation at token index {index}: {what}")]
    Grammar { index: usize, what: String },
    #[error("tempo mismatch: {a} vs {b} BPM")]
    TempoMismatch { a: f64, b: f64 },
    #[error("tick grid mismatch: {a} vs {b} ticks per quarter")]
    GridMismatch { a: u32, b: u32 },
    #[error("token cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenType {
    Pad,
    Bos,
    Eos,
    Rhythm,
    Note,
    Chord,
}

impl TokenType {
    pub const COUNT: usize = 6;

    pub fn id(&self) -> u16 {
        match self {
            TokenType::Pad => 0,
            TokenType::Bos => 1,
            TokenType::Eos => 2,
            TokenType::Rhythm => 3,
            TokenType::Note => 4,
            TokenType::Chord => 5,
        }
    }

    pub fn from_id(id: u16) -> Option<TokenType> {
        Some(match id {
            0 => TokenType::Pad,
            1 => TokenType::Bos,
            2 => TokenType::Eos,
            3 => TokenType::Rhythm,
            4 => TokenType::Note,
            5 => TokenType::Chord,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TokenType::Pad => "pad",
            TokenType::Bos => "bos",
            TokenType::Eos => "eos",
            TokenType::Rhythm => "rhythm",
            TokenType::Note => "note",
            TokenType::Chord => "chord",
        }
    }
}

/// One event column.
///
/// `barbeat` is `Some(0)` for a bar marker and `Some(1..=16)` for a sub-beat
/// position marker (`1..=4` in the chord stage). `bar_index`/`beat_index`
/// locate the token on the absolute grid for embeddings and bar-level masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompoundToken {
    pub ttype: TokenType,
    pub barbeat: Option<u8>,
    pub pitch: Option<u8>,
    pub duration: Option<u8>,
    pub root: Option<u8>,
    pub quality: Option<ChordQuality>,
    pub bar_index: u32,
    pub beat_index: u8,
}

impl CompoundToken {
    fn blank(ttype: TokenType) -> Self {
        CompoundToken {
            ttype,
            barbeat: None,
            pitch: None,
            duration: None,
            root: None,
            quality: None,
            bar_index: 0,
            beat_index: 0,
        }
    }

    pub fn bos() -> Self {
        Self::blank(TokenType::Bos)
    }

    pub fn eos(bar_index: u32) -> Self {
        CompoundToken { bar_index, ..Self::blank(TokenType::Eos) }
    }

    pub fn pad() -> Self {
        Self::blank(TokenType::Pad)
    }

    /// Bar marker opening bar `bar_index`.
    pub fn bar(bar_index: u32) -> Self {
        CompoundToken { barbeat: Some(0), bar_index, ..Self::blank(TokenType::Rhythm) }
    }

    /// Position marker at sub-beat `position` (1-based) of `bar_index`.
    pub fn position(position: u8, bar_index: u32) -> Self {
        debug_assert!(position >= 1);
        CompoundToken {
            barbeat: Some(position),
            bar_index,
            beat_index: (position - 1) / 4,
            ..Self::blank(TokenType::Rhythm)
        }
    }

    pub fn note(pitch: u8, duration: u8, bar_index: u32, beat_index: u8) -> Self {
        CompoundToken {
            pitch: Some(pitch),
            duration: Some(duration),
            bar_index,
            beat_index,
            ..Self::blank(TokenType::Note)
        }
    }

    pub fn chord(chord: Chord, bar_index: u32, beat_index: u8) -> Self {
        let (root, quality) = match chord {
            Chord::Rest => (None, None),
            Chord::Sounding { root, quality } => (Some(root), Some(quality)),
        };
        CompoundToken {
            root,
            quality,
            bar_index,
            beat_index,
            ..Self::blank(TokenType::Chord)
        }
    }

    pub fn chord_value(&self) -> Chord {
        match (self.root, self.quality) {
            (Some(root), Some(quality)) => Chord::Sounding { root, quality },
            _ => Chord::Rest,
        }
    }

    /// Chromagram of a chord token (all zeros for rests and non-chords).
    pub fn chroma(&self) -> [u8; 12] {
        if self.ttype == TokenType::Chord {
            self.chord_value().chroma()
        } else {
            [0u8; 12]
        }
    }
}

/// 12-bit chromagram of a chord: ones at the template pitch classes, all
/// zeros for a rest.
pub fn chroma_vector(chord: Chord) -> [u8; 12] {
    chord.chroma()
}

/// Which generator stage a vocabulary belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Chord,
    Melody,
    Accomp,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Chord => "chord",
            Stage::Melody => "melody",
            Stage::Accomp => "accomp",
        }
    }

    pub fn positions_per_bar(&self) -> u8 {
        match self {
            Stage::Chord => BEATS_PER_BAR,
            _ => POSITIONS_PER_BAR,
        }
    }
}

/// The token attributes; each has its own id table with `NA` at id 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attr {
    Type,
    BarBeat,
    Pitch,
    Duration,
    Root,
    Quality,
}

impl Attr {
    pub fn name(&self) -> &'static str {
        match self {
            Attr::Type => "type",
            Attr::BarBeat => "barbeat",
            Attr::Pitch => "pitch",
            Attr::Duration => "duration",
            Attr::Root => "root",
            Attr::Quality => "quality",
        }
    }

    /// Table size including the `NA` entry (the `Type` table has no `NA`).
    pub fn size(&self) -> usize {
        match self {
            Attr::Type => TokenType::COUNT,
            Attr::BarBeat => 2 + POSITIONS_PER_BAR as usize,
            Attr::Pitch => 129,
            Attr::Duration => 1 + MAX_DURATION as usize,
            Attr::Root => 13,
            Attr::Quality => 11,
        }
    }

    pub fn encode(&self, token: &CompoundToken) -> u16 {
        match self {
            Attr::Type => token.ttype.id(),
            Attr::BarBeat => token.barbeat.map_or(0, |v| v as u16 + 1),
            Attr::Pitch => token.pitch.map_or(0, |v| v as u16 + 1),
            Attr::Duration => token.duration.map_or(0, |v| v as u16),
            Attr::Root => token.root.map_or(0, |v| v as u16 + 1),
            Attr::Quality => token.quality.map_or(0, |q| q.index() as u16 + 1),
        }
    }

    /// Writes the field encoded by `id` into `token`; `None` if out of range.
    pub fn decode_into(&self, id: u16, token: &mut CompoundToken) -> Option<()> {
        if id as usize >= self.size() {
            return None;
        }
        match self {
            Attr::Type => token.ttype = TokenType::from_id(id)?,
            Attr::BarBeat => token.barbeat = (id > 0).then(|| (id - 1) as u8),
            Attr::Pitch => token.pitch = (id > 0).then(|| (id - 1) as u8),
            Attr::Duration => token.duration = (id > 0).then_some(id as u8),
            Attr::Root => token.root = (id > 0).then(|| (id - 1) as u8),
            Attr::Quality => {
                token.quality = (id > 0).then(|| ChordQuality::ALL[(id - 1) as usize])
            }
        }
        Some(())
    }

    /// Human-readable label of one id, used in vocabulary sidecars.
    pub fn value_name(&self, id: u16) -> String {
        match self {
            Attr::Type => TokenType::from_id(id).map_or("?".into(), |t| t.name().to_string()),
            Attr::BarBeat => match id {
                0 => "na".into(),
                1 => "bar".into(),
                v => format!("pos{}", v - 1),
            },
            Attr::Pitch => {
                if id == 0 {
                    "na".into()
                } else {
                    format!("{}", id - 1)
                }
            }
            Attr::Duration => {
                if id == 0 {
                    "na".into()
                } else {
                    format!("{id}")
                }
            }
            Attr::Root => {
                if id == 0 {
                    "na".into()
                } else {
                    crate::annotate::PITCH_CLASS_NAMES[(id - 1) as usize].into()
                }
            }
            Attr::Quality => {
                if id == 0 {
                    "na".into()
                } else {
                    format!("{:?}", ChordQuality::ALL[(id - 1) as usize]).to_lowercase()
                }
            }
        }
    }
}

/// Per-stage vocabulary: the ordered attribute tables of one decoder stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageVocab {
    pub stage: Stage,
    pub attrs: Vec<Attr>,
}

impl StageVocab {
    pub fn for_stage(stage: Stage) -> Self {
        let attrs = match stage {
            Stage::Chord => vec![Attr::Type, Attr::BarBeat, Attr::Root, Attr::Quality],
            Stage::Melody | Stage::Accomp => {
                vec![Attr::Type, Attr::BarBeat, Attr::Pitch, Attr::Duration]
            }
        };
        StageVocab { stage, attrs }
    }

    pub fn n_attrs(&self) -> usize {
        self.attrs.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.attrs.iter().map(Attr::size).collect()
    }

    /// Encodes tokens to id rows, one `u16` per attribute in vocab order.
    pub fn encode_ids(&self, tokens: &[CompoundToken]) -> Vec<Vec<u16>> {
        tokens.iter().map(|t| self.attrs.iter().map(|a| a.encode(t)).collect()).collect()
    }

    /// Decodes id rows back to tokens; structural positions (`bar_index`,
    /// `beat_index`) are reconstructed from the markers.
    pub fn decode_ids(&self, rows: &[Vec<u16>]) -> Result<Vec<CompoundToken>, TokenizeError> {
        let mut tokens = Vec::with_capacity(rows.len());
        for (index, row) in rows.iter().enumerate() {
            if row.len() != self.n_attrs() {
                return Err(TokenizeError::Cache(format!(
                    "id row {index} has {} attributes, vocabulary has {}",
                    row.len(),
                    self.n_attrs()
                )));
            }
            let mut token = CompoundToken::blank(TokenType::Pad);
            for (attr, &id) in self.attrs.iter().zip(row) {
                attr.decode_into(id, &mut token).ok_or(TokenizeError::UnknownId {
                    index,
                    attr: attr.name(),
                    id,
                })?;
            }
            tokens.push(token);
        }
        fill_positions(&mut tokens);
        Ok(tokens)
    }
}

/// Recomputes `bar_index`/`beat_index` from the marker structure.
pub(crate) fn fill_positions(tokens: &mut [CompoundToken]) {
    let mut bar: Option<u32> = None;
    let mut next_bar = 0u32;
    let mut beat = 0u8;
    for token in tokens.iter_mut() {
        match (token.ttype, token.barbeat) {
            (TokenType::Rhythm, Some(0)) => {
                bar = Some(next_bar);
                next_bar += 1;
                beat = 0;
            }
            (TokenType::Rhythm, Some(p)) => {
                beat = (p - 1) / 4;
            }
            _ => {}
        }
        token.bar_index = bar.unwrap_or(0);
        token.beat_index = beat;
        if token.ttype == TokenType::Eos {
            token.bar_index = next_bar.saturating_sub(1);
            token.beat_index = 0;
        }
    }
}
