//! Tokenized training pieces: everything each stage needs, derived once.

use crate::annotate::{extract_chords, skyline_split, ChordSymbol};
use crate::midi::{quantize, Score, DEFAULT_GRID};
use crate::tokenize::{
    encode_accomp_condition, encode_chord_stage, encode_notes, merge_tracks, pad_chords,
    CompoundToken,
};
use crate::video::FeatureBundle;

use super::model::StageRole;
use super::PipelineError;

/// One piece of the training corpus with every stage's token streams.
#[derive(Debug, Clone)]
pub struct TokenizedPiece {
    pub id: String,
    pub tempo_bpm: f64,
    pub n_bars: u32,
    /// Per-beat chords padded to `n_bars`.
    pub chords: Vec<ChordSymbol>,
    pub chord_tokens: Vec<CompoundToken>,
    pub melody_tokens: Vec<CompoundToken>,
    pub accomp_tokens: Vec<CompoundToken>,
    /// Merged melody-plus-accompaniment stream for the undecoupled variants.
    pub merged_tokens: Vec<CompoundToken>,
    /// Melody score kept for building the accompaniment condition.
    pub melody_score: Score,
    pub bundle: Option<FeatureBundle>,
}

impl TokenizedPiece {
    /// Quantizes, splits, extracts chords, and encodes every stage stream.
    pub fn from_score(
        id: impl Into<String>,
        score: &Score,
        bundle: Option<FeatureBundle>,
    ) -> Result<Self, PipelineError> {
        let quantized = quantize(score, DEFAULT_GRID);
        let n_bars = quantized.n_bars().max(1);
        let split = skyline_split(&quantized);
        let chords = pad_chords(&extract_chords(&quantized), n_bars);
        let merged = merge_tracks(&split.melody, &split.accompaniment)?;

        Ok(TokenizedPiece {
            id: id.into(),
            tempo_bpm: quantized.tempo_bpm,
            n_bars,
            chord_tokens: encode_chord_stage(&chords, n_bars)?,
            melody_tokens: encode_notes(&split.melody, n_bars)?,
            accomp_tokens: encode_notes(&split.accompaniment, n_bars)?,
            merged_tokens: encode_notes(&merged, n_bars)?,
            melody_score: split.melody,
            chords,
            bundle,
        })
    }

    /// Decoder target stream for a role.
    pub fn decoder_tokens(&self, role: StageRole) -> &[CompoundToken] {
        match role {
            StageRole::Chord => &self.chord_tokens,
            StageRole::Melody => &self.melody_tokens,
            StageRole::Accomp => &self.accomp_tokens,
            StageRole::MusicFromVideo | StageRole::MusicFromChords => &self.merged_tokens,
        }
    }

    /// Encoder condition stream for a role, when it has one. Sequence
    /// delimiters are stripped: encoders see content tokens only.
    pub fn condition_tokens(&self, role: StageRole) -> Result<Option<Vec<CompoundToken>>, PipelineError> {
        match role {
            StageRole::Melody | StageRole::MusicFromChords => {
                Ok(Some(strip_delimiters(&self.chord_tokens)))
            }
            StageRole::Accomp => Ok(Some(encode_accomp_condition(
                &self.chords,
                &self.melody_score,
                self.n_bars,
            )?)),
            _ => Ok(None),
        }
    }
}

/// Drops `BOS`/`EOS` from a decoder stream to form encoder input.
pub(crate) fn strip_delimiters(tokens: &[CompoundToken]) -> Vec<CompoundToken> {
    use crate::tokenize::TokenType;
    tokens
        .iter()
        .filter(|t| !matches!(t.ttype, TokenType::Bos | TokenType::Eos | TokenType::Pad))
        .copied()
        .collect()
}

/// Train/validation split of tokenized pieces.
#[derive(Debug, Clone, Default)]
pub struct StageDataset {
    pub train: Vec<TokenizedPiece>,
    pub val: Vec<TokenizedPiece>,
}

impl StageDataset {
    pub fn new(train: Vec<TokenizedPiece>, val: Vec<TokenizedPiece>) -> Self {
        StageDataset { train, val }
    }

    /// Validation pieces, falling back to the training set when none exist.
    pub fn val_or_train(&self) -> &[TokenizedPiece] {
        if self.val.is_empty() {
            &self.train
        } else {
            &self.val
        }
    }
}
