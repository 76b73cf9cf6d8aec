//! Autoregressive decoding: chains the stages into full pieces.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::annotate::ChordSymbol;
use crate::midi::Score;
use crate::nn::layers::Fwd;
use crate::nn::sample::{sample_token, SamplingParams};
use crate::nn::tape::Tape;
use crate::tokenize::{
    decode_chord_tokens, decode_tokens, encode_accomp_condition, encode_chord_stage, merge_tracks,
    pad_chords, CompoundToken, SequenceValidator, TokenType,
};
use crate::video::FeatureBundle;

use super::dataset::strip_delimiters;
use super::model::{Ablations, Condition, StageModel, StageRole};
use super::PipelineError;

/// Pipeline variants: the full three-stage pipeline, the two collapsed
/// ablation architectures, and the video-free unconditional mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    Full,
    Video2Music,
    Video2Chord2Music,
    Unconditional,
}

impl GenMode {
    pub fn name(&self) -> &'static str {
        match self {
            GenMode::Full => "full",
            GenMode::Video2Music => "video2music",
            GenMode::Video2Chord2Music => "video2chord2music",
            GenMode::Unconditional => "unconditional",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenRequest {
    pub n_bars: u32,
    pub sampling: SamplingParams,
    pub seed: u64,
    pub mode: GenMode,
    pub ablations: Ablations,
}

impl Default for GenRequest {
    fn default() -> Self {
        GenRequest {
            n_bars: 4,
            sampling: SamplingParams::default(),
            seed: 0,
            mode: GenMode::Full,
            ablations: Ablations::default(),
        }
    }
}

/// The trained stages a generator can draw on; modes use different subsets.
#[derive(Default)]
pub struct GeneratorModels {
    pub chord: Option<StageModel>,
    pub melody: Option<StageModel>,
    pub accomp: Option<StageModel>,
    pub music_from_video: Option<StageModel>,
    pub music_from_chords: Option<StageModel>,
}

impl GeneratorModels {
    fn require(&self, role: StageRole) -> Result<&StageModel, PipelineError> {
        let slot = match role {
            StageRole::Chord => &self.chord,
            StageRole::Melody => &self.melody,
            StageRole::Accomp => &self.accomp,
            StageRole::MusicFromVideo => &self.music_from_video,
            StageRole::MusicFromChords => &self.music_from_chords,
        };
        slot.as_ref().ok_or(PipelineError::MissingStage(role.name()))
    }
}

/// Everything one generation run produced.
#[derive(Debug, Clone)]
pub struct GenOutput {
    pub score: Score,
    pub chords: Vec<ChordSymbol>,
    pub melody: Option<Score>,
    pub accomp: Option<Score>,
    pub tempo_bpm: f64,
}

/// Incremental positional bookkeeping mirrored from the validator state, so
/// sampled tokens get correct bar/beat metadata before they are embedded.
struct GenPos {
    bars_opened: u32,
    current_bar: u32,
    current_pos: u8,
}

impl GenPos {
    fn new() -> Self {
        GenPos { bars_opened: 0, current_bar: 0, current_pos: 1 }
    }

    fn place(&mut self, token: &mut CompoundToken) {
        match (token.ttype, token.barbeat) {
            (TokenType::Rhythm, Some(0)) => {
                self.current_bar = self.bars_opened;
                self.bars_opened += 1;
                self.current_pos = 1;
                token.bar_index = self.current_bar;
                token.beat_index = 0;
            }
            (TokenType::Rhythm, Some(p)) => {
                self.current_pos = p;
                token.bar_index = self.current_bar;
                token.beat_index = (p - 1) / 4;
            }
            _ => {
                token.bar_index = self.current_bar;
                token.beat_index = (self.current_pos.saturating_sub(1)) / 4;
            }
        }
    }
}

/// Decodes one stage autoregressively under the grammar validator.
///
/// Stops at `EOS`; a bar marker that would open bar `n_bars` is replaced by
/// `EOS` (truncation with a warning), as is running into the length cap.
fn decode_stage(
    model: &StageModel,
    condition: &Condition<'_>,
    tempo_bpm: f64,
    n_bars: u32,
    sampling: &SamplingParams,
    timing: bool,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<CompoundToken>, PipelineError> {
    let stage = model.config.role.decoder_stage();
    let mut validator = SequenceValidator::new(stage);
    let mut tokens = vec![CompoundToken::bos()];
    validator.push(&tokens[0]);
    let mut pos = GenPos::new();

    loop {
        if tokens.len() >= model.config.max_len {
            log::warn!("{}: length cap {} reached, truncating", stage.name(), model.config.max_len);
            let mut eos = CompoundToken::eos(pos.current_bar);
            pos.place(&mut eos);
            tokens.push(eos);
            break;
        }
        let mut tape: Tape<f32> = Tape::new();
        let ids = model.params.inject(&mut tape);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.0, rng);
        let heads = model.forward(&mut f, &tokens, condition, tempo_bpm, n_bars, timing)?;

        let last = tokens.len() - 1;
        let head_logits: Vec<(crate::tokenize::Attr, Vec<f32>)> = heads
            .iter()
            .map(|&(attr, id)| {
                let cols = attr.size();
                (attr, tape.data(id)[last * cols..(last + 1) * cols].to_vec())
            })
            .collect();

        let mut token = sample_token(&head_logits, sampling, &validator, rng);
        // A bar marker beyond the bar budget ends the piece.
        if token.ttype == TokenType::Rhythm
            && token.barbeat == Some(0)
            && pos.bars_opened >= n_bars
        {
            log::warn!("{}: no EOS within {n_bars} bars, truncating", stage.name());
            token = CompoundToken::eos(pos.current_bar);
        }
        pos.place(&mut token);
        // Decoded notes must fit the bar budget on the 16th grid.
        if let (TokenType::Note, Some(duration)) = (token.ttype, token.duration) {
            let global_pos = pos.current_bar * 16 + (pos.current_pos - 1) as u32;
            let remaining = (n_bars * 16).saturating_sub(global_pos).max(1);
            token.duration = Some(duration.min(remaining.min(32) as u8));
        }
        validator.push(&token);
        tokens.push(token);
        if token.ttype == TokenType::Eos {
            break;
        }
    }
    Ok(tokens)
}

fn decode_chords_for(
    models: &GeneratorModels,
    bundle: Option<&FeatureBundle>,
    req: &GenRequest,
    tempo: f64,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<ChordSymbol>, PipelineError> {
    let chord_model = models.require(StageRole::Chord)?;
    let condition = match (req.mode, bundle) {
        (GenMode::Unconditional, _) => Condition::None,
        (_, Some(bundle)) => Condition::Bundle(bundle, req.ablations),
        (_, None) => Condition::None,
    };
    let timing = !req.ablations.no_motion;
    let tokens =
        decode_stage(chord_model, &condition, tempo, req.n_bars, &req.sampling, timing, rng)?;
    Ok(pad_chords(&decode_chord_tokens(&tokens)?, req.n_bars))
}

/// Runs the requested pipeline mode end to end and merges the parts.
pub fn generate(
    models: &GeneratorModels,
    bundle: Option<&FeatureBundle>,
    req: &GenRequest,
) -> Result<GenOutput, PipelineError> {
    let mut rng = ChaCha20Rng::seed_from_u64(req.seed);
    let tempo = match (req.ablations.no_motion, bundle) {
        (true, _) | (false, None) => 110.0,
        (false, Some(b)) => b.tempo_bpm,
    };

    match req.mode {
        GenMode::Video2Music => {
            let model = models.require(StageRole::MusicFromVideo)?;
            let bundle = bundle.ok_or(PipelineError::MissingStage("feature bundle"))?;
            let condition = Condition::Bundle(bundle, req.ablations);
            let timing = !req.ablations.no_motion;
            let tokens =
                decode_stage(model, &condition, tempo, req.n_bars, &req.sampling, timing, &mut rng)?;
            let score = decode_tokens(&tokens, tempo)?;
            Ok(GenOutput { score, chords: Vec::new(), melody: None, accomp: None, tempo_bpm: tempo })
        }
        GenMode::Video2Chord2Music => {
            let chords = decode_chords_for(models, bundle, req, tempo, &mut rng)?;
            let model = models.require(StageRole::MusicFromChords)?;
            let cond_tokens = strip_delimiters(&encode_chord_stage(&chords, req.n_bars)?);
            let tokens = decode_stage(
                model,
                &Condition::Tokens(&cond_tokens),
                tempo,
                req.n_bars,
                &req.sampling,
                !req.ablations.no_motion,
                &mut rng,
            )?;
            let score = decode_tokens(&tokens, tempo)?;
            Ok(GenOutput { score, chords, melody: None, accomp: None, tempo_bpm: tempo })
        }
        GenMode::Full | GenMode::Unconditional => {
            let chords = decode_chords_for(models, bundle, req, tempo, &mut rng)?;
            let chord_cond = strip_delimiters(&encode_chord_stage(&chords, req.n_bars)?);

            let melody_model = models.require(StageRole::Melody)?;
            let timing = !req.ablations.no_motion;
            let melody_tokens = decode_stage(
                melody_model,
                &Condition::Tokens(&chord_cond),
                tempo,
                req.n_bars,
                &req.sampling,
                timing,
                &mut rng,
            )?;
            let melody = decode_tokens(&melody_tokens, tempo)?;

            let accomp_model = models.require(StageRole::Accomp)?;
            let accomp_cond = encode_accomp_condition(&chords, &melody, req.n_bars)?;
            let accomp_tokens = decode_stage(
                accomp_model,
                &Condition::Tokens(&accomp_cond),
                tempo,
                req.n_bars,
                &req.sampling,
                timing,
                &mut rng,
            )?;
            let accomp = decode_tokens(&accomp_tokens, tempo)?;

            let score = merge_tracks(&melody, &accomp)?;
            Ok(GenOutput {
                score,
                chords,
                melody: Some(melody),
                accomp: Some(accomp),
                tempo_bpm: tempo,
            })
        }
    }
}

/// Unconditional generation: the same pipeline with no feature bundle. The
/// chord model must have been trained without cross-attention.
pub fn generate_unconditional(
    models: &GeneratorModels,
    n_bars: u32,
    sampling: SamplingParams,
    seed: u64,
) -> Result<GenOutput, PipelineError> {
    let req = GenRequest {
        n_bars,
        sampling,
        seed,
        mode: GenMode::Unconditional,
        ablations: Ablations::default(),
    };
    generate(models, None, &req)
}
