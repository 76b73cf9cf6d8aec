//! Stage model assembly: compound-token embeddings, the video controller,
//! encoder/decoder stacks, and per-attribute output heads.

use std::rc::Rc;

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::nn::layers::{sinusoidal_encoding, Decoder, Embedding, Encoder, Fwd, Linear};
use crate::nn::tape::{bar_cross_mask, BoolMat, Id, Tape};
use crate::nn::{checkpoint, ParamSet, TransformerConfig};
use crate::tokenize::{Attr, CompoundToken, Stage, StageVocab};
use crate::video::{FeatureBundle, COLOR_DIM, SEMANTIC_DIM};

use super::PipelineError;

/// Which model a [`StageModel`] implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageRole {
    /// Chord decoder cross-attending the fused video features.
    Chord,
    /// Chord-conditioned melody decoder under the bar-level mask.
    Melody,
    /// Chord-plus-melody-conditioned accompaniment decoder.
    Accomp,
    /// Single decoder straight from video features (no music decoupling).
    MusicFromVideo,
    /// Chords first, then one undecoupled music stage.
    MusicFromChords,
}

impl StageRole {
    pub fn name(&self) -> &'static str {
        match self {
            StageRole::Chord => "chord",
            StageRole::Melody => "melody",
            StageRole::Accomp => "accomp",
            StageRole::MusicFromVideo => "music_from_video",
            StageRole::MusicFromChords => "music_from_chords",
        }
    }

    /// Token stream the decoder of this role emits.
    pub fn decoder_stage(&self) -> Stage {
        match self {
            StageRole::Chord => Stage::Chord,
            StageRole::Melody => Stage::Melody,
            _ => Stage::Accomp,
        }
    }

    fn has_token_encoder(&self) -> bool {
        matches!(self, StageRole::Melody | StageRole::Accomp | StageRole::MusicFromChords)
    }

    fn has_controller(&self) -> bool {
        matches!(self, StageRole::Chord | StageRole::MusicFromVideo)
    }

    /// Attributes embedded on the encoder side (plus chroma, which is a dense
    /// 12-bit vector rather than a table lookup).
    fn encoder_attrs(&self) -> &'static [Attr] {
        match self {
            StageRole::Melody | StageRole::MusicFromChords => &[Attr::Type, Attr::BarBeat],
            StageRole::Accomp => &[Attr::Type, Attr::BarBeat, Attr::Pitch, Attr::Duration],
            _ => &[],
        }
    }

    fn uses_timing(&self) -> bool {
        !matches!(self, StageRole::Chord)
    }
}

/// Per-attribute embedding widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedDims {
    pub ttype: usize,
    pub barbeat: usize,
    pub pitch: usize,
    pub duration: usize,
    pub root: usize,
    pub quality: usize,
    pub chroma: usize,
}

impl EmbedDims {
    /// Full-size widths.
    pub fn full() -> Self {
        EmbedDims {
            ttype: 32,
            barbeat: 128,
            pitch: 512,
            duration: 128,
            root: 128,
            quality: 64,
            chroma: 128,
        }
    }

    pub fn desk() -> Self {
        EmbedDims { ttype: 8, barbeat: 32, pitch: 128, duration: 32, root: 32, quality: 16, chroma: 32 }
    }

    pub fn tiny() -> Self {
        EmbedDims { ttype: 4, barbeat: 8, pitch: 16, duration: 8, root: 8, quality: 4, chroma: 8 }
    }

    fn dim(&self, attr: Attr) -> usize {
        match attr {
            Attr::Type => self.ttype,
            Attr::BarBeat => self.barbeat,
            Attr::Pitch => self.pitch,
            Attr::Duration => self.duration,
            Attr::Root => self.root,
            Attr::Quality => self.quality,
        }
    }
}

/// Everything needed to rebuild a stage model deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub role: StageRole,
    pub transformer: TransformerConfig,
    pub emb: EmbedDims,
    /// Cross-attention to the controller memory; disabled for unconditional
    /// chord models.
    pub cross_attention: bool,
    /// Timing encoding added to every decoder token (melody/accomp only).
    pub use_timing: bool,
    pub timing_dim: usize,
    /// Bar embedding table size; bar indices clamp to this.
    pub max_bars: usize,
    /// Hard cap on decoded sequence length.
    pub max_len: usize,
    /// Controller encoder depth (semantic, color, and fusion stacks).
    pub controller_layers: usize,
}

impl StageConfig {
    fn role_max_len(role: StageRole) -> usize {
        match role {
            StageRole::Chord => 2048,
            StageRole::Melody => 4096,
            _ => 8192,
        }
    }

    pub fn desk(role: StageRole) -> Self {
        StageConfig {
            role,
            transformer: TransformerConfig::desk(),
            emb: EmbedDims::desk(),
            cross_attention: role.has_controller(),
            use_timing: role.uses_timing(),
            timing_dim: 64,
            max_bars: 256,
            max_len: Self::role_max_len(role),
            controller_layers: 2,
        }
    }

    pub fn full(role: StageRole) -> Self {
        StageConfig {
            transformer: TransformerConfig::full(),
            emb: EmbedDims::full(),
            timing_dim: 256,
            ..Self::desk(role)
        }
    }

    /// Smallest usable profile for tests and docs.
    pub fn tiny(role: StageRole) -> Self {
        StageConfig {
            transformer: TransformerConfig {
                hidden: 32,
                ff: 64,
                heads: 2,
                dropout: 0.0,
                encoder_layers: 1,
                decoder_layers: 1,
                linear_attention: false,
            },
            emb: EmbedDims::tiny(),
            timing_dim: 16,
            max_bars: 64,
            max_len: 1024,
            controller_layers: 1,
            ..Self::desk(role)
        }
    }

    /// Unconditional variant: the chord decoder drops its cross-attention.
    pub fn unconditional(mut self) -> Self {
        self.cross_attention = false;
        self
    }
}

/// Fused controller output for one video.
#[derive(Debug, Clone)]
pub struct ControllerOutput {
    /// `(semantic tokens + color tokens) x hidden` fusion encoder output.
    pub style_memory: Vec<Vec<f32>>,
    pub tempo_bpm: f64,
    /// Timing encoding per bar, when motion features are in play.
    pub timing: Option<Vec<Vec<f32>>>,
}

/// Which controller features are withheld (the ablation rows).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    pub no_semantic: bool,
    pub no_color: bool,
    pub no_motion: bool,
}

impl Ablations {
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.no_semantic {
            out.push("semantic");
        }
        if self.no_color {
            out.push("color");
        }
        if self.no_motion {
            out.push("motion");
        }
        out
    }
}

struct AttrEmbeddings {
    attrs: Vec<(Attr, Embedding)>,
    chroma_proj: Option<Linear>,
    input_proj: Linear,
}

impl AttrEmbeddings {
    fn new(
        ps: &mut ParamSet<f32>,
        name: &str,
        attrs: &[Attr],
        with_chroma: bool,
        emb: &EmbedDims,
        hidden: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let attr_embs: Vec<(Attr, Embedding)> = attrs
            .iter()
            .map(|&attr| {
                let table = Embedding::new(
                    ps,
                    &format!("{name}.{}", attr.name()),
                    attr.size(),
                    emb.dim(attr),
                    rng,
                );
                (attr, table)
            })
            .collect();
        let chroma_proj =
            with_chroma.then(|| Linear::new(ps, &format!("{name}.chroma"), 12, emb.chroma, rng));
        let concat_dim: usize = attrs.iter().map(|&a| emb.dim(a)).sum::<usize>()
            + if with_chroma { emb.chroma } else { 0 };
        let input_proj = Linear::new(ps, &format!("{name}.proj"), concat_dim, hidden, rng);
        AttrEmbeddings { attrs: attr_embs, chroma_proj, input_proj }
    }

    /// Embeds a token sequence: per-attribute lookups concatenated and
    /// projected to the hidden width.
    fn forward(&self, f: &mut Fwd<'_, f32>, tokens: &[CompoundToken]) -> Id {
        let mut parts = Vec::with_capacity(self.attrs.len() + 1);
        for (attr, emb) in &self.attrs {
            let ids: Vec<usize> = tokens.iter().map(|t| attr.encode(t) as usize).collect();
            parts.push(emb.forward(f, Rc::new(ids)));
        }
        if let Some(proj) = &self.chroma_proj {
            let mut chroma = Vec::with_capacity(tokens.len() * 12);
            for t in tokens {
                chroma.extend(t.chroma().iter().map(|&b| b as f32));
            }
            let x = f.tape.leaf(tokens.len(), 12, chroma);
            parts.push(proj.forward(f, x));
        }
        let concat = f.tape.concat_cols(&parts);
        self.input_proj.forward(f, concat)
    }
}

/// Separate semantic and color encoders, a learned modality tag, and the
/// fusion encoder whose output serves as cross-attention memory.
struct Controller {
    sem_in: Linear,
    sem_enc: Encoder,
    color_in: Linear,
    color_enc: Encoder,
    modality: Embedding,
    fusion: Encoder,
}

impl Controller {
    fn new(
        ps: &mut ParamSet<f32>,
        config: &StageConfig,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let t = &config.transformer;
        let layers = config.controller_layers;
        Controller {
            sem_in: Linear::new(ps, "ctrl.sem_in", SEMANTIC_DIM, t.hidden, rng),
            sem_enc: Encoder::new(ps, "ctrl.sem_enc", layers, t, rng),
            color_in: Linear::new(ps, "ctrl.color_in", COLOR_DIM, t.hidden, rng),
            color_enc: Encoder::new(ps, "ctrl.color_enc", layers, t, rng),
            modality: Embedding::new(ps, "ctrl.modality", 2, t.hidden, rng),
            fusion: Encoder::new(ps, "ctrl.fusion", layers, t, rng),
        }
    }

    fn fuse(
        &self,
        f: &mut Fwd<'_, f32>,
        bundle: &FeatureBundle,
        ablations: Ablations,
    ) -> Result<Id, PipelineError> {
        let hidden = f.tape.cols(f.p(self.sem_in.b)).max(1);
        let mut branches = Vec::new();
        let mut tags: Vec<usize> = Vec::new();

        if !ablations.no_semantic && !bundle.semantic.is_empty() {
            let rows = bundle.semantic.len();
            let data: Vec<f32> = bundle.semantic.iter().flatten().copied().collect();
            let x = f.tape.leaf(rows, SEMANTIC_DIM, data);
            let x = self.sem_in.forward(f, x);
            let pe = f.tape.leaf(rows, hidden, sinusoidal_encoding(rows, hidden));
            let x = f.tape.add(x, pe);
            branches.push(self.sem_enc.forward(f, x)?);
            tags.extend(std::iter::repeat_n(0usize, rows));
        }
        if !ablations.no_color && !bundle.color.is_empty() {
            let rows = bundle.color.len();
            let data: Vec<f32> = bundle.color.iter().flatten().copied().collect();
            let x = f.tape.leaf(rows, COLOR_DIM, data);
            let x = self.color_in.forward(f, x);
            let pe = f.tape.leaf(rows, hidden, sinusoidal_encoding(rows, hidden));
            let x = f.tape.add(x, pe);
            branches.push(self.color_enc.forward(f, x)?);
            tags.extend(std::iter::repeat_n(1usize, rows));
        }
        if branches.is_empty() {
            return Err(PipelineError::EmptyController);
        }
        let concat =
            if branches.len() == 1 { branches[0] } else { f.tape.concat_rows(&branches) };
        let tag_rows = self.modality.forward(f, Rc::new(tags));
        let tagged = f.tape.add(concat, tag_rows);
        Ok(self.fusion.forward(f, tagged)?)
    }
}

struct StageArch {
    dec_embed: AttrEmbeddings,
    bar_emb: Embedding,
    beat_emb: Embedding,
    tempo_emb: Embedding,
    timing_proj: Option<Linear>,
    decoder: Decoder,
    heads: Vec<(Attr, Linear)>,
    encoder: Option<(AttrEmbeddings, Encoder)>,
    controller: Option<Controller>,
}

/// The condition a stage decodes under.
pub enum Condition<'a> {
    None,
    /// Raw controller inputs; the controller runs inside the graph.
    Bundle(&'a FeatureBundle, Ablations),
    /// Precomputed memory rows (e.g. a frozen controller output).
    Memory(&'a [Vec<f32>]),
    /// Precomputed memory rows carrying bar indices; cross-attention runs
    /// under the bar-level mask.
    MemoryWithBars(&'a [Vec<f32>], &'a [u32]),
    /// Encoder token sequence plus the bar-level mask.
    Tokens(&'a [CompoundToken]),
}

/// Parameters and architecture of one transformer stage.
pub struct StageModel {
    pub config: StageConfig,
    pub vocab: StageVocab,
    pub params: ParamSet<f32>,
    arch: StageArch,
}

/// Number of tempo bins: one per BPM over [90, 130] plus an out-of-range bin.
const TEMPO_BINS: usize = 42;

fn tempo_bin(bpm: f64) -> usize {
    let rounded = bpm.round();
    if (90.0..=130.0).contains(&rounded) {
        (rounded - 90.0) as usize
    } else {
        TEMPO_BINS - 1
    }
}

impl StageModel {
    /// Builds a freshly initialized model; the same seed always yields the
    /// same parameters.
    pub fn new(config: StageConfig, seed: u64) -> Self {
        let mut rng = crate::toy::rng(seed);
        let mut ps: ParamSet<f32> = ParamSet::new();
        let vocab = StageVocab::for_stage(config.role.decoder_stage());
        let t = &config.transformer;

        let dec_embed =
            AttrEmbeddings::new(&mut ps, "dec", &vocab.attrs, false, &config.emb, t.hidden, &mut rng);
        let bar_emb = Embedding::new(&mut ps, "pos.bar", config.max_bars, t.hidden, &mut rng);
        let beat_emb = Embedding::new(&mut ps, "pos.beat", 4, t.hidden, &mut rng);
        let tempo_emb = Embedding::new(&mut ps, "pos.tempo", TEMPO_BINS, t.hidden, &mut rng);
        let timing_proj = (config.use_timing && config.role.uses_timing())
            .then(|| Linear::new(&mut ps, "pos.timing", config.timing_dim, t.hidden, &mut rng));

        let encoder = config.role.has_token_encoder().then(|| {
            let embed = AttrEmbeddings::new(
                &mut ps,
                "enc",
                config.role.encoder_attrs(),
                true,
                &config.emb,
                t.hidden,
                &mut rng,
            );
            let stack = Encoder::new(&mut ps, "encoder", t.encoder_layers, t, &mut rng);
            (embed, stack)
        });
        let controller = (config.role.has_controller() && config.cross_attention)
            .then(|| Controller::new(&mut ps, &config, &mut rng));

        let with_cross = encoder.is_some() || controller.is_some();
        let decoder = Decoder::new(&mut ps, "decoder", t.decoder_layers, t, with_cross, &mut rng);
        let heads = vocab
            .attrs
            .iter()
            .map(|&attr| {
                let head = Linear::new(
                    &mut ps,
                    &format!("head.{}", attr.name()),
                    t.hidden,
                    attr.size(),
                    &mut rng,
                );
                (attr, head)
            })
            .collect();

        StageModel {
            arch: StageArch {
                dec_embed,
                bar_emb,
                beat_emb,
                tempo_emb,
                timing_proj,
                decoder,
                heads,
                encoder,
                controller,
            },
            config,
            vocab,
            params: ps,
        }
    }

    /// Full decoder input embedding: attribute stack projection plus
    /// positional, bar, beat, tempo, and timing terms.
    fn embed_decoder(
        &self,
        f: &mut Fwd<'_, f32>,
        tokens: &[CompoundToken],
        tempo_bpm: f64,
        total_bars: u32,
        timing_on: bool,
    ) -> Id {
        let hidden = self.config.transformer.hidden;
        let n = tokens.len();
        let mut x = self.arch.dec_embed.forward(f, tokens);
        let pe = f.tape.leaf(n, hidden, sinusoidal_encoding(n, hidden));
        x = f.tape.add(x, pe);

        let bar_ids: Vec<usize> =
            tokens.iter().map(|t| (t.bar_index as usize).min(self.config.max_bars - 1)).collect();
        let bars = self.arch.bar_emb.forward(f, Rc::new(bar_ids));
        x = f.tape.add(x, bars);
        let beat_ids: Vec<usize> = tokens.iter().map(|t| (t.beat_index as usize).min(3)).collect();
        let beats = self.arch.beat_emb.forward(f, Rc::new(beat_ids));
        x = f.tape.add(x, beats);
        let tempo = self.arch.tempo_emb.forward(f, Rc::new(vec![tempo_bin(tempo_bpm); n]));
        x = f.tape.add(x, tempo);

        if let (Some(proj), true) = (&self.arch.timing_proj, timing_on) {
            let total = total_bars.max(1);
            let mut rows = Vec::with_capacity(n * self.config.timing_dim);
            for t in tokens {
                let bar = t.bar_index.min(total - 1);
                rows.extend(
                    crate::video::timing_encoding(bar, total, self.config.timing_dim)
                        .expect("bar clamped into range"),
                );
            }
            let enc = f.tape.leaf(n, self.config.timing_dim, rows);
            let enc = proj.forward(f, enc);
            x = f.tape.add(x, enc);
        }
        x
    }

    /// Embeds and encodes a condition token sequence.
    fn encode_condition(
        &self,
        f: &mut Fwd<'_, f32>,
        tokens: &[CompoundToken],
    ) -> Result<Id, PipelineError> {
        let (embed, stack) = self.arch.encoder.as_ref().expect("role has a token encoder");
        let hidden = self.config.transformer.hidden;
        let mut x = embed.forward(f, tokens);
        let pe = f.tape.leaf(tokens.len(), hidden, sinusoidal_encoding(tokens.len(), hidden));
        x = f.tape.add(x, pe);
        let bar_ids: Vec<usize> =
            tokens.iter().map(|t| (t.bar_index as usize).min(self.config.max_bars - 1)).collect();
        let bars = self.arch.bar_emb.forward(f, Rc::new(bar_ids));
        x = f.tape.add(x, bars);
        let beat_ids: Vec<usize> = tokens.iter().map(|t| (t.beat_index as usize).min(3)).collect();
        let beats = self.arch.beat_emb.forward(f, Rc::new(beat_ids));
        x = f.tape.add(x, beats);
        Ok(stack.forward(f, x)?)
    }

    /// Runs the decoder over `tokens` under `condition`, returning one logit
    /// matrix id per attribute head.
    ///
    /// `timing` gates the timing encoding (the motion ablation turns it off);
    /// it is a no-op for roles without a timing projection.
    pub fn forward(
        &self,
        f: &mut Fwd<'_, f32>,
        tokens: &[CompoundToken],
        condition: &Condition<'_>,
        tempo_bpm: f64,
        total_bars: u32,
        timing: bool,
    ) -> Result<Vec<(Attr, Id)>, PipelineError> {
        let timing_on = timing && !matches!(condition, Condition::Bundle(_, a) if a.no_motion);
        let x = self.embed_decoder(f, tokens, tempo_bpm, total_bars, timing_on);

        let memory: Option<(Id, Rc<BoolMat>)> = match condition {
            Condition::None => None,
            Condition::Bundle(bundle, ablations) => {
                let ctrl = self
                    .arch
                    .controller
                    .as_ref()
                    .ok_or(PipelineError::MissingStage("controller"))?;
                let mem = ctrl.fuse(f, bundle, *ablations)?;
                let mask = Rc::new(BoolMat::full(tokens.len(), f.tape.rows(mem)));
                Some((mem, mask))
            }
            Condition::Memory(rows) => {
                let data: Vec<f32> = rows.iter().flatten().copied().collect();
                let cols = rows.first().map_or(1, Vec::len);
                let mem = f.tape.leaf(rows.len(), cols, data);
                let mask = Rc::new(BoolMat::full(tokens.len(), rows.len()));
                Some((mem, mask))
            }
            Condition::MemoryWithBars(rows, bars) => {
                let data: Vec<f32> = rows.iter().flatten().copied().collect();
                let cols = rows.first().map_or(1, Vec::len);
                let mem = f.tape.leaf(rows.len(), cols, data);
                let dec_bars: Vec<u32> = tokens.iter().map(|t| t.bar_index).collect();
                let mask = Rc::new(bar_cross_mask(&dec_bars, bars));
                Some((mem, mask))
            }
            Condition::Tokens(cond_tokens) => {
                let mem = self.encode_condition(f, cond_tokens)?;
                let dec_bars: Vec<u32> = tokens.iter().map(|t| t.bar_index).collect();
                let enc_bars: Vec<u32> = cond_tokens.iter().map(|t| t.bar_index).collect();
                let mask = Rc::new(bar_cross_mask(&dec_bars, &enc_bars));
                Some((mem, mask))
            }
        };

        let h = self.arch.decoder.forward(f, x, memory.as_ref().map(|(m, k)| (*m, k)))?;
        Ok(self.arch.heads.iter().map(|(attr, head)| (*attr, head.forward(f, h))).collect())
    }

    /// Serializes config and parameters into a checkpoint file.
    pub fn save(&self, path: impl AsRef<std::path::Path>, step: u64) -> Result<(), PipelineError> {
        let header = serde_json::json!({
            "kind": "stage",
            "role": self.config.role.name(),
            "config": self.config,
            "vocab_hash": self.vocab_hash(),
            "step": step,
        });
        crate::nn::checkpoint::save_checkpoint(path, &header, &self.params.to_tensors())
            .map_err(PipelineError::from)
    }

    /// Rebuilds a model from a checkpoint written by [`StageModel::save`].
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<StageModel, PipelineError> {
        let (header, tensors) = checkpoint::load_checkpoint(path)?;
        let config: StageConfig = serde_json::from_value(
            header
                .get("config")
                .ok_or_else(|| PipelineError::Checkpoint("missing config".into()))?
                .clone(),
        )?;
        let mut model = StageModel::new(config, 0);
        let expect_hash = header.get("vocab_hash").and_then(|v| v.as_str());
        if expect_hash.is_some_and(|h| h != model.vocab_hash()) {
            return Err(PipelineError::Checkpoint("vocabulary hash mismatch".into()));
        }
        model.params.load_tensors(&tensors)?;
        Ok(model)
    }

    /// SHA-256 of the vocabulary sidecar, pinned into checkpoints.
    pub fn vocab_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let sidecar = crate::tokenize::Sidecar::for_vocab(&self.vocab);
        let json = serde_json::to_string(&sidecar).expect("sidecar serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Runs only the controller, returning the fused memory.
    pub fn controller_output(
        &self,
        bundle: &FeatureBundle,
        ablations: Ablations,
    ) -> Result<ControllerOutput, PipelineError> {
        let ctrl =
            self.arch.controller.as_ref().ok_or(PipelineError::MissingStage("controller"))?;
        let mut tape: Tape<f32> = Tape::new();
        let ids = self.params.inject(&mut tape);
        let mut rng = crate::toy::rng(0);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
        let mem = ctrl.fuse(&mut f, bundle, ablations)?;
        let cols = tape.cols(mem);
        let style_memory =
            tape.data(mem).chunks(cols).map(<[f32]>::to_vec).collect::<Vec<_>>();

        let tempo_bpm = if ablations.no_motion { 110.0 } else { bundle.tempo_bpm };
        let timing = (!ablations.no_motion).then(|| {
            let total = bundle.n_bars().max(1);
            (0..total)
                .map(|bar| {
                    crate::video::timing_encoding(bar, total, self.config.timing_dim)
                        .expect("bar in range")
                })
                .collect()
        });
        Ok(ControllerOutput { style_memory, tempo_bpm, timing })
    }
}

/// Fuses a feature bundle through a chord-stage controller.
///
/// Free-function form of [`StageModel::controller_output`] matching the
/// pipeline surface; the model must own a controller.
pub fn fuse_controller(
    model: &StageModel,
    bundle: &FeatureBundle,
    ablations: Ablations,
) -> Result<ControllerOutput, PipelineError> {
    model.controller_output(bundle, ablations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::encode_chord_stage;

    fn toy_bundle() -> FeatureBundle {
        crate::toy::feature_bundle(1, 10, 8)
    }

    #[test]
    fn style_memory_rows_equal_semantic_plus_color_tokens() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let out = model.controller_output(&toy_bundle(), Ablations::default()).unwrap();
        assert_eq!(out.style_memory.len(), 18);
        assert!(out.style_memory.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn color_ablation_keeps_only_semantic_rows() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let ablations = Ablations { no_color: true, ..Default::default() };
        let out = model.controller_output(&toy_bundle(), ablations).unwrap();
        assert_eq!(out.style_memory.len(), 10);
    }

    #[test]
    fn motion_ablation_fixes_tempo_and_drops_timing() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let ablations = Ablations { no_motion: true, ..Default::default() };
        let out = model.controller_output(&toy_bundle(), ablations).unwrap();
        assert_eq!(out.tempo_bpm, 110.0);
        assert!(out.timing.is_none());
    }

    #[test]
    fn ablating_everything_is_an_error() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let ablations = Ablations { no_semantic: true, no_color: true, no_motion: false };
        assert!(matches!(
            model.controller_output(&toy_bundle(), ablations),
            Err(PipelineError::EmptyController)
        ));
    }

    #[test]
    fn permuting_color_rows_changes_the_memory() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let bundle = toy_bundle();
        let mut permuted = bundle.clone();
        permuted.color.reverse();
        let a = model.controller_output(&bundle, Ablations::default()).unwrap();
        let b = model.controller_output(&permuted, Ablations::default()).unwrap();
        assert_ne!(a.style_memory, b.style_memory);
    }

    #[test]
    fn forward_emits_one_logit_row_per_token() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Chord), 3);
        let chords = crate::tokenize::pad_chords(&[], 2);
        let tokens = encode_chord_stage(&chords, 2).unwrap();
        let bundle = toy_bundle();

        let mut tape: Tape<f32> = Tape::new();
        let ids = model.params.inject(&mut tape);
        let mut rng = crate::toy::rng(7);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
        let heads = model
            .forward(&mut f, &tokens, &Condition::Bundle(&bundle, Ablations::default()), 110.0, 2, true)
            .unwrap();
        assert_eq!(heads.len(), 4);
        for (attr, id) in heads {
            assert_eq!(tape.rows(id), tokens.len());
            assert_eq!(tape.cols(id), attr.size());
        }
    }

    #[test]
    fn timing_flag_gates_the_timing_encoding() {
        let model = StageModel::new(StageConfig::tiny(StageRole::Melody), 6);
        let score = crate::toy::tonal_piece(1, 2);
        let piece = crate::pipeline::TokenizedPiece::from_score("p", &score, None).unwrap();
        let cond = piece.condition_tokens(StageRole::Melody).unwrap().unwrap();
        let run = |timing: bool| -> Vec<f32> {
            let mut tape: Tape<f32> = Tape::new();
            let ids = model.params.inject(&mut tape);
            let mut rng = crate::toy::rng(0);
            let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
            let heads = model
                .forward(&mut f, &piece.melody_tokens, &Condition::Tokens(&cond), 110.0, 2, timing)
                .unwrap();
            tape.data(heads[0].1).to_vec()
        };
        // Melody models carry a timing projection, so the flag must matter.
        assert_ne!(run(true), run(false));

        // The chord stage has no timing projection; the flag is a no-op.
        let chord = StageModel::new(StageConfig::tiny(StageRole::Chord).unconditional(), 6);
        let chord_tokens = crate::tokenize::encode_chord_stage(&piece.chords, piece.n_bars).unwrap();
        let run_chord = |timing: bool| -> Vec<f32> {
            let mut tape: Tape<f32> = Tape::new();
            let ids = chord.params.inject(&mut tape);
            let mut rng = crate::toy::rng(0);
            let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
            let heads = chord
                .forward(&mut f, &chord_tokens, &Condition::None, 110.0, 2, timing)
                .unwrap();
            tape.data(heads[0].1).to_vec()
        };
        assert_eq!(run_chord(true), run_chord(false));
    }

    #[test]
    fn checkpoint_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stage.ckpt");
        let model = StageModel::new(StageConfig::tiny(StageRole::Melody), 11);
        model.save(&path, 5).unwrap();
        let loaded = StageModel::load(&path).unwrap();
        assert_eq!(model.config, loaded.config);
        for (a, b) in model.params.iter().zip(loaded.params.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn tempo_bins_cover_the_range_and_overflow() {
        assert_eq!(tempo_bin(90.0), 0);
        assert_eq!(tempo_bin(130.0), 40);
        assert_eq!(tempo_bin(110.4), 20);
        assert_eq!(tempo_bin(80.0), 41);
        assert_eq!(tempo_bin(400.0), 41);
    }
}
