//! Video-conditioned symbolic music generation.
//!
//! This crate implements a complete desk-scale pipeline for generating piano
//! background music from video features:
//!
//! * [`midi`] — Standard MIDI File parsing, writing, and grid quantization.
//! * [`annotate`] — melody/accompaniment split, per-beat chord extraction,
//!   tonality detection, and key normalization.
//! * [`tokenize`] — the compound event-token codec consumed by the generator
//!   stages, plus the `VMTK` token cache format.
//! * [`video`] — controller features: log-chroma color histograms, motion
//!   statistics mapped to tempo, semantic feature ingestion, timing encodings.
//! * [`nn`] — a small dense-tensor engine with reverse-mode differentiation
//!   and the transformer blocks used by every model in the crate.
//! * [`pipeline`] — the three-stage (chord → melody → accompaniment)
//!   conditional generator, its training loop, and ablation variants.
//! * [`metrics`] — objective music-quality metrics and the retrieval-based
//!   video-music correspondence metric.
//! * [`vmft`] — the `VMFT` tensor file format shared by features,
//!   checkpoints, and similarity matrices.
//! * [`toy`] — deterministic synthetic corpora used by tests, docs, and the
//!   examples in the book.
//!
//! The guide in `book/` walks through every subsystem with runnable
//! examples; its code blocks are compiled as doc-tests of this crate.

pub mod annotate;
pub mod metrics;
pub mod midi;
pub mod nn;
pub mod pipeline;
pub mod tokenize;
pub mod toy;
pub mod video;
pub mod vmft;

#[cfg(doctest)]
mod book {
    //! Compiles every code block in the book as a doc-test so the guide can
    //! never drift from the library.

    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(scores_and_midi, "../../../book/src/scores-and-midi.md");
    chapter!(annotations, "../../../book/src/annotations.md");
    chapter!(compound_tokens, "../../../book/src/compound-tokens.md");
    chapter!(video_features, "../../../book/src/video-features.md");
    chapter!(tensor_engine, "../../../book/src/tensor-engine.md");
    chapter!(generation, "../../../book/src/generation.md");
    chapter!(evaluation, "../../../book/src/evaluation.md");
    chapter!(cli, "../../../book/src/cli.md");
}
