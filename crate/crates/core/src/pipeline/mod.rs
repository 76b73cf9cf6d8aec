//! The three-stage conditional generation pipeline.
//!
//! A [`StageModel`] wraps one transformer stage: the chord stage decodes a
//! chord progression with cross-attention to the fused video features, the
//! melody stage decodes notes conditioned on chords, and the accompaniment
//! stage decodes notes conditioned on chords plus melody. Two ablation
//! variants collapse the stack: a single decoder straight from video
//! features, and a chord-conditioned single music stage.

mod dataset;
mod generate;
mod model;
mod train;

pub use dataset::{StageDataset, TokenizedPiece};
pub use generate::{generate, generate_unconditional, GenMode, GenOutput, GenRequest, GeneratorModels};
pub use model::{
    fuse_controller, Ablations, Condition, ControllerOutput, EmbedDims, StageConfig, StageModel,
    StageRole,
};
pub use train::{teacher_forced_accuracy, train_stage, TrainConfig, TrainReport};

use thiserror::Error;

use crate::annotate::AnnotateError;
use crate::nn::NnError;
use crate::tokenize::TokenizeError;
use crate::video::VideoError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("controller received no semantic and no color features")]
    EmptyController,
    #[error("generation mode requires the {0} model")]
    MissingStage(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
