//! Minimal dense-tensor engine and transformer building blocks.
//!
//! Everything is CPU-only and 2D; models are small enough that clarity wins
//! over throughput. The engine is generic over the float type: training runs
//! in `f32`, gradient checks in `f64`.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod params;
pub mod sample;
pub mod tape;

pub use gradcheck::grad_check;
pub use loss::{multihead_ce_loss, CeHead};
pub use layers::{
    sinusoidal_encoding, AttnKernel, Decoder, DecoderLayer, Embedding, Encoder, EncoderLayer,
    FeedForward, Fwd, LayerNorm, Linear, Mha,
};
pub use params::{Adam, PIdx, Param, ParamSet};
pub use sample::{sample_categorical, sample_token, SamplingParams};
pub use tape::{bar_cross_mask, BoolMat, Id, Tape};

use std::io;

use thiserror::Error;

/// Float scalar usable by the tape.
pub trait Real:
    num_traits::Float + num_traits::NumAssign + std::iter::Sum + std::fmt::Debug + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("attention row {row} has no allowed keys")]
    FullyMaskedRow { row: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Tensor(#[from] crate::vmft::VmftError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Transformer dimensions shared by every stage.
///
/// `hidden` must be divisible by `heads`. The activation is GELU throughout.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransformerConfig {
    pub hidden: usize,
    pub ff: usize,
    pub heads: usize,
    pub dropout: f64,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    /// Use the kernelized (elu(x)+1) attention form instead of softmax.
    #[serde(default)]
    pub linear_attention: bool,
}

impl TransformerConfig {
    /// Full-size profile: hidden 512, feed-forward 2048, 8 heads, dropout 0.1.
    pub fn full() -> Self {
        TransformerConfig {
            hidden: 512,
            ff: 2048,
            heads: 8,
            dropout: 0.1,
            encoder_layers: 4,
            decoder_layers: 4,
            linear_attention: false,
        }
    }

    /// Desk-scale profile for CPU experiments and tests.
    pub fn desk() -> Self {
        TransformerConfig {
            hidden: 128,
            ff: 512,
            heads: 4,
            dropout: 0.1,
            encoder_layers: 2,
            decoder_layers: 2,
            linear_attention: false,
        }
    }

    /// Tiny profile for unit tests and gradient checks.
    pub fn tiny() -> Self {
        TransformerConfig {
            hidden: 16,
            ff: 32,
            heads: 2,
            dropout: 0.0,
            encoder_layers: 1,
            decoder_layers: 1,
            linear_attention: false,
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.hidden == 0 || self.heads == 0 || !self.hidden.is_multiple_of(self.heads) {
            return Err(NnError::Shape(format!(
                "hidden {} must be a positive multiple of heads {}",
                self.hidden, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::Shape(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}
