//! Controller features computed from video: log-chroma color histograms,
//! the RGB-difference motion statistic with its tempo mapping, semantic
//! feature ingestion, and timing encodings.
//!
//! Video *decoding* is out of scope. Decoded frames arrive in the raw `VMFR`
//! container and pretrained semantic features in `VMFT` tensors.

mod color;

pub use color::color_histogram;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::vmft::{self, VmftError};

/// Width of one semantic feature token.
pub const SEMANTIC_DIM: usize = 512;
/// Width of one color histogram row (3 projections of 32x32 bins).
pub const COLOR_DIM: usize = 3072;
/// Default timing encoding width.
pub const TIMING_DIM: usize = 256;
/// Tempo range endpoints in BPM.
pub const TEMPO_LO: f64 = 90.0;
pub const TEMPO_HI: f64 = 130.0;
/// Semantic tokens are taken at one per second, capped at this many.
pub const MAX_SEMANTIC_TOKENS: usize = 180;

pub const VMFR_MAGIC: &[u8; 4] = b"VMFR";

#[derive(Debug, Error)]
pub enum VideoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Tensor(#[from] VmftError),
    #[error("not a VMFR file (bad magic)")]
    BadMagic,
    #[error("frame data length {found} does not match {width}x{height} RGB24")]
    FrameSize { width: u32, height: u32, found: usize },
    #[error("need at least {need} frames for motion, have {have}")]
    TooFewFrames { need: usize, have: usize },
    #[error("semantic features: expected {expected}, found {found}")]
    SemanticShape { expected: String, found: String },
    #[error("bar index {bar} out of range for {total} bars")]
    BarOutOfRange { bar: u32, total: u32 },
    #[error("timing encoding dimension {0} must be even and positive")]
    BadTimingDim(usize),
}

/// Decoded RGB24 frames with constant dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    /// Packed RGB24, `width * height * 3` bytes per frame.
    pub frames: Vec<Vec<u8>>,
}

/// Borrowed view of a single frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub width: u32,
    pub height: u32,
    pub rgb: &'a [u8],
}

impl FrameSequence {
    pub fn frame(&self, index: usize) -> FrameRef<'_> {
        FrameRef { width: self.width, height: self.height, rgb: &self.frames[index] }
    }

    pub fn duration_sec(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    fn check(&self) -> Result<(), VideoError> {
        let expect = (self.width * self.height * 3) as usize;
        for f in &self.frames {
            if f.len() != expect {
                return Err(VideoError::FrameSize {
                    width: self.width,
                    height: self.height,
                    found: f.len(),
                });
            }
        }
        Ok(())
    }
}

/// Everything the controller needs for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    /// Semantic feature tokens, `T_s x 512`.
    pub semantic: Vec<Vec<f32>>,
    /// Per-frame color histograms, `T_c x 3072`; each row sums to 1.
    pub color: Vec<Vec<f32>>,
    pub motion_mean: f64,
    pub tempo_bpm: f64,
    pub duration_sec: f64,
}

impl FeatureBundle {
    /// Bars needed to cover the video at the bundle's tempo, one per four beats.
    pub fn n_bars(&self) -> u32 {
        let bars = self.duration_sec * self.tempo_bpm / 60.0 / 4.0;
        (bars.ceil() as u32).max(1)
    }
}

/// Writes a frame sequence in the raw `VMFR` container: magic, width `u32`,
/// height `u32`, fps `f32`, frame count `u32` (little-endian), then packed
/// RGB24 frames.
pub fn write_frames(w: &mut impl Write, frames: &FrameSequence) -> Result<(), VideoError> {
    frames.check()?;
    w.write_all(VMFR_MAGIC)?;
    w.write_all(&frames.width.to_le_bytes())?;
    w.write_all(&frames.height.to_le_bytes())?;
    w.write_all(&(frames.fps as f32).to_le_bytes())?;
    w.write_all(&(frames.frames.len() as u32).to_le_bytes())?;
    for f in &frames.frames {
        w.write_all(f)?;
    }
    Ok(())
}

pub fn read_frames(r: &mut impl Read) -> Result<FrameSequence, VideoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != VMFR_MAGIC {
        return Err(VideoError::BadMagic);
    }
    let mut four = [0u8; 4];
    r.read_exact(&mut four)?;
    let width = u32::from_le_bytes(four);
    r.read_exact(&mut four)?;
    let height = u32::from_le_bytes(four);
    r.read_exact(&mut four)?;
    let fps = f32::from_le_bytes(four) as f64;
    r.read_exact(&mut four)?;
    let count = u32::from_le_bytes(four);
    let frame_len = (width * height * 3) as usize;
    let mut frames = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut buf = vec![0u8; frame_len];
        r.read_exact(&mut buf)?;
        frames.push(buf);
    }
    Ok(FrameSequence { width, height, fps, frames })
}

pub fn save_frames(path: impl AsRef<Path>, frames: &FrameSequence) -> Result<(), VideoError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_frames(&mut w, frames)?;
    w.flush()?;
    Ok(())
}

pub fn load_frames(path: impl AsRef<Path>) -> Result<FrameSequence, VideoError> {
    read_frames(&mut BufReader::new(File::open(path)?))
}

/// How motion maps to tempo. Corpus-level min/max normally come from config;
/// when absent, the per-video extremes of the pairwise differences are used.
#[derive(Debug, Clone, Copy)]
pub struct TempoMap {
    pub lo: f64,
    pub hi: f64,
    pub m_min: Option<f64>,
    pub m_max: Option<f64>,
}

impl Default for TempoMap {
    fn default() -> Self {
        TempoMap { lo: TEMPO_LO, hi: TEMPO_HI, m_min: None, m_max: None }
    }
}

/// Mean absolute per-pixel RGB difference over frame pairs 0.2 seconds apart,
/// and the tempo it maps to.
///
/// Differences are measured on channels normalized to `[0, 1]`. The tempo is
/// the linear map of the mean onto `[lo, hi]`, clamped; a degenerate range
/// yields the midpoint.
pub fn motion_tempo(frames: &FrameSequence, map: &TempoMap) -> Result<(f64, f64), VideoError> {
    frames.check()?;
    let interval = ((0.2 * frames.fps).round() as usize).max(1);
    let need = (interval + 1).max(6);
    if frames.frames.len() < need {
        return Err(VideoError::TooFewFrames { need, have: frames.frames.len() });
    }

    let mut diffs = Vec::with_capacity(frames.frames.len() - interval);
    for t in 0..frames.frames.len() - interval {
        let a = &frames.frames[t];
        let b = &frames.frames[t + interval];
        let total: f64 =
            a.iter().zip(b).map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs() as f64).sum();
        diffs.push(total / (a.len() as f64 * 255.0));
    }
    let motion = diffs.iter().sum::<f64>() / diffs.len() as f64;

    let m_min = map.m_min.unwrap_or_else(|| diffs.iter().cloned().fold(f64::INFINITY, f64::min));
    let m_max =
        map.m_max.unwrap_or_else(|| diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));

    let tempo = if m_max <= m_min {
        (map.lo + map.hi) / 2.0
    } else {
        let t = map.lo + (motion - m_min) / (m_max - m_min) * (map.hi - map.lo);
        t.clamp(map.lo, map.hi)
    };
    Ok((motion, tempo))
}

/// Loads a semantic feature matrix from a `VMFT` file and validates its shape
/// (rank 2, width 512) and finiteness.
pub fn ingest_semantic(path: impl AsRef<Path>) -> Result<Vec<Vec<f32>>, VideoError> {
    let tensor = vmft::load_tensor(path)?;
    if tensor.dims.len() != 2 || tensor.dims[1] as usize != SEMANTIC_DIM {
        return Err(VideoError::SemanticShape {
            expected: format!("(T, {SEMANTIC_DIM})"),
            found: format!("{:?}", tensor.dims),
        });
    }
    if !tensor.is_finite() {
        return Err(VideoError::Tensor(VmftError::NotFinite));
    }
    Ok(tensor.to_rows())
}

/// Sinusoidal encoding of the normalized bar position `bar_index/total_bars`:
/// component `2i` is `sin(p / 10000^(2i/dim))`, component `2i+1` the cosine.
pub fn timing_encoding(bar_index: u32, total_bars: u32, dim: usize) -> Result<Vec<f32>, VideoError> {
    if bar_index >= total_bars {
        return Err(VideoError::BarOutOfRange { bar: bar_index, total: total_bars });
    }
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(VideoError::BadTimingDim(dim));
    }
    let p = bar_index as f64 / total_bars as f64;
    let mut enc = vec![0.0f32; dim];
    for i in 0..dim / 2 {
        let freq = 1.0 / 10000f64.powf(2.0 * i as f64 / dim as f64);
        enc[2 * i] = (p * freq).sin() as f32;
        enc[2 * i + 1] = (p * freq).cos() as f32;
    }
    Ok(enc)
}
