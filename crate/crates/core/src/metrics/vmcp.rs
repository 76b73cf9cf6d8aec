//! Dual-encoder retrieval: InfoNCE training and precision@K evaluation.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::layers::{sinusoidal_encoding, Encoder, Fwd, Linear};
use crate::nn::params::{PIdx, ParamSet};
use crate::nn::tape::{Id, Tape};
use crate::nn::{checkpoint, Adam, TransformerConfig};

use super::MetricsError;

/// Per-piece segment embeddings of both sides, unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbeddings {
    pub video: Vec<Vec<f32>>,
    pub music: Vec<Vec<f32>>,
}

/// Anything that can embed both sides of a pair into the joint space.
pub trait VideoMusicEmbedder {
    fn embed_video(&self, segments: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f32>>, MetricsError>;
    fn embed_music(&self, segments: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f32>>, MetricsError>;
}

/// Embeds a (video, music) pair segment by segment.
pub fn embed_pair<E: VideoMusicEmbedder>(
    video_segments: &[Vec<Vec<f32>>],
    music_segments: &[Vec<Vec<f32>>],
    embedder: &E,
) -> Result<SegmentEmbeddings, MetricsError> {
    if video_segments.len() != music_segments.len() {
        return Err(MetricsError::SegmentMismatch {
            video: video_segments.len(),
            music: music_segments.len(),
        });
    }
    Ok(SegmentEmbeddings {
        video: embedder.embed_video(video_segments)?,
        music: embedder.embed_music(music_segments)?,
    })
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Symmetric InfoNCE over a batch of paired segment embeddings.
///
/// Each direction averages `-log softmax(sim/tau)` of the positive over all
/// `N*L` candidates; the two directions are then averaged. With all
/// similarities equal the loss is exactly `ln(N*L)`.
pub fn infonce_loss(batch: &[SegmentEmbeddings], tau: f64) -> Result<f64, MetricsError> {
    let pairs: Vec<(&Vec<f32>, &Vec<f32>)> = batch
        .iter()
        .flat_map(|e| e.video.iter().zip(e.music.iter()))
        .collect();
    let nl = pairs.len();
    if nl < 2 {
        return Err(MetricsError::TooFew { need: 2, have: nl });
    }

    let mut sim = vec![0.0f64; nl * nl];
    for (i, (v, _)) in pairs.iter().enumerate() {
        for (j, (_, m)) in pairs.iter().enumerate() {
            sim[i * nl + j] = cosine(v, m) / tau;
        }
    }

    let direction = |row_major: bool| -> f64 {
        let mut total = 0.0;
        for i in 0..nl {
            let logits: Vec<f64> = (0..nl)
                .map(|j| if row_major { sim[i * nl + j] } else { sim[j * nl + i] })
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
            total -= logits[i] - lse;
        }
        total / nl as f64
    };
    Ok((direction(true) + direction(false)) / 2.0)
}

/// Retrieval outcome: precision at each K, the mean rank of the ground
/// truth, and the full piece-by-candidate similarity matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub p_at: BTreeMap<usize, f64>,
    pub average_rank: f64,
    pub similarity: Vec<Vec<f64>>,
}

/// Ranks pooled piece embeddings against a pool of candidate videos.
///
/// `truth[i]` is the index of piece `i`'s ground-truth video among the `M`
/// candidates. Ties rank lower candidate indices first, so results are
/// deterministic.
pub fn vmcp_eval_pooled(
    music: &[Vec<f32>],
    videos: &[Vec<f32>],
    truth: &[usize],
    ks: &[usize],
) -> Result<RetrievalReport, MetricsError> {
    let m = videos.len();
    for &k in ks {
        if k > m || k == 0 {
            return Err(MetricsError::BadK { k, m });
        }
    }
    for &t in truth {
        if t >= m {
            return Err(MetricsError::TruthOutOfRange { index: t, m });
        }
    }
    if music.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    assert_eq!(music.len(), truth.len(), "one truth index per piece");

    let mut similarity = Vec::with_capacity(music.len());
    let mut ranks = Vec::with_capacity(music.len());
    for (piece, &t) in music.iter().zip(truth) {
        let sims: Vec<f64> = videos.iter().map(|v| cosine(piece, v)).collect();
        let mut rank = 1usize;
        for (j, &s) in sims.iter().enumerate() {
            if s > sims[t] || (s == sims[t] && j < t) {
                rank += 1;
            }
        }
        ranks.push(rank);
        similarity.push(sims);
    }

    let n = ranks.len() as f64;
    let p_at = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    let average_rank = ranks.iter().sum::<usize>() as f64 / n;
    Ok(RetrievalReport { p_at, average_rank, similarity })
}

/// Full evaluation: embeds every piece and candidate, mean-pools the segment
/// embeddings, and ranks by cosine similarity.
pub fn vmcp_eval<E: VideoMusicEmbedder>(
    music_segments: &[Vec<Vec<Vec<f32>>>],
    video_segments: &[Vec<Vec<Vec<f32>>>],
    truth: &[usize],
    embedder: &E,
    ks: &[usize],
) -> Result<RetrievalReport, MetricsError> {
    let music: Vec<Vec<f32>> = music_segments
        .iter()
        .map(|segs| embedder.embed_music(segs).map(|e| mean_pool(&e)))
        .collect::<Result<_, _>>()?;
    let videos: Vec<Vec<f32>> = video_segments
        .iter()
        .map(|segs| embedder.embed_video(segs).map(|e| mean_pool(&e)))
        .collect::<Result<_, _>>()?;
    vmcp_eval_pooled(&music, &videos, truth, ks)
}

fn mean_pool(rows: &[Vec<f32>]) -> Vec<f32> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = vec![0.0f32; dim];
    for row in rows {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v / rows.len() as f32;
        }
    }
    out
}

/// Dual-encoder configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmcpConfig {
    pub video_dim: usize,
    pub music_dim: usize,
    pub hidden: usize,
    pub ff: usize,
    pub heads: usize,
    pub layers: usize,
    /// Joint embedding width.
    pub embed_dim: usize,
    /// Segments per piece.
    pub segments: usize,
    pub tau_init: f64,
    pub dropout: f64,
}

impl Default for VmcpConfig {
    fn default() -> Self {
        VmcpConfig {
            video_dim: crate::video::SEMANTIC_DIM,
            music_dim: super::features::MUSIC_FEATURE_DIM,
            hidden: 64,
            ff: 128,
            heads: 4,
            layers: 2,
            embed_dim: 128,
            segments: 4,
            tau_init: 0.07,
            dropout: 0.0,
        }
    }
}

impl VmcpConfig {
    fn transformer(&self) -> TransformerConfig {
        TransformerConfig {
            hidden: self.hidden,
            ff: self.ff,
            heads: self.heads,
            dropout: self.dropout,
            encoder_layers: self.layers,
            decoder_layers: 0,
            linear_attention: false,
        }
    }
}

struct VmcpArch {
    video_in: Linear,
    video_enc: Encoder,
    video_proj: Linear,
    music_in: Linear,
    music_enc: Encoder,
    music_proj: Linear,
    tau: PIdx,
}

/// Transformer dual encoder with a learnable temperature.
pub struct VmcpModel {
    pub config: VmcpConfig,
    pub params: ParamSet<f32>,
    arch: VmcpArch,
}

#[derive(Clone, Copy)]
enum Side {
    Video,
    Music,
}

impl VmcpModel {
    pub fn new(config: VmcpConfig, seed: u64) -> Self {
        let mut rng = crate::toy::rng(seed);
        let mut ps: ParamSet<f32> = ParamSet::new();
        let t = config.transformer();
        let arch = VmcpArch {
            video_in: Linear::new(&mut ps, "video.in", config.video_dim, config.hidden, &mut rng),
            video_enc: Encoder::new(&mut ps, "video.enc", config.layers, &t, &mut rng),
            video_proj: Linear::new(&mut ps, "video.proj", config.hidden, config.embed_dim, &mut rng),
            music_in: Linear::new(&mut ps, "music.in", config.music_dim, config.hidden, &mut rng),
            music_enc: Encoder::new(&mut ps, "music.enc", config.layers, &t, &mut rng),
            music_proj: Linear::new(&mut ps, "music.proj", config.hidden, config.embed_dim, &mut rng),
            tau: ps.add_scalar("tau", config.tau_init as f32),
        };
        VmcpModel { config, params: ps, arch }
    }

    pub fn tau(&self) -> f64 {
        self.params.get(self.arch.tau).data[0] as f64
    }

    /// Embeds one segment: encode, mean-pool, project, L2-normalize.
    fn embed_segment(&self, f: &mut Fwd<'_, f32>, side: Side, rows: &[Vec<f32>]) -> Result<Id, MetricsError> {
        let (lin_in, enc, proj, dim) = match side {
            Side::Video => (
                &self.arch.video_in,
                &self.arch.video_enc,
                &self.arch.video_proj,
                self.config.video_dim,
            ),
            Side::Music => (
                &self.arch.music_in,
                &self.arch.music_enc,
                &self.arch.music_proj,
                self.config.music_dim,
            ),
        };
        let data: Vec<f32> = rows.iter().flatten().copied().collect();
        let x = f.tape.leaf(rows.len(), dim, data);
        let x = lin_in.forward(f, x);
        let pe = f.tape.leaf(rows.len(), self.config.hidden, sinusoidal_encoding(rows.len(), self.config.hidden));
        let x = f.tape.add(x, pe);
        let x = enc.forward(f, x).map_err(MetricsError::Nn)?;
        let pooled = f.tape.mean_rows(x);
        let projected = proj.forward(f, pooled);
        Ok(f.tape.l2norm_rows(projected))
    }

    /// All segments of one side stacked into an `L x d` matrix.
    fn embed_side(
        &self,
        f: &mut Fwd<'_, f32>,
        side: Side,
        segments: &[Vec<Vec<f32>>],
    ) -> Result<Id, MetricsError> {
        let rows: Vec<Id> = segments
            .iter()
            .map(|seg| self.embed_segment(f, side, seg))
            .collect::<Result<_, _>>()?;
        Ok(if rows.len() == 1 { rows[0] } else { f.tape.concat_rows(&rows) })
    }

    fn eval_side(&self, side: Side, segments: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f32>>, MetricsError> {
        let mut tape: Tape<f32> = Tape::new();
        let ids = self.params.inject(&mut tape);
        let mut rng = crate::toy::rng(0);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
        let id = self.embed_side(&mut f, side, segments)?;
        let cols = tape.cols(id);
        Ok(tape.data(id).chunks(cols).map(<[f32]>::to_vec).collect())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>, step: u64) -> Result<(), MetricsError> {
        let header = serde_json::json!({"kind": "vmcp", "config": self.config, "step": step});
        checkpoint::save_checkpoint(path, &header, &self.params.to_tensors())
            .map_err(MetricsError::Nn)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<VmcpModel, MetricsError> {
        let (header, tensors) = checkpoint::load_checkpoint(path).map_err(MetricsError::Nn)?;
        let config: VmcpConfig = serde_json::from_value(
            header
                .get("config")
                .ok_or_else(|| MetricsError::Checkpoint("missing config".into()))?
                .clone(),
        )?;
        let mut model = VmcpModel::new(config, 0);
        model.params.load_tensors(&tensors).map_err(MetricsError::Nn)?;
        Ok(model)
    }
}

impl VideoMusicEmbedder for VmcpModel {
    fn embed_video(&self, segments: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f32>>, MetricsError> {
        self.eval_side(Side::Video, segments)
    }

    fn embed_music(&self, segments: &[Vec<Vec<f32>>]) -> Result<Vec<Vec<f32>>, MetricsError> {
        self.eval_side(Side::Music, segments)
    }
}

#[derive(Debug, Clone)]
pub struct VmcpTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_dir: Option<std::path::PathBuf>,
}

impl Default for VmcpTrainConfig {
    fn default() -> Self {
        VmcpTrainConfig { epochs: 30, lr: 1e-3, batch_size: 16, seed: 0, checkpoint_dir: None }
    }
}

/// One training pair: raw feature rows for each side.
pub type VmcpPair = (Vec<Vec<f32>>, Vec<Vec<f32>>);

/// A piece split into segments of feature rows.
pub type Segmented = Vec<Vec<Vec<f32>>>;

/// Minimizes the symmetric InfoNCE loss over the paired dataset with Adam,
/// checkpointing per epoch, and returns the trained encoders with the loss
/// curve.
pub fn train_vmcp(
    pairs: &[VmcpPair],
    config: VmcpConfig,
    train: &VmcpTrainConfig,
) -> Result<(VmcpModel, Vec<f64>), MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let mut model = VmcpModel::new(config, train.seed);
    let mut adam: Adam<f32> = Adam::new(train.lr);
    let mut losses = Vec::with_capacity(train.epochs);

    let segmented: Vec<(Segmented, Segmented)> = pairs
        .iter()
        .map(|(v, m)| {
            (
                super::features::split_segments(v, config.segments),
                super::features::split_segments(m, config.segments),
            )
        })
        .collect();

    for _epoch in 0..train.epochs {
        let mut epoch_loss = 0.0;
        for batch in segmented.chunks(train.batch_size.max(2)) {
            model.params.zero_grads();
            let mut tape: Tape<f32> = Tape::new();
            let ids = model.params.inject(&mut tape);
            let mut rng = crate::toy::rng(train.seed);
            let mut f = Fwd::new(&mut tape, &ids, true, config.dropout, &mut rng);

            let mut video_rows = Vec::with_capacity(batch.len());
            let mut music_rows = Vec::with_capacity(batch.len());
            for (v, m) in batch {
                video_rows.push(model.embed_side(&mut f, Side::Video, v)?);
                music_rows.push(model.embed_side(&mut f, Side::Music, m)?);
            }
            let v = if video_rows.len() == 1 { video_rows[0] } else { f.tape.concat_rows(&video_rows) };
            let m = if music_rows.len() == 1 { music_rows[0] } else { f.tape.concat_rows(&music_rows) };

            // Unit rows make the Gram matrix a cosine matrix.
            let sim_vm = f.tape.matmul_tb(v, m);
            let tau_id = f.p(model.arch.tau);
            let scaled_vm = f.tape.div_scalar(sim_vm, tau_id);
            let sim_mv = f.tape.matmul_tb(m, v);
            let scaled_mv = f.tape.div_scalar(sim_mv, tau_id);

            let nl = tape.rows(scaled_vm);
            let diagonal = Rc::new((0..nl).collect::<Vec<usize>>());
            let all = Rc::new(vec![true; nl]);
            let ce_vm = tape
                .cross_entropy(scaled_vm, Rc::clone(&diagonal), Rc::clone(&all))
                .map_err(MetricsError::Nn)?;
            let ce_mv = tape
                .cross_entropy(scaled_mv, diagonal, all)
                .map_err(MetricsError::Nn)?;
            let sum = tape.add(ce_vm, ce_mv);
            let loss = tape.scale(sum, 0.5);

            epoch_loss += tape.scalar(loss) as f64 * batch.len() as f64;
            tape.backward(loss);
            model.params.accumulate_grads(&tape, &ids);
            adam.step(&mut model.params);
            // The temperature must stay positive.
            let tau = &mut model.params.get_mut(model.arch.tau).data[0];
            *tau = tau.max(1e-3);
        }
        losses.push(epoch_loss / pairs.len() as f64);
        if let Some(dir) = &train.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            model.save(dir.join(format!("epoch_{:04}.ckpt", losses.len() - 1)), adam.step_count())?;
        }
    }
    Ok((model, losses))
}

/// Synthetic linearly-correlated pairs: music features are a fixed linear map
/// of the video features plus small noise.
pub fn synthetic_pairs(
    n: usize,
    rows_per_piece: usize,
    video_dim: usize,
    music_dim: usize,
    seed: u64,
) -> Vec<VmcpPair> {
    let mut rng = crate::toy::rng(seed);
    let map: Vec<f32> =
        (0..video_dim * music_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .map(|_| {
            let video: Vec<Vec<f32>> = (0..rows_per_piece)
                .map(|_| (0..video_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let music: Vec<Vec<f32>> = video
                .iter()
                .map(|row| {
                    (0..music_dim)
                        .map(|c| {
                            let lin: f32 = (0..video_dim)
                                .map(|r| row[r] * map[r * music_dim + c])
                                .sum();
                            lin + rng.random_range(-0.01..0.01)
                        })
                        .collect()
                })
                .collect();
            (video, music)
        })
        .collect()
}
