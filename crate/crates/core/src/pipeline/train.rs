//! Teacher-forced training of one stage.

use std::path::PathBuf;
use std::rc::Rc;

use crate::nn::layers::Fwd;
use crate::nn::loss::{multihead_ce_loss, CeHead};
use crate::nn::tape::Tape;
use crate::nn::Adam;
use crate::tokenize::{Attr, CompoundToken, TokenType};

use super::dataset::{StageDataset, TokenizedPiece};
use super::model::{Ablations, Condition, StageConfig, StageModel};
use super::PipelineError;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop early once teacher-forced accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    /// Write a checkpoint per epoch plus `best.ckpt` when set.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            lr: 1e-3,
            batch_size: 8,
            seed: 0,
            target_accuracy: None,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub accuracies: Vec<f64>,
    pub best_epoch: usize,
}

/// Whether an attribute head is scored at a target position: each attribute
/// is trained exactly where the target token type carries it.
fn head_select(attr: Attr, target: &CompoundToken) -> bool {
    match attr {
        Attr::Type => true,
        Attr::BarBeat => target.ttype == TokenType::Rhythm,
        Attr::Pitch | Attr::Duration => target.ttype == TokenType::Note,
        // Rest chords keep root/quality at the NA id, so chords always train.
        Attr::Root | Attr::Quality => target.ttype == TokenType::Chord,
    }
}

fn piece_condition<'a>(
    piece: &'a TokenizedPiece,
    cond_tokens: &'a Option<Vec<CompoundToken>>,
) -> Condition<'a> {
    if let Some(tokens) = cond_tokens {
        return Condition::Tokens(tokens);
    }
    match &piece.bundle {
        Some(bundle) => Condition::Bundle(bundle, Ablations::default()),
        None => Condition::None,
    }
}

/// Loss and teacher-forced accuracy of one piece; when `train` is set the
/// tape is retained for the caller to run backward on.
fn piece_forward(
    model: &StageModel,
    piece: &TokenizedPiece,
    cond_tokens: &Option<Vec<CompoundToken>>,
    train: bool,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> Result<(Tape<f32>, Vec<crate::nn::Id>, crate::nn::Id, f64), PipelineError> {
    let tokens = piece.decoder_tokens(model.config.role);
    let inputs = &tokens[..tokens.len() - 1];
    let targets = &tokens[1..];

    let mut tape: Tape<f32> = Tape::new();
    let ids = model.params.inject(&mut tape);
    let mut f = Fwd::new(&mut tape, &ids, train, model.config.transformer.dropout, rng);
    let condition = piece_condition(piece, cond_tokens);
    let heads =
        model.forward(&mut f, inputs, &condition, piece.tempo_bpm, piece.n_bars, true)?;

    let mut ce_heads = Vec::with_capacity(heads.len());
    let mut correct = 0usize;
    let mut scored = 0usize;
    for &(attr, logits) in &heads {
        let target_ids: Vec<usize> =
            targets.iter().map(|t| attr.encode(t) as usize).collect();
        let select: Vec<bool> = targets.iter().map(|t| head_select(attr, t)).collect();
        let cols = attr.size();
        for (r, (&t, &s)) in target_ids.iter().zip(&select).enumerate() {
            if !s {
                continue;
            }
            scored += 1;
            let row = &tape.data(logits)[r * cols..(r + 1) * cols];
            let argmax =
                row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            if argmax == t {
                correct += 1;
            }
        }
        ce_heads.push(CeHead { logits, targets: Rc::new(target_ids), select: Rc::new(select) });
    }
    let loss = multihead_ce_loss(&mut tape, &ce_heads).map_err(PipelineError::Nn)?;
    let accuracy = if scored == 0 { 1.0 } else { correct as f64 / scored as f64 };
    Ok((tape, ids, loss, accuracy))
}

/// Mean loss over a piece list in eval mode (no dropout).
fn eval_loss(
    model: &StageModel,
    pieces: &[TokenizedPiece],
    conditions: &[Option<Vec<CompoundToken>>],
) -> Result<(f64, f64), PipelineError> {
    let mut rng = crate::toy::rng(0);
    let mut total = 0.0;
    let mut acc = 0.0;
    for (piece, cond) in pieces.iter().zip(conditions) {
        let (tape, _, loss, accuracy) = piece_forward(model, piece, cond, false, &mut rng)?;
        total += tape.scalar(loss) as f64;
        acc += accuracy;
    }
    let n = pieces.len().max(1) as f64;
    Ok((total / n, acc / n))
}

/// Trains one stage with teacher forcing and multi-head cross-entropy,
/// checkpointing each epoch and returning the best model by validation loss.
pub fn train_stage(
    config: StageConfig,
    dataset: &StageDataset,
    train: &TrainConfig,
) -> Result<(StageModel, TrainReport), PipelineError> {
    if dataset.train.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let mut model = StageModel::new(config, train.seed);
    let role = model.config.role;

    // Conditions are deterministic per piece; build them once.
    let train_conditions: Vec<Option<Vec<CompoundToken>>> = dataset
        .train
        .iter()
        .map(|p| p.condition_tokens(role))
        .collect::<Result<_, _>>()?;
    let val_pieces = dataset.val_or_train().to_vec();
    let val_conditions: Vec<Option<Vec<CompoundToken>>> =
        val_pieces.iter().map(|p| p.condition_tokens(role)).collect::<Result<_, _>>()?;

    let mut adam: Adam<f32> = Adam::new(train.lr);
    let mut dropout_rng = crate::toy::rng(train.seed ^ 0xd20f);
    let mut report = TrainReport::default();
    let mut best_val = f64::INFINITY;
    let mut best_params = model.params.clone();
    let mut best_epoch = 0usize;

    for epoch in 0..train.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_acc = 0.0;
        let batch_size = train.batch_size.max(1);
        for (batch_idx, batch) in dataset.train.chunks(batch_size).enumerate() {
            let start = batch_idx * batch_size;
            model.params.zero_grads();
            for (i, piece) in batch.iter().enumerate() {
                let cond = &train_conditions[start + i];
                let (mut tape, ids, loss, accuracy) =
                    piece_forward(&model, piece, cond, true, &mut dropout_rng)?;
                // Scale in-graph so accumulated gradients average over the batch.
                let scaled = tape.scale(loss, 1.0 / batch.len() as f32);
                epoch_loss += tape.scalar(loss) as f64;
                epoch_acc += accuracy;
                tape.backward(scaled);
                model.params.accumulate_grads(&tape, &ids);
            }
            adam.step(&mut model.params);
        }
        epoch_loss /= dataset.train.len() as f64;
        epoch_acc /= dataset.train.len() as f64;

        let (val_loss, _) = eval_loss(&model, &val_pieces, &val_conditions)?;
        report.train_losses.push(epoch_loss);
        report.val_losses.push(val_loss);
        report.accuracies.push(epoch_acc);

        if val_loss < best_val {
            best_val = val_loss;
            best_params = model.params.clone();
            best_epoch = epoch;
        }
        if let Some(dir) = &train.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            model.save(dir.join(format!("epoch_{epoch:04}.ckpt")), adam.step_count())?;
        }
        log::debug!(
            "{} epoch {epoch}: loss {epoch_loss:.4} val {val_loss:.4} acc {epoch_acc:.3}",
            role.name()
        );

        if let Some(target) = train.target_accuracy {
            // Teacher-forced accuracy in eval mode decides early stopping.
            let (_, eval_acc) = eval_loss(&model, &dataset.train, &train_conditions)?;
            if eval_acc >= target {
                best_params = model.params.clone();
                best_epoch = epoch;
                break;
            }
        }
    }

    model.params = best_params;
    report.best_epoch = best_epoch;
    if let Some(dir) = &train.checkpoint_dir {
        model.save(dir.join("best.ckpt"), adam.step_count())?;
    }
    Ok((model, report))
}

/// Teacher-forced next-token accuracy of a model over a piece list.
pub fn teacher_forced_accuracy(
    model: &StageModel,
    pieces: &[TokenizedPiece],
) -> Result<f64, PipelineError> {
    let conditions: Vec<Option<Vec<CompoundToken>>> = pieces
        .iter()
        .map(|p| p.condition_tokens(model.config.role))
        .collect::<Result<_, _>>()?;
    let (_, acc) = eval_loss(model, pieces, &conditions)?;
    Ok(acc)
}
