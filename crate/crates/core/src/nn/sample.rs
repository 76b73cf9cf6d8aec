//! Temperature-scaled nucleus sampling with grammar-constrained retries.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::tokenize::{Attr, CompoundToken, SequenceValidator, TokenType};

use super::Real;

const MAX_RETRIES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    /// Deterministic argmax decoding (the temperature -> 0 limit).
    pub argmax: bool,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 1.0, top_p: 0.9, argmax: false }
    }
}

/// Samples one class id from raw logits.
///
/// Logits are scaled by `1/temperature`, truncated to the smallest set with
/// probability mass at least `top_p`, renormalized, and sampled. `argmax`
/// short-circuits to the deterministic maximum.
pub fn sample_categorical<T: Real>(
    logits: &[T],
    params: &SamplingParams,
    rng: &mut ChaCha20Rng,
) -> usize {
    sample_masked(logits, params, rng, |_| true)
}

/// Nucleus sampling restricted to ids accepted by `allowed`; at least one id
/// must be allowed.
pub fn sample_masked<T: Real>(
    logits: &[T],
    params: &SamplingParams,
    rng: &mut ChaCha20Rng,
    allowed: impl Fn(usize) -> bool,
) -> usize {
    assert!(!logits.is_empty());
    let ids: Vec<usize> = (0..logits.len()).filter(|&i| allowed(i)).collect();
    assert!(!ids.is_empty(), "no allowed ids to sample");

    if params.argmax || params.temperature <= 0.0 {
        return ids
            .iter()
            .copied()
            .max_by(|&a, &b| logits[a].partial_cmp(&logits[b]).unwrap().then(b.cmp(&a)))
            .unwrap();
    }
    let temp = params.temperature;
    let max = ids.iter().map(|&i| logits[i]).fold(T::neg_infinity(), T::max);
    let probs: Vec<f64> = ids
        .iter()
        .map(|&i| ((logits[i] - max).to_f64().unwrap() / temp).exp())
        .collect();
    let total: f64 = probs.iter().sum();

    // Nucleus truncation over probabilities sorted descending.
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    let top_p = params.top_p.clamp(0.0, 1.0);
    let mut kept = 0usize;
    let mut mass = 0.0;
    for &i in &order {
        kept += 1;
        mass += probs[i] / total;
        if mass >= top_p {
            break;
        }
    }

    let draw: f64 = rng.random_range(0.0..mass.max(f64::MIN_POSITIVE));
    let mut acc = 0.0;
    for &i in &order[..kept] {
        acc += probs[i] / total;
        if draw < acc {
            return ids[i];
        }
    }
    ids[order[kept - 1]]
}

/// Clears attributes that do not belong to the token's type, so a freely
/// sampled candidate is judged on structure alone.
fn scrub(token: &mut CompoundToken) {
    match token.ttype {
        TokenType::Rhythm => {
            token.pitch = None;
            token.duration = None;
            token.root = None;
            token.quality = None;
        }
        TokenType::Note => {
            token.barbeat = None;
            token.root = None;
            token.quality = None;
        }
        TokenType::Chord => {
            token.barbeat = None;
            token.pitch = None;
            token.duration = None;
            // A half-specified chord is a rest.
            if token.root.is_none() != token.quality.is_none() {
                token.root = None;
                token.quality = None;
            }
        }
        _ => {
            token.barbeat = None;
            token.pitch = None;
            token.duration = None;
            token.root = None;
            token.quality = None;
        }
    }
}

fn probe(ttype: TokenType, barbeat: Option<u8>) -> CompoundToken {
    let mut token = CompoundToken::pad();
    token.ttype = ttype;
    token.barbeat = barbeat;
    if ttype == TokenType::Note {
        token.pitch = Some(60);
        token.duration = Some(1);
    }
    token
}

/// Samples one compound token from per-attribute logits.
///
/// Up to eight candidates are drawn freely and checked against the sequence
/// grammar. If all are rejected, a constrained draw masks the type and
/// barbeat heads to validator-accepted values, which always succeeds: any
/// started sequence accepts at least `EOS`.
pub fn sample_token<T: Real>(
    heads: &[(Attr, Vec<T>)],
    params: &SamplingParams,
    validator: &SequenceValidator,
    rng: &mut ChaCha20Rng,
) -> CompoundToken {
    for _ in 0..MAX_RETRIES {
        let mut token = CompoundToken::pad();
        for (attr, logits) in heads {
            let id = sample_categorical(logits, params, rng) as u16;
            attr.decode_into(id, &mut token).expect("head width matches attr table");
        }
        scrub(&mut token);
        if validator.check(&token).is_ok() {
            return token;
        }
    }
    constrained_sample(heads, params, validator, rng)
}

/// Structure-first draw: sample the type among types with any valid barbeat,
/// then the barbeat among values valid for that type, then the remaining
/// attributes with `NA` masked out where the type requires a value.
fn constrained_sample<T: Real>(
    heads: &[(Attr, Vec<T>)],
    params: &SamplingParams,
    validator: &SequenceValidator,
    rng: &mut ChaCha20Rng,
) -> CompoundToken {
    let type_logits = head(heads, Attr::Type);
    let barbeat_size = Attr::BarBeat.size();

    let barbeat_of = |id: usize| -> Option<u8> { (id > 0).then(|| (id - 1) as u8) };
    let type_ok = |tid: usize| -> bool {
        let Some(ttype) = TokenType::from_id(tid as u16) else { return false };
        (0..barbeat_size).any(|b| validator.check(&probe(ttype, barbeat_of(b))).is_ok())
    };
    let type_id = sample_masked(type_logits, params, rng, type_ok);
    let ttype = TokenType::from_id(type_id as u16).expect("masked to known ids");

    let barbeat_logits = head(heads, Attr::BarBeat);
    let barbeat_id = sample_masked(barbeat_logits, params, rng, |b| {
        validator.check(&probe(ttype, barbeat_of(b))).is_ok()
    });

    let mut token = CompoundToken::pad();
    token.ttype = ttype;
    token.barbeat = barbeat_of(barbeat_id);
    match ttype {
        TokenType::Note => {
            let pitch = sample_masked(head(heads, Attr::Pitch), params, rng, |i| i > 0);
            let duration = sample_masked(head(heads, Attr::Duration), params, rng, |i| i > 0);
            Attr::Pitch.decode_into(pitch as u16, &mut token);
            Attr::Duration.decode_into(duration as u16, &mut token);
        }
        TokenType::Chord => {
            let root = sample_masked(head(heads, Attr::Root), params, rng, |_| true);
            Attr::Root.decode_into(root as u16, &mut token);
            if token.root.is_some() {
                let quality = sample_masked(head(heads, Attr::Quality), params, rng, |i| i > 0);
                Attr::Quality.decode_into(quality as u16, &mut token);
            }
        }
        _ => {}
    }
    debug_assert!(validator.check(&token).is_ok());
    token
}

fn head<T: Real>(heads: &[(Attr, Vec<T>)], want: Attr) -> &[T] {
    heads
        .iter()
        .find(|(a, _)| *a == want)
        .map(|(_, l)| l.as_slice())
        .expect("stage vocabulary provides this head")
}
