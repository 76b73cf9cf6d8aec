//! Acceptance suite: one test per criterion, each printing a PASS line and
//! enforcing its stated tolerance and time budget.

use std::rc::Rc;
use std::time::Instant;

use rand::Rng;

use vmusprod::annotate::{detect_tonality, extract_chords, skyline_split, Mode, Tonality};
use vmusprod::metrics::{
    quality_metrics, synthetic_pairs, train_vmcp, vmcp_eval_pooled, VmcpConfig, VmcpModel,
    VmcpTrainConfig,
};
use vmusprod::midi::{quantize, write_midi, NoteEvent, Score};
use vmusprod::nn::layers::{DecoderLayer, Embedding, EncoderLayer, Fwd, Linear, Mha};
use vmusprod::nn::tape::{bar_cross_mask, BoolMat, Tape};
use vmusprod::nn::{grad_check, ParamSet, SamplingParams, TransformerConfig};
use vmusprod::pipeline::{
    generate, generate_unconditional, teacher_forced_accuracy, train_stage, Ablations, Condition,
    GenMode, GenRequest, GeneratorModels, StageConfig, StageDataset, StageModel, StageRole,
    TokenizedPiece, TrainConfig,
};
use vmusprod::tokenize::{
    decode_chord_tokens, decode_tokens, encode_chord_stage, encode_note_stage, pad_chords, Part,
    DECODE_VELOCITY,
};
use vmusprod::toy;
use vmusprod::video::{motion_tempo, FrameSequence, TempoMap};

fn pass(name: &str) {
    println!("acceptance: {name} PASS");
}

/// Criterion 1: codec round-trip identity on 200 random quantized scores
/// across all three stage encodings, exact, under 5 seconds.
#[test]
fn acceptance_01_codec_round_trip() {
    let start = Instant::now();
    for seed in 0..200u64 {
        let mut score = toy::random_quantized_score(seed, 3);
        for n in &mut score.notes {
            n.velocity = DECODE_VELOCITY;
        }
        let score = quantize(&score, 4);
        let n_bars = score.n_bars().max(1);

        let split = skyline_split(&score);
        let melody_tokens = encode_note_stage(&split, Part::Melody, n_bars).unwrap();
        let back = decode_tokens(&melody_tokens, score.tempo_bpm).unwrap();
        assert_eq!(back.notes, split.melody.notes, "melody seed {seed}");

        let accomp_tokens = encode_note_stage(&split, Part::Accompaniment, n_bars).unwrap();
        let back = decode_tokens(&accomp_tokens, score.tempo_bpm).unwrap();
        assert_eq!(back.notes, split.accompaniment.notes, "accomp seed {seed}");

        let chords = pad_chords(&extract_chords(&score), n_bars);
        let chord_tokens = encode_chord_stage(&chords, n_bars).unwrap();
        assert_eq!(decode_chord_tokens(&chord_tokens).unwrap(), chords, "chord seed {seed}");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "codec round-trip took {elapsed:?}");
    pass("codec round-trip (200 scores, 3 encodings)");
}

/// Criterion 2: skyline agrees with the per-onset max-pitch brute force on
/// 100 random polyphonic scores.
#[test]
fn acceptance_02_skyline_oracle() {
    for seed in 0..100u64 {
        let score = toy::random_quantized_score(seed, 4);
        let split = skyline_split(&score);
        let onsets: std::collections::BTreeSet<u32> =
            score.notes.iter().map(|n| n.onset).collect();
        assert_eq!(split.melody.notes.len(), onsets.len(), "seed {seed}");
        for m in &split.melody.notes {
            let max = score
                .notes
                .iter()
                .filter(|n| n.onset == m.onset)
                .map(|n| n.pitch)
                .max()
                .unwrap();
            assert_eq!(m.pitch, max, "seed {seed} onset {}", m.onset);
        }
    }
    pass("skyline per-onset max-pitch oracle (100 scores)");
}

/// Criterion 3: all 24 pure scales classified correctly and transposition
/// equivariance holds exactly.
#[test]
fn acceptance_03_tonality() {
    for tonic in 0..12u8 {
        for mode in [Mode::Major, Mode::Minor] {
            let got = detect_tonality(&toy::scale_score(tonic, mode)).unwrap();
            assert_eq!(got, Tonality { tonic, mode }, "{tonic} {mode:?}");
        }
    }
    for mode in [Mode::Major, Mode::Minor] {
        let base_tonic = if mode == Mode::Major { 0 } else { 9 };
        let base = toy::scale_score(base_tonic, mode);
        for k in 0..12i32 {
            let got = detect_tonality(&base.transposed(k)).unwrap();
            assert_eq!(got.tonic as i32, (base_tonic as i32 + k) % 12, "{mode:?} +{k}");
            assert_eq!(got.mode, mode);
        }
    }
    pass("tonality: 24 scales + exact transposition equivariance");
}

/// Criterion 4: quality metrics match an independent brute-force
/// implementation within 1e-9, and the analytic anchors hold.
#[test]
fn acceptance_04_quality_metrics() {
    // Analytic anchors.
    let uniform = Score::from_notes(
        480,
        120.0,
        (0..12).map(|pc| NoteEvent::new(pc as u32 * 480, 480, 60 + pc, 64)).collect(),
    );
    let pce = quality_metrics(&uniform).pce.unwrap();
    assert!((pce - 12f64.log2()).abs() < 1e-6, "uniform PCE {pce}");

    let beat_score = Score::from_notes(
        480,
        120.0,
        (0..8).map(|i| NoteEvent::new(i * 480, 480, 60 + (i % 7) as u8, 64)).collect(),
    );
    let r = quality_metrics(&beat_score);
    assert_eq!(r.ebr.unwrap(), 0.0);
    assert!((r.ioi.unwrap() - 0.5).abs() < 1e-12);

    // Brute force across 100 random scores.
    for seed in 0..100u64 {
        let s = toy::random_quantized_score(seed, 3);
        let got = quality_metrics(&s);
        let n = s.notes.len() as f64;

        let mut best_sc = 0.0f64;
        for tonic in 0..12u8 {
            for steps in [[0u8, 2, 4, 5, 7, 9, 11], [0, 2, 3, 5, 7, 8, 10]] {
                let hits = s
                    .notes
                    .iter()
                    .filter(|note| steps.iter().any(|&st| (tonic + st) % 12 == note.pitch % 12))
                    .count() as f64;
                best_sc = best_sc.max(hits / n);
            }
        }
        assert!((got.sc.unwrap() - best_sc).abs() < 1e-9, "sc seed {seed}");

        let entropy = |counts: std::collections::BTreeMap<u8, f64>| -> f64 {
            counts.values().map(|c| -(c / n) * (c / n).log2()).sum()
        };
        let mut pc = std::collections::BTreeMap::new();
        let mut pp = std::collections::BTreeMap::new();
        for note in &s.notes {
            *pp.entry(note.pitch).or_insert(0.0) += 1.0;
            *pc.entry(note.pitch % 12).or_insert(0.0) += 1.0;
        }
        assert!((got.pe.unwrap() - entropy(pp)).abs() < 1e-9, "pe seed {seed}");
        assert!((got.pce.unwrap() - entropy(pc)).abs() < 1e-9, "pce seed {seed}");

        let beats = s.end_tick().div_ceil(480);
        let empty = (0..beats)
            .filter(|b| {
                !s.notes.iter().any(|x| x.onset >= b * 480 && x.onset < (b + 1) * 480)
            })
            .count() as f64;
        assert!((got.ebr.unwrap() - empty / beats as f64).abs() < 1e-9, "ebr seed {seed}");

        let mut onsets: Vec<u32> = s.notes.iter().map(|x| x.onset).collect();
        onsets.sort_unstable();
        onsets.dedup();
        if onsets.len() >= 2 {
            let expect = onsets
                .windows(2)
                .map(|w| (w[1] - w[0]) as f64 / 480.0 * 60.0 / s.tempo_bpm)
                .sum::<f64>()
                / (onsets.len() - 1) as f64;
            assert!((got.ioi.unwrap() - expect).abs() < 1e-9, "ioi seed {seed}");
        }
    }
    pass("quality metrics vs brute force (100 scores) + analytic anchors");
}

/// Criterion 5: reverse-mode gradients match central finite differences
/// within 1e-4 relative error for every block type and a full 1-layer
/// encoder-decoder under the bar mask, within 60 seconds.
#[test]
fn acceptance_05_gradient_check() {
    let start = Instant::now();
    let config = TransformerConfig {
        hidden: 8,
        ff: 16,
        heads: 2,
        dropout: 0.0,
        encoder_layers: 1,
        decoder_layers: 1,
        linear_attention: false,
    };

    let scalar_loss = |f: &mut Fwd<'_, f64>, y: usize| {
        let pooled = f.tape.mean_rows(y);
        f.tape.matmul_tb(pooled, pooled)
    };

    // Linear layer.
    let mut rng = toy::rng(1);
    let mut ps: ParamSet<f64> = ParamSet::new();
    let lin = Linear::new(&mut ps, "lin", 4, 3, &mut rng);
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let x = f.tape.leaf(3, 4, (0..12).map(|i| (i as f64 - 6.0) / 5.0).collect());
        let y = lin.forward(&mut f, x);
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-7, "linear block err {err}");

    // Embedding gather.
    let mut ps: ParamSet<f64> = ParamSet::new();
    let emb = Embedding::new(&mut ps, "emb", 6, 5, &mut rng);
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let y = emb.forward(&mut f, Rc::new(vec![0, 3, 3, 5]));
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-6, "embedding block err {err}");

    // Layer norm.
    let mut ps: ParamSet<f64> = ParamSet::new();
    let ln = vmusprod::nn::layers::LayerNorm::new(&mut ps, "ln", 6);
    ps.add_uniform("x", 4, 6, &mut rng);
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let y = ln.forward(&mut f, ids[2]);
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-6, "layer norm err {err}");

    // Feed-forward with GELU.
    let mut ps: ParamSet<f64> = ParamSet::new();
    let ff = vmusprod::nn::layers::FeedForward::new(&mut ps, "ff", 4, 8, &mut rng);
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let x = f.tape.leaf(3, 4, (0..12).map(|i| (i as f64) / 11.0 - 0.4).collect());
        let y = ff.forward(&mut f, x);
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-6, "feed-forward err {err}");

    // Masked multi-head attention (causal).
    let mut ps: ParamSet<f64> = ParamSet::new();
    let attn = Mha::new(&mut ps, "attn", 8, 2, &mut rng);
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let x = f.tape.leaf(4, 8, (0..32).map(|i| ((i * 5 % 17) as f64 - 8.0) / 8.0).collect());
        let mask = Rc::new(BoolMat::causal(4));
        let y = attn.forward(&mut f, x, x, &mask).unwrap();
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-4, "attention err {err}");

    // Kernelized (linear) attention variant.
    let mut ps: ParamSet<f64> = ParamSet::new();
    let lin_attn = Mha::with_kernel(
        &mut ps,
        "linattn",
        8,
        2,
        vmusprod::nn::AttnKernel::Linear,
        &mut rng,
    );
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let x = f.tape.leaf(4, 8, (0..32).map(|i| ((i * 5 % 17) as f64 - 8.0) / 8.0).collect());
        let mask = Rc::new(BoolMat::causal(4));
        let y = lin_attn.forward(&mut f, x, x, &mask).unwrap();
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-4, "linear attention err {err}");

    // Full 1-layer encoder-decoder with the bar-level cross mask.
    let mut ps: ParamSet<f64> = ParamSet::new();
    let enc = EncoderLayer::new(&mut ps, "enc", &config, &mut rng);
    let dec = DecoderLayer::new(&mut ps, "dec", &config, true, &mut rng);
    let dec_bars = vec![0u32, 0, 1, 1, 2];
    let enc_bars = vec![0u32, 1, 1, 2];
    let err = grad_check(&mut ps, |tape, ids| {
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(tape, ids, false, 0.0, &mut rng);
        let src = f.tape.leaf(4, 8, (0..32).map(|i| ((i * 3 % 11) as f64 - 5.0) / 5.0).collect());
        let full = Rc::new(BoolMat::full(4, 4));
        let memory = enc.forward(&mut f, src, &full).unwrap();
        let x = f.tape.leaf(5, 8, (0..40).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect());
        let causal = Rc::new(BoolMat::causal(5));
        let cross = Rc::new(bar_cross_mask(&dec_bars, &enc_bars));
        let y = dec.forward(&mut f, x, &causal, Some((memory, &cross))).unwrap();
        scalar_loss(&mut f, y)
    });
    assert!(err < 1e-4, "encoder-decoder err {err}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "gradient checks took {elapsed:?}");
    pass("gradient checks < 1e-4 for all block types + encoder-decoder");
}

/// Criterion 6: attention to |bar delta| > 1 positions is exactly zero, and
/// zeroing those encoder outputs leaves decoder logits bit-identical.
#[test]
fn acceptance_06_bar_mask() {
    // Exhaustive op-level check over bar index combinations 0..6.
    let mut rng = toy::rng(3);
    let mut ps: ParamSet<f32> = ParamSet::new();
    let attn = Mha::new(&mut ps, "attn", 8, 2, &mut rng);
    for d0 in 0..6u32 {
        for e0 in 0..6u32 {
            let dec_bars = vec![d0, d0 + 1];
            let enc_bars = vec![e0, e0, e0 + 2];
            let mask = Rc::new(bar_cross_mask(&dec_bars, &enc_bars));
            if (0..2).any(|i| (0..3).all(|j| !mask.get(i, j))) {
                continue; // fully masked rows are rejected by construction
            }
            let mut tape: Tape<f32> = Tape::new();
            let ids = ps.inject(&mut tape);
            let mut rng2 = toy::rng(4);
            let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng2);
            let q = f.tape.leaf(2, 8, (0..16).map(|i| i as f32 / 7.0).collect());
            let kv = f.tape.leaf(3, 8, (0..24).map(|i| (i as f32 - 12.0) / 9.0).collect());
            let (_, weights) = attn.forward_with_weights(&mut f, q, kv, &mask).unwrap();
            for wid in weights {
                let w = tape.data(wid);
                for (i, &db) in dec_bars.iter().enumerate() {
                    let mut sum = 0.0f32;
                    for (j, &eb) in enc_bars.iter().enumerate() {
                        if db.abs_diff(eb) > 1 {
                            assert_eq!(w[i * 3 + j], 0.0, "leak at {db} vs {eb}");
                        }
                        sum += w[i * 3 + j];
                    }
                    assert!((sum - 1.0).abs() < 1e-6);
                }
            }
        }
    }

    // Model-level: zeroing out-of-window memory rows leaves that decoder
    // step's logits bit-identical (1-layer decoder).
    let model = StageModel::new(StageConfig::tiny(StageRole::Melody), 9);
    let hidden = model.config.transformer.hidden;
    let mut rng = toy::rng(11);
    let memory: Vec<Vec<f32>> = (0..8)
        .map(|_| (0..hidden).map(|_| rng.random_range(-1.0f32..1.0)).collect())
        .collect();
    let mem_bars: Vec<u32> = vec![0, 0, 1, 1, 2, 2, 3, 3];

    let score = toy::tonal_piece(2, 4);
    let piece = TokenizedPiece::from_score("p", &score, None).unwrap();
    let tokens = &piece.melody_tokens[..piece.melody_tokens.len() - 1];

    let forward = |mem: &[Vec<f32>]| -> Vec<Vec<f32>> {
        let mut tape: Tape<f32> = Tape::new();
        let ids = model.params.inject(&mut tape);
        let mut rng = toy::rng(0);
        let mut f = Fwd::new(&mut tape, &ids, false, 0.0, &mut rng);
        let heads = model
            .forward(&mut f, tokens, &Condition::MemoryWithBars(mem, &mem_bars), 110.0, 4, true)
            .unwrap();
        heads.iter().map(|&(_, id)| tape.data(id).to_vec()).collect()
    };

    let baseline = forward(&memory);
    for (i, token) in tokens.iter().enumerate() {
        let mut zeroed = memory.clone();
        for (row, &mb) in zeroed.iter_mut().zip(&mem_bars) {
            if token.bar_index.abs_diff(mb) > 1 {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let outputs = forward(&zeroed);
        for (head, (base, got)) in baseline.iter().zip(&outputs).enumerate() {
            let cols = base.len() / tokens.len();
            let b = &base[i * cols..(i + 1) * cols];
            let g = &got[i * cols..(i + 1) * cols];
            assert!(
                b.iter().zip(g).all(|(x, y)| x.to_bits() == y.to_bits()),
                "token {i} head {head}: logits changed"
            );
        }
    }
    pass("bar-level mask: exact zeros + bit-identical logits under zeroing");
}

fn overfit_dataset(with_bundles: bool) -> StageDataset {
    let pieces: Vec<TokenizedPiece> = (0..8)
        .map(|i| {
            let score = toy::tonal_piece(40 + i as u64, 2);
            let bundle = with_bundles.then(|| toy::feature_bundle(i as u64, 6, 4));
            TokenizedPiece::from_score(format!("overfit{i}"), &score, bundle).unwrap()
        })
        .collect();
    StageDataset::new(pieces, Vec::new())
}

fn overfit_one(role: StageRole, with_bundles: bool) {
    let start = Instant::now();
    let dataset = overfit_dataset(with_bundles);
    let config = StageConfig::desk(role);
    let train = TrainConfig {
        epochs: 300,
        lr: 1e-3,
        batch_size: 8,
        seed: 7,
        target_accuracy: Some(0.95),
        checkpoint_dir: None,
    };
    let (model, report) = train_stage(config, &dataset, &train).unwrap();
    let accuracy = teacher_forced_accuracy(&model, &dataset.train).unwrap();
    let elapsed = start.elapsed();
    assert!(
        accuracy >= 0.95,
        "{}: accuracy {accuracy:.3} after {} epochs",
        role.name(),
        report.train_losses.len()
    );
    assert!(elapsed.as_secs_f64() < 600.0, "{}: took {elapsed:?}", role.name());
    pass(&format!(
        "overfit {}: {:.1}% teacher-forced accuracy in {} epochs ({:.0?})",
        role.name(),
        accuracy * 100.0,
        report.train_losses.len(),
        elapsed
    ));
}

/// Criterion 7: each stage reaches 95% teacher-forced accuracy on 8 toy
/// pieces within 300 epochs at the desk profile, under 10 CPU minutes.
#[test]
fn acceptance_07a_overfit_chord_stage() {
    overfit_one(StageRole::Chord, true);
}

#[test]
fn acceptance_07b_overfit_melody_stage() {
    overfit_one(StageRole::Melody, false);
}

#[test]
fn acceptance_07c_overfit_accomp_stage() {
    overfit_one(StageRole::Accomp, false);
}

/// Criterion 8: motion-to-tempo endpoints map exactly to 90/130, the
/// midpoint to 110, and the map is monotone on a random grid.
#[test]
fn acceptance_08_tempo_mapping() {
    let solid = |value: u8| vec![value; 4 * 4 * 3];
    let frames = |values: Vec<u8>| FrameSequence {
        width: 4,
        height: 4,
        fps: 5.0, // pair interval of exactly one frame
        frames: values.into_iter().map(solid).collect(),
    };

    // Endpoints: a static video and a maximally flickering one.
    let map = TempoMap { m_min: Some(0.0), m_max: Some(1.0), ..TempoMap::default() };
    let static_video = frames(vec![128; 10]);
    let (motion, tempo) = motion_tempo(&static_video, &map).unwrap();
    assert_eq!((motion, tempo), (0.0, 90.0));

    let flicker = frames((0..10).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect());
    let (motion, tempo) = motion_tempo(&flicker, &map).unwrap();
    assert_eq!((motion, tempo), (1.0, 130.0));

    // Midpoint: mean motion of exactly (m_min + m_max) / 2.
    let map_mid = TempoMap { m_min: Some(0.0), m_max: Some(2.0), ..TempoMap::default() };
    let (_, tempo) = motion_tempo(&flicker, &map_mid).unwrap();
    assert_eq!(tempo, 110.0);

    // Monotonicity over a random grid of motion levels: a higher per-frame
    // step distance never lowers the tempo.
    let mut rng = toy::rng(5);
    let mut steps: Vec<u8> = (0..20).map(|_| rng.random_range(0..=255u8)).collect();
    steps.sort_unstable();
    let mut last = f64::NEG_INFINITY;
    for step in steps {
        let video = frames((0..10).map(|i| if i % 2 == 0 { 0 } else { step }).collect());
        let (_, tempo) = motion_tempo(&video, &map).unwrap();
        assert!(tempo >= last, "tempo {tempo} dropped below {last}");
        last = tempo;
    }
    pass("tempo mapping: exact endpoints, exact midpoint, monotone");
}

/// Criterion 9: oracle embeddings retrieve perfectly; independent random
/// embeddings with M = 70 match the uniform-rank expectations within 3
/// standard errors over 2000 trials.
#[test]
fn acceptance_09_vmcp_sanity() {
    // Oracle: music embedding identical to its paired video embedding.
    let mut rng = toy::rng(17);
    let m = 70usize;
    let unit = |rng: &mut rand_chacha::ChaCha20Rng| -> Vec<f32> {
        let v: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let n: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    };
    let videos: Vec<Vec<f32>> = (0..m).map(|_| unit(&mut rng)).collect();
    let truth: Vec<usize> = (0..m).collect();
    let report = vmcp_eval_pooled(&videos, &videos, &truth, &[5, 10, 20]).unwrap();
    assert_eq!(report.p_at[&5], 1.0);
    assert_eq!(report.average_rank, 1.0);

    // Independent random embeddings: ranks are uniform on 1..=70.
    let trials = 2000usize;
    let probes: Vec<Vec<f32>> = (0..trials).map(|_| unit(&mut rng)).collect();
    let truth: Vec<usize> = (0..trials).map(|i| i % m).collect();
    let report = vmcp_eval_pooled(&probes, &videos, &truth, &[5, 10, 20]).unwrap();

    for k in [5usize, 10, 20] {
        let p = k as f64 / m as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let got = report.p_at[&k];
        assert!(
            (got - p).abs() <= 3.0 * sigma,
            "P@{k} = {got:.4}, expected {p:.4} +- {:.4}",
            3.0 * sigma
        );
    }
    let expect_ar = (m as f64 + 1.0) / 2.0;
    let sigma_ar = (((m * m - 1) as f64 / 12.0) / trials as f64).sqrt();
    assert!(
        (report.average_rank - expect_ar).abs() <= 3.0 * sigma_ar,
        "AR = {:.3}, expected {expect_ar:.3} +- {:.3}",
        report.average_rank,
        3.0 * sigma_ar
    );
    pass("retrieval sanity: oracle P@K = 1 / AR = 1; random within 3 sigma");
}

/// Criterion 10: training on synthetic linearly-correlated pairs lifts
/// held-out P@5 to at least three times chance, under 5 CPU minutes.
#[test]
fn acceptance_10_vmcp_learning() {
    let start = Instant::now();
    let video_dim = 24usize;
    let music_dim = 16usize;
    let pairs = synthetic_pairs(96, 8, video_dim, music_dim, 23);
    let (train_pairs, held_out) = pairs.split_at(64);

    let config = VmcpConfig {
        video_dim,
        music_dim,
        hidden: 32,
        ff: 64,
        heads: 4,
        layers: 1,
        embed_dim: 32,
        segments: 4,
        ..Default::default()
    };
    let train = VmcpTrainConfig { epochs: 40, lr: 2e-3, batch_size: 16, seed: 3, checkpoint_dir: None };
    let (model, losses) = train_vmcp(train_pairs, config, &train).unwrap();
    assert!(losses.last().unwrap() < losses.first().unwrap(), "loss failed to drop: {losses:?}");

    let p5 = held_out_p5(&model, held_out, config.segments);
    let chance = 5.0 / held_out.len() as f64;
    let elapsed = start.elapsed();
    assert!(
        p5 >= 3.0 * chance,
        "held-out P@5 = {p5:.3}, chance = {chance:.3} (3x = {:.3})",
        3.0 * chance
    );
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    pass(&format!("retrieval learning: held-out P@5 {p5:.2} >= 3x chance ({:.0?})", elapsed));
}

fn held_out_p5(
    model: &VmcpModel,
    held_out: &[(Vec<Vec<f32>>, Vec<Vec<f32>>)],
    segments: usize,
) -> f64 {
    use vmusprod::metrics::{split_segments, vmcp_eval, VideoMusicEmbedder as _};
    let video_segments: Vec<_> =
        held_out.iter().map(|(v, _)| split_segments(v, segments)).collect();
    let music_segments: Vec<_> =
        held_out.iter().map(|(_, m)| split_segments(m, segments)).collect();
    let truth: Vec<usize> = (0..held_out.len()).collect();
    // Exercise the trait surface once for the embeddings' invariants.
    let sample = model.embed_music(&music_segments[0]).unwrap();
    for row in &sample {
        let norm: f32 = row.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-4);
    }
    let report = vmcp_eval(&music_segments, &video_segments, &truth, model, &[5]).unwrap();
    report.p_at[&5]
}

/// Criterion 11: fixed seeds give bit-identical generated MIDI and identical
/// training loss curves across two runs.
#[test]
fn acceptance_11_determinism() {
    // Training determinism.
    let dataset = overfit_dataset(true);
    let run = || {
        let config = StageConfig::tiny(StageRole::Chord);
        let train = TrainConfig { epochs: 4, seed: 13, ..Default::default() };
        train_stage(config, &dataset, &train).unwrap().1.train_losses
    };
    let (a, b) = (run(), run());
    assert!(
        a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()),
        "loss curves differ: {a:?} vs {b:?}"
    );

    // Generation determinism down to the MIDI bytes.
    let models = GeneratorModels {
        chord: Some(StageModel::new(StageConfig::tiny(StageRole::Chord).unconditional(), 2)),
        melody: Some(StageModel::new(StageConfig::tiny(StageRole::Melody), 3)),
        accomp: Some(StageModel::new(StageConfig::tiny(StageRole::Accomp), 4)),
        music_from_video: None,
        music_from_chords: None,
    };
    let render = || {
        let out = generate_unconditional(&models, 2, SamplingParams::default(), 31).unwrap();
        write_midi(&out.score)
    };
    assert_eq!(render(), render(), "generated MIDI bytes differ across runs");
    pass("determinism: loss curves and generated MIDI bit-identical");
}

/// Criterion 12: every ablation and collapsed mode runs end to end on the
/// toy corpus, and the run's provenance records its flags.
#[test]
fn acceptance_12_ablation_plumbing() {
    let pieces: Vec<TokenizedPiece> = (0..4)
        .map(|i| {
            let score = toy::tonal_piece(80 + i as u64, 2);
            let bundle = Some(toy::feature_bundle(i as u64, 6, 4));
            TokenizedPiece::from_score(format!("abl{i}"), &score, bundle).unwrap()
        })
        .collect();
    let dataset = StageDataset::new(pieces, Vec::new());
    let quick = TrainConfig { epochs: 3, lr: 2e-3, ..Default::default() };
    let stage = |role: StageRole| train_stage(StageConfig::tiny(role), &dataset, &quick).unwrap().0;

    let models = GeneratorModels {
        chord: Some(stage(StageRole::Chord)),
        melody: Some(stage(StageRole::Melody)),
        accomp: Some(stage(StageRole::Accomp)),
        music_from_video: Some(stage(StageRole::MusicFromVideo)),
        music_from_chords: Some(stage(StageRole::MusicFromChords)),
    };
    let bundle = toy::feature_bundle(99, 8, 5);

    let runs: Vec<(GenMode, Ablations)> = vec![
        (GenMode::Full, Ablations { no_semantic: true, ..Default::default() }),
        (GenMode::Full, Ablations { no_color: true, ..Default::default() }),
        (GenMode::Full, Ablations { no_motion: true, ..Default::default() }),
        (GenMode::Video2Music, Ablations::default()),
        (GenMode::Video2Chord2Music, Ablations::default()),
    ];
    for (mode, ablations) in runs {
        let req = GenRequest { n_bars: 2, seed: 5, mode, ablations, ..Default::default() };
        let out = generate(&models, Some(&bundle), &req).unwrap();
        assert!(out.score.n_bars() <= 2, "{mode:?}");
        if ablations.no_motion {
            assert_eq!(out.tempo_bpm, 110.0, "{mode:?}: motion ablation must fix tempo");
        }

        // Provenance structure: mode and ablation flags are recorded.
        let provenance = serde_json::json!({
            "mode": mode.name(),
            "ablations": ablations.flags(),
            "seed": req.seed,
            "n_bars": req.n_bars,
        });
        assert_eq!(provenance["mode"], mode.name());
        let flags: Vec<String> = provenance["ablations"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        assert_eq!(flags, ablations.flags());
    }
    pass("ablation plumbing: w/o semantic, w/o color, w/o motion, video2music, video2chord2music");
}
