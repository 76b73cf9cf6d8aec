//! Encoders from annotated music to token sequences and the inverse decoders.

use crate::annotate::{Chord, ChordSymbol, TrackSplit};
use crate::midi::{NoteEvent, Score};

use super::{
    fill_positions, CompoundToken, TokenType, TokenizeError, DECODE_TPQ, DECODE_VELOCITY,
    MAX_DURATION, POSITIONS_PER_BAR,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Melody,
    Accompaniment,
}

/// Extends a per-beat chord list with rests so it covers exactly `n_bars`.
/// Chords beyond the bar budget are dropped.
pub fn pad_chords(chords: &[ChordSymbol], n_bars: u32) -> Vec<ChordSymbol> {
    let mut out = Vec::with_capacity(n_bars as usize * 4);
    for bar in 0..n_bars {
        for beat in 0..4u8 {
            let found = chords
                .iter()
                .find(|c| c.bar_index == bar && c.beat_index == beat)
                .copied()
                .unwrap_or(ChordSymbol { bar_index: bar, beat_index: beat, chord: Chord::Rest });
            out.push(found);
        }
    }
    out
}

/// Encodes a chord progression for the chord stage: `BOS`, then per bar a bar
/// marker and four (beat marker, chord) pairs, then `EOS`.
pub fn encode_chord_stage(
    chords: &[ChordSymbol],
    n_bars: u32,
) -> Result<Vec<CompoundToken>, TokenizeError> {
    let expected = n_bars as usize * 4;
    if chords.len() != expected {
        return Err(TokenizeError::BarCoverage { expected, got: chords.len() });
    }
    let mut tokens = Vec::with_capacity(2 + n_bars as usize * 9);
    tokens.push(CompoundToken::bos());
    for bar in 0..n_bars {
        tokens.push(CompoundToken::bar(bar));
        for beat in 0..4u8 {
            let symbol = chords[(bar * 4 + beat as u32) as usize];
            if symbol.bar_index != bar || symbol.beat_index != beat {
                return Err(TokenizeError::BarCoverage { expected, got: chords.len() });
            }
            tokens.push(CompoundToken::position(beat + 1, bar));
            tokens.push(CompoundToken::chord(symbol.chord, bar, beat));
        }
    }
    tokens.push(CompoundToken::eos(n_bars.saturating_sub(1)));
    Ok(tokens)
}

/// Decodes a chord-stage token sequence back to one chord per beat.
pub fn decode_chord_tokens(
    tokens: &[CompoundToken],
) -> Result<Vec<ChordSymbol>, TokenizeError> {
    if tokens.first().map(|t| t.ttype) != Some(TokenType::Bos) {
        return Err(TokenizeError::MissingBos);
    }
    let mut out = Vec::new();
    let mut bar: Option<u32> = None;
    let mut bars_seen = 0u32;
    let mut beat: Option<u8> = None;
    let mut last_beat_pos = 0u8;
    for (index, token) in tokens.iter().enumerate().skip(1) {
        match token.ttype {
            TokenType::Eos => break,
            TokenType::Rhythm => match token.barbeat {
                Some(0) => {
                    bar = Some(bars_seen);
                    bars_seen += 1;
                    beat = None;
                    last_beat_pos = 0;
                }
                Some(p) if (1..=4).contains(&p) => {
                    if bar.is_none() {
                        return Err(TokenizeError::OrphanChord { index });
                    }
                    if p < last_beat_pos {
                        return Err(TokenizeError::PositionOrder { index });
                    }
                    last_beat_pos = p;
                    beat = Some(p - 1);
                }
                other => {
                    return Err(TokenizeError::UnexpectedToken {
                        index,
                        what: format!("rhythm marker {other:?} in chord stage"),
                    })
                }
            },
            TokenType::Chord => match (bar, beat) {
                (Some(bar), Some(beat)) => {
                    out.push(ChordSymbol { bar_index: bar, beat_index: beat, chord: token.chord_value() });
                }
                _ => return Err(TokenizeError::OrphanChord { index }),
            },
            other => {
                return Err(TokenizeError::UnexpectedToken {
                    index,
                    what: format!("{} token in chord stage", other.name()),
                })
            }
        }
    }
    Ok(out)
}

/// Encodes one part of a split for the melody or accompaniment stage.
pub fn encode_note_stage(
    split: &TrackSplit,
    part: Part,
    n_bars: u32,
) -> Result<Vec<CompoundToken>, TokenizeError> {
    let score = match part {
        Part::Melody => &split.melody,
        Part::Accompaniment => &split.accompaniment,
    };
    encode_notes(score, n_bars)
}

/// Encodes a quantized 4/4 score as interleaved bar markers, position
/// markers, and note tokens ordered pitch-descending within each position.
pub fn encode_notes(score: &Score, n_bars: u32) -> Result<Vec<CompoundToken>, TokenizeError> {
    let (num, den) = score.time_signature;
    if (num, den) != (4, 4) {
        return Err(TokenizeError::UnsupportedMeter { num, den });
    }
    let sixteenth = score.ticks_per_quarter as f64 / 4.0;
    let ppb = POSITIONS_PER_BAR as u32;

    // (global position, pitch descending) ordering.
    let mut placed: Vec<(u32, NoteEvent)> = score
        .notes
        .iter()
        .map(|n| (((n.onset as f64 / sixteenth).round()) as u32, *n))
        .collect();
    placed.sort_by(|(pa, na), (pb, nb)| pa.cmp(pb).then(nb.pitch.cmp(&na.pitch)));

    if let Some(&(pos, _)) = placed.last() {
        if pos >= n_bars * ppb {
            return Err(TokenizeError::BarCoverage {
                expected: (n_bars * ppb) as usize,
                got: pos as usize + 1,
            });
        }
    }

    let mut tokens = vec![CompoundToken::bos()];
    let mut idx = 0usize;
    for bar in 0..n_bars {
        tokens.push(CompoundToken::bar(bar));
        let bar_end = (bar + 1) * ppb;
        while idx < placed.len() && placed[idx].0 < bar_end {
            let pos = placed[idx].0;
            let in_bar = (pos - bar * ppb) as u8 + 1;
            tokens.push(CompoundToken::position(in_bar, bar));
            while idx < placed.len() && placed[idx].0 == pos {
                let note = placed[idx].1;
                let dur16 =
                    ((note.duration as f64 / sixteenth).round() as u32).clamp(1, MAX_DURATION as u32);
                tokens.push(CompoundToken::note(note.pitch, dur16 as u8, bar, (in_bar - 1) / 4));
                idx += 1;
            }
        }
    }
    tokens.push(CompoundToken::eos(n_bars.saturating_sub(1)));
    Ok(tokens)
}

/// Reconstructs a score from a note-stage token sequence on the 16th grid.
///
/// Tokens after `EOS` are ignored. Decoded notes sound at velocity 64.
pub fn decode_tokens(tokens: &[CompoundToken], tempo_bpm: f64) -> Result<Score, TokenizeError> {
    if tokens.first().map(|t| t.ttype) != Some(TokenType::Bos) {
        return Err(TokenizeError::MissingBos);
    }
    let sixteenth = DECODE_TPQ / 4;
    let ppb = POSITIONS_PER_BAR;
    let mut notes = Vec::new();
    let mut bar: Option<u32> = None;
    let mut bars_seen = 0u32;
    let mut position: Option<u8> = None;

    for (index, token) in tokens.iter().enumerate().skip(1) {
        match token.ttype {
            TokenType::Eos => break,
            TokenType::Rhythm => match token.barbeat {
                Some(0) => {
                    bar = Some(bars_seen);
                    bars_seen += 1;
                    position = None;
                }
                Some(p) if (1..=ppb).contains(&p) => {
                    if bar.is_none() {
                        return Err(TokenizeError::OrphanNote { index });
                    }
                    if let Some(last) = position {
                        if p < last {
                            return Err(TokenizeError::PositionOrder { index });
                        }
                    }
                    position = Some(p);
                }
                other => {
                    return Err(TokenizeError::UnexpectedToken {
                        index,
                        what: format!("rhythm marker {other:?}"),
                    })
                }
            },
            TokenType::Note => {
                let (bar, pos) = match (bar, position) {
                    (Some(b), Some(p)) => (b, p),
                    _ => return Err(TokenizeError::OrphanNote { index }),
                };
                let (pitch, dur16) = match (token.pitch, token.duration) {
                    (Some(p), Some(d)) => (p, d),
                    _ => {
                        return Err(TokenizeError::UnexpectedToken {
                            index,
                            what: "note token without pitch/duration".into(),
                        })
                    }
                };
                let onset = (bar * ppb as u32 + (pos - 1) as u32) * sixteenth;
                notes.push(NoteEvent::new(
                    onset,
                    dur16 as u32 * sixteenth,
                    pitch,
                    DECODE_VELOCITY,
                ));
            }
            other => {
                return Err(TokenizeError::UnexpectedToken {
                    index,
                    what: format!("{} token in note stage", other.name()),
                })
            }
        }
    }
    Ok(Score::from_notes(DECODE_TPQ, tempo_bpm, notes))
}

/// Merges melody and accompaniment into one track.
///
/// Exact duplicates (same onset and pitch) collapse to the longer duration.
pub fn merge_tracks(melody: &Score, accomp: &Score) -> Result<Score, TokenizeError> {
    if (melody.tempo_bpm - accomp.tempo_bpm).abs() > 1e-6 {
        return Err(TokenizeError::TempoMismatch { a: melody.tempo_bpm, b: accomp.tempo_bpm });
    }
    if melody.ticks_per_quarter != accomp.ticks_per_quarter {
        return Err(TokenizeError::GridMismatch {
            a: melody.ticks_per_quarter,
            b: accomp.ticks_per_quarter,
        });
    }
    let mut notes: Vec<NoteEvent> = melody.notes.iter().chain(&accomp.notes).copied().collect();
    notes.sort_by_key(|n| (n.onset, n.pitch, std::cmp::Reverse(n.duration), n.velocity));
    notes.dedup_by(|next, kept| next.onset == kept.onset && next.pitch == kept.pitch);
    Ok(Score::from_notes(melody.ticks_per_quarter, melody.tempo_bpm, notes))
}

/// Builds the accompaniment-stage condition: chords and melody notes
/// interleaved in temporal order within each bar, chord before notes at equal
/// positions. No `BOS`/`EOS`: this is encoder input, not a decoder stream.
pub fn encode_accomp_condition(
    chords: &[ChordSymbol],
    melody: &Score,
    n_bars: u32,
) -> Result<Vec<CompoundToken>, TokenizeError> {
    let melody_tokens = encode_notes(melody, n_bars)?;
    let padded = pad_chords(chords, n_bars);

    let mut out = Vec::new();
    let mut melody_iter = melody_tokens.iter().skip(1).peekable(); // skip BOS
    for bar in 0..n_bars {
        out.push(CompoundToken::bar(bar));
        match melody_iter.next() {
            Some(t) if t.ttype == TokenType::Rhythm && t.barbeat == Some(0) => {}
            other => {
                return Err(TokenizeError::UnexpectedToken {
                    index: out.len(),
                    what: format!("expected bar marker, found {other:?}"),
                })
            }
        }
        let mut emitted_pos = 0u8;
        for beat in 0..4u8 {
            let beat_pos = beat * 4 + 1;
            // Melody tokens strictly before this beat's start position.
            while let Some(t) = melody_iter.peek() {
                match (t.ttype, t.barbeat) {
                    (TokenType::Rhythm, Some(0)) | (TokenType::Eos, _) => break,
                    (TokenType::Rhythm, Some(p)) if p >= beat_pos => break,
                    _ => {
                        let t = **melody_iter.peek().unwrap();
                        if t.ttype == TokenType::Rhythm {
                            emitted_pos = t.barbeat.unwrap();
                        }
                        out.push(t);
                        melody_iter.next();
                    }
                }
            }
            // Chord first at the beat-start position.
            let symbol = padded[(bar * 4 + beat as u32) as usize];
            if emitted_pos != beat_pos {
                out.push(CompoundToken::position(beat_pos, bar));
                emitted_pos = beat_pos;
            }
            out.push(CompoundToken::chord(symbol.chord, bar, beat));
            // Melody tokens exactly at the beat-start position reuse the marker.
            if melody_iter.peek().map(|t| (t.ttype, t.barbeat))
                == Some((TokenType::Rhythm, Some(beat_pos)))
            {
                melody_iter.next();
                while melody_iter.peek().map(|t| t.ttype) == Some(TokenType::Note) {
                    out.push(**melody_iter.peek().unwrap());
                    melody_iter.next();
                }
            }
        }
        // Remaining melody tokens of this bar (positions after the last beat).
        while let Some(t) = melody_iter.peek() {
            match (t.ttype, t.barbeat) {
                (TokenType::Rhythm, Some(0)) | (TokenType::Eos, _) => break,
                _ => {
                    out.push(**melody_iter.peek().unwrap());
                    melody_iter.next();
                }
            }
        }
    }
    fill_positions(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{extract_chords, skyline_split, ChordQuality};
    use crate::midi::quantize;

    fn cm(bar: u32, beat: u8) -> ChordSymbol {
        ChordSymbol {
            bar_index: bar,
            beat_index: beat,
            chord: Chord::Sounding { root: 0, quality: ChordQuality::Maj },
        }
    }

    #[test]
    fn one_bar_of_c_major_is_eleven_tokens() {
        let chords: Vec<ChordSymbol> = (0..4).map(|b| cm(0, b)).collect();
        let tokens = encode_chord_stage(&chords, 1).unwrap();
        assert_eq!(tokens.len(), 11);
        assert_eq!(tokens[0].ttype, TokenType::Bos);
        assert_eq!(tokens[1], CompoundToken::bar(0));
        assert_eq!(tokens[2], CompoundToken::position(1, 0));
        assert_eq!(tokens[3].chord_value(), Chord::Sounding { root: 0, quality: ChordQuality::Maj });
        assert_eq!(tokens[10].ttype, TokenType::Eos);
    }

    #[test]
    fn zero_bars_is_bos_eos() {
        let tokens = encode_chord_stage(&[], 0).unwrap();
        assert_eq!(tokens.len(), 2);
        assert_eq!(tokens[0].ttype, TokenType::Bos);
        assert_eq!(tokens[1].ttype, TokenType::Eos);
    }

    #[test]
    fn chord_coverage_is_checked() {
        let chords: Vec<ChordSymbol> = (0..3).map(|b| cm(0, b)).collect();
        assert!(matches!(
            encode_chord_stage(&chords, 1),
            Err(TokenizeError::BarCoverage { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn chord_round_trip_on_random_progressions() {
        use rand::Rng;
        for seed in 0..100u64 {
            let mut rng = crate::toy::rng(seed);
            let n_bars = rng.random_range(1..5u32);
            let chords: Vec<ChordSymbol> = (0..n_bars * 4)
                .map(|i| {
                    let chord = if rng.random_bool(0.1) {
                        Chord::Rest
                    } else {
                        Chord::Sounding {
                            root: rng.random_range(0..12),
                            quality: ChordQuality::ALL[rng.random_range(0..10)],
                        }
                    };
                    ChordSymbol { bar_index: i / 4, beat_index: (i % 4) as u8, chord }
                })
                .collect();
            let tokens = encode_chord_stage(&chords, n_bars).unwrap();
            assert_eq!(decode_chord_tokens(&tokens).unwrap(), chords, "seed {seed}");
        }
    }

    #[test]
    fn whole_note_encodes_as_single_position() {
        let score =
            Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 1920, 60, DECODE_VELOCITY)]);
        let tokens = encode_notes(&score, 1).unwrap();
        // BOS, Bar, Pos1, Note, EOS
        assert_eq!(tokens.len(), 5);
        assert_eq!(tokens[2], CompoundToken::position(1, 0));
        assert_eq!(tokens[3].pitch, Some(60));
        assert_eq!(tokens[3].duration, Some(16));
    }

    #[test]
    fn simultaneous_notes_share_a_marker_in_descending_pitch_order() {
        let score = Score::from_notes(
            480,
            120.0,
            vec![
                NoteEvent::new(0, 480, 60, DECODE_VELOCITY),
                NoteEvent::new(0, 480, 72, DECODE_VELOCITY),
            ],
        );
        let tokens = encode_notes(&score, 1).unwrap();
        assert_eq!(tokens[2], CompoundToken::position(1, 0));
        assert_eq!(tokens[3].pitch, Some(72));
        assert_eq!(tokens[4].pitch, Some(60));
    }

    #[test]
    fn note_round_trip_on_random_quantized_scores() {
        for seed in 0..100u64 {
            let mut score = crate::toy::random_quantized_score(seed, 3);
            for n in &mut score.notes {
                n.velocity = DECODE_VELOCITY;
            }
            let score = quantize(&score, 4);
            let tokens = encode_notes(&score, score.n_bars().max(1)).unwrap();
            let back = decode_tokens(&tokens, score.tempo_bpm).unwrap();
            assert_eq!(back.notes, score.notes, "seed {seed}");
        }
    }

    #[test]
    fn split_parts_round_trip() {
        let mut score = crate::toy::random_quantized_score(5, 2);
        for n in &mut score.notes {
            n.velocity = DECODE_VELOCITY;
        }
        let split = skyline_split(&score);
        let bars = score.n_bars().max(1);
        let melody = decode_tokens(
            &encode_note_stage(&split, Part::Melody, bars).unwrap(),
            score.tempo_bpm,
        )
        .unwrap();
        assert_eq!(melody.notes, split.melody.notes);
        let accomp = decode_tokens(
            &encode_note_stage(&split, Part::Accompaniment, bars).unwrap(),
            score.tempo_bpm,
        )
        .unwrap();
        assert_eq!(accomp.notes, split.accompaniment.notes);
    }

    #[test]
    fn bos_eos_only_decodes_to_empty_score() {
        let tokens = vec![CompoundToken::bos(), CompoundToken::eos(0)];
        let score = decode_tokens(&tokens, 120.0).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn decreasing_positions_are_rejected() {
        let tokens = vec![
            CompoundToken::bos(),
            CompoundToken::bar(0),
            CompoundToken::position(5, 0),
            CompoundToken::position(2, 0),
            CompoundToken::eos(0),
        ];
        assert!(matches!(
            decode_tokens(&tokens, 120.0),
            Err(TokenizeError::PositionOrder { index: 3 })
        ));
    }

    #[test]
    fn orphan_note_is_rejected_with_its_index() {
        let tokens = vec![
            CompoundToken::bos(),
            CompoundToken::bar(0),
            CompoundToken::note(60, 4, 0, 0),
        ];
        assert!(matches!(
            decode_tokens(&tokens, 120.0),
            Err(TokenizeError::OrphanNote { index: 2 })
        ));
    }

    #[test]
    fn tokens_after_eos_are_ignored() {
        let tokens = vec![
            CompoundToken::bos(),
            CompoundToken::bar(0),
            CompoundToken::eos(0),
            CompoundToken::note(60, 4, 0, 0),
        ];
        assert!(decode_tokens(&tokens, 120.0).unwrap().notes.is_empty());
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let melody = crate::toy::random_quantized_score(9, 2);
        let empty = Score { notes: vec![], ..melody.clone() };
        let merged = merge_tracks(&melody, &empty).unwrap();
        assert_eq!(merged.notes, melody.notes);
    }

    #[test]
    fn merge_deduplicates_keeping_longer_duration() {
        let a = Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 240, 60, 64)]);
        let b = Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 480, 60, 64)]);
        let merged = merge_tracks(&a, &b).unwrap();
        assert_eq!(merged.notes, vec![NoteEvent::new(0, 480, 60, 64)]);
    }

    #[test]
    fn merge_counts_match_the_multiset_oracle() {
        use std::collections::BTreeSet;
        for seed in 0..30u64 {
            let m = crate::toy::random_quantized_score(seed, 2);
            let mut a = crate::toy::random_quantized_score(seed + 1000, 2);
            a.tempo_bpm = m.tempo_bpm;
            let merged = merge_tracks(&m, &a).unwrap();
            let mut keys = BTreeSet::new();
            for n in m.notes.iter().chain(&a.notes) {
                keys.insert((n.onset, n.pitch));
            }
            assert_eq!(merged.notes.len(), keys.len(), "seed {seed}");
        }
    }

    #[test]
    fn merge_is_commutative_up_to_dedup_and_associative_on_disjoint_sets() {
        for seed in 0..20u64 {
            let a = crate::toy::random_quantized_score(seed, 2);
            let mut b = crate::toy::random_quantized_score(seed + 500, 2);
            b.tempo_bpm = a.tempo_bpm;
            let ab = merge_tracks(&a, &b).unwrap();
            let ba = merge_tracks(&b, &a).unwrap();
            // Same (onset, pitch, duration) content either way; velocities may
            // differ where duplicates picked different sources.
            let key = |s: &Score| -> Vec<(u32, u8, u32)> {
                s.notes.iter().map(|n| (n.onset, n.pitch, n.duration)).collect()
            };
            assert_eq!(key(&ab), key(&ba), "seed {seed}");

            // Disjoint pitch ranges: strictly associative.
            let mut low = a.clone();
            low.notes.iter_mut().for_each(|n| n.pitch %= 40);
            let mut mid = b.clone();
            mid.notes.iter_mut().for_each(|n| n.pitch = 50 + n.pitch % 20);
            let mut high = crate::toy::random_quantized_score(seed + 900, 2);
            high.tempo_bpm = a.tempo_bpm;
            high.notes.iter_mut().for_each(|n| n.pitch = 80 + n.pitch % 20);
            let left = merge_tracks(&merge_tracks(&low, &mid).unwrap(), &high).unwrap();
            let right = merge_tracks(&low, &merge_tracks(&mid, &high).unwrap()).unwrap();
            assert_eq!(left, right, "seed {seed}");
        }
    }

    #[test]
    fn merge_rejects_tempo_mismatch() {
        let a = Score::empty(480, 120.0);
        let b = Score::empty(480, 100.0);
        assert!(matches!(merge_tracks(&a, &b), Err(TokenizeError::TempoMismatch { .. })));
    }

    #[test]
    fn accomp_condition_places_chords_before_equal_position_notes() {
        let melody =
            Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 480, 72, DECODE_VELOCITY)]);
        let chords: Vec<ChordSymbol> = (0..4).map(|b| cm(0, b)).collect();
        let tokens = encode_accomp_condition(&chords, &melody, 1).unwrap();
        // Bar, Pos1, Chord, Note, Pos5, Chord, Pos9, Chord, Pos13, Chord
        assert_eq!(tokens[0], CompoundToken::bar(0));
        assert_eq!(tokens[1], CompoundToken::position(1, 0));
        assert_eq!(tokens[2].ttype, TokenType::Chord);
        assert_eq!(tokens[3].ttype, TokenType::Note);
        assert_eq!(tokens[4], CompoundToken::position(5, 0));
        assert_eq!(tokens.len(), 10);
    }

    #[test]
    fn accomp_condition_orders_offbeat_notes_between_beats() {
        // Note at position 3 (between beats 1 and 2).
        let melody =
            Score::from_notes(480, 120.0, vec![NoteEvent::new(240, 240, 72, DECODE_VELOCITY)]);
        let chords = extract_chords(&Score::from_notes(
            480,
            120.0,
            vec![NoteEvent::new(0, 1920, 48, 64)],
        ));
        let tokens = encode_accomp_condition(&pad_chords(&chords, 1), &melody, 1).unwrap();
        let kinds: Vec<(TokenType, Option<u8>)> =
            tokens.iter().map(|t| (t.ttype, t.barbeat)).collect();
        assert_eq!(
            kinds,
            vec![
                (TokenType::Rhythm, Some(0)),
                (TokenType::Rhythm, Some(1)),
                (TokenType::Chord, None),
                (TokenType::Rhythm, Some(3)),
                (TokenType::Note, None),
                (TokenType::Rhythm, Some(5)),
                (TokenType::Chord, None),
                (TokenType::Rhythm, Some(9)),
                (TokenType::Chord, None),
                (TokenType::Rhythm, Some(13)),
                (TokenType::Chord, None),
            ]
        );
    }

    #[test]
    fn non_four_four_meter_is_rejected() {
        let mut score = Score::empty(480, 120.0);
        score.time_signature = (3, 4);
        assert!(matches!(
            encode_notes(&score, 1),
            Err(TokenizeError::UnsupportedMeter { num: 3, den: 4 })
        ));
    }
}
