//! Melody/accompaniment separation.
//!
//! At every onset time the highest-pitched note goes to the melody; everything
//! else is accompaniment. Melody notes are then truncated at the next melody
//! onset so the resulting line is strictly monophonic.

use crate::midi::{sort_notes, Score};

use super::TrackSplit;

/// Splits a score into a monophonic melody and the remaining accompaniment.
///
/// The (onset, pitch, velocity) multiset of the input is preserved across the
/// two parts; only melody durations may shrink through truncation.
pub fn skyline_split(score: &Score) -> TrackSplit {
    let mut melody = Vec::new();
    let mut accompaniment = Vec::new();

    // Notes are sorted by (onset, pitch, ...), so the last note of each onset
    // group is the highest-pitched one.
    let notes = &score.notes;
    let mut i = 0;
    while i < notes.len() {
        let mut j = i;
        while j + 1 < notes.len() && notes[j + 1].onset == notes[i].onset {
            j += 1;
        }
        melody.push(notes[j]);
        accompaniment.extend_from_slice(&notes[i..j]);
        i = j + 1;
    }

    for k in 0..melody.len().saturating_sub(1) {
        let next_onset = melody[k + 1].onset;
        if melody[k].offset() > next_onset {
            melody[k].duration = next_onset - melody[k].onset;
        }
    }

    sort_notes(&mut accompaniment);
    TrackSplit {
        melody: Score { notes: melody, ..score.clone() },
        accompaniment: Score { notes: accompaniment, ..score.clone() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::NoteEvent;
    use std::collections::BTreeMap;

    #[test]
    fn highest_pitch_wins_at_simultaneous_onsets() {
        let s = Score::from_notes(
            480,
            120.0,
            vec![NoteEvent::new(0, 480, 60, 64), NoteEvent::new(0, 480, 76, 64)],
        );
        let split = skyline_split(&s);
        assert_eq!(split.melody.notes.len(), 1);
        assert_eq!(split.melody.notes[0].pitch, 76);
        assert_eq!(split.accompaniment.notes.len(), 1);
        assert_eq!(split.accompaniment.notes[0].pitch, 60);
    }

    #[test]
    fn monophonic_input_becomes_all_melody() {
        let s = Score::from_notes(
            480,
            120.0,
            vec![NoteEvent::new(0, 480, 60, 64), NoteEvent::new(480, 480, 62, 64)],
        );
        let split = skyline_split(&s);
        assert_eq!(split.melody, s);
        assert!(split.accompaniment.notes.is_empty());
    }

    #[test]
    fn empty_score_splits_into_empty_parts() {
        let split = skyline_split(&Score::empty(480, 120.0));
        assert!(split.melody.notes.is_empty());
        assert!(split.accompaniment.notes.is_empty());
    }

    #[test]
    fn overlapping_melody_notes_are_truncated() {
        let s = Score::from_notes(
            480,
            120.0,
            vec![NoteEvent::new(0, 960, 72, 64), NoteEvent::new(480, 480, 74, 64)],
        );
        let split = skyline_split(&s);
        assert_eq!(split.melody.notes[0].duration, 480);
        assert_eq!(split.melody.notes[1].duration, 480);
    }

    #[test]
    fn melody_is_monophonic_on_random_scores() {
        for seed in 0..30 {
            let s = crate::toy::random_quantized_score(seed, 4);
            let split = skyline_split(&s);
            for pair in split.melody.notes.windows(2) {
                assert!(pair[0].offset() <= pair[1].onset, "seed {seed}: melody overlaps");
            }
        }
    }

    #[test]
    fn split_conserves_the_onset_pitch_velocity_multiset() {
        for seed in 0..30 {
            let s = crate::toy::random_quantized_score(seed, 4);
            let split = skyline_split(&s);
            let mut expect: BTreeMap<(u32, u8, u8), usize> = BTreeMap::new();
            for n in &s.notes {
                *expect.entry((n.onset, n.pitch, n.velocity)).or_default() += 1;
            }
            let mut got: BTreeMap<(u32, u8, u8), usize> = BTreeMap::new();
            for n in split.melody.notes.iter().chain(&split.accompaniment.notes) {
                *got.entry((n.onset, n.pitch, n.velocity)).or_default() += 1;
            }
            assert_eq!(expect, got, "seed {seed}");
        }
    }
}
