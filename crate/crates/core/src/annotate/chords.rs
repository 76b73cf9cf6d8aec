//! Rule-based chord extraction: one symbol per beat, scored against the
//! 120 root × quality templates.

use crate::midi::Score;

use super::{beat_grid, Chord, ChordQuality, ChordSymbol};

/// One of the 120 scoring templates.
#[derive(Debug, Clone, Copy)]
pub struct ChordTemplate {
    pub root: u8,
    pub quality: ChordQuality,
}

/// All 120 templates in tie-break order: root-major first, then quality.
pub const CHORD_TEMPLATES: [ChordTemplate; 120] = build_templates();

const fn build_templates() -> [ChordTemplate; 120] {
    let mut out = [ChordTemplate { root: 0, quality: ChordQuality::Maj }; 120];
    let mut root = 0u8;
    while root < 12 {
        let mut q = 0usize;
        while q < 10 {
            out[root as usize * 10 + q] = ChordTemplate { root, quality: ChordQuality::ALL[q] };
            q += 1;
        }
        root += 1;
    }
    out
}

/// Match score of a template against the set of sounding pitch classes:
/// +1 per template tone present, -1 per sounding non-template tone, +0.5 if
/// the root itself sounds.
pub fn template_score(template: ChordTemplate, sounding: &[bool; 12]) -> f64 {
    let mut in_template = [false; 12];
    for &iv in template.quality.intervals() {
        in_template[((template.root + iv) % 12) as usize] = true;
    }
    let mut score = 0.0;
    for pc in 0..12 {
        if in_template[pc] && sounding[pc] {
            score += 1.0;
        } else if !in_template[pc] && sounding[pc] {
            score -= 1.0;
        }
    }
    if sounding[template.root as usize] {
        score += 0.5;
    }
    score
}

/// Extracts one chord symbol per beat of the metric grid.
///
/// A beat's profile is the set of pitch classes sounding anywhere inside the
/// beat window. Silent beats yield rests; otherwise the best-scoring template
/// wins, with ties broken by lower root and then declared quality order.
pub fn extract_chords(score: &Score) -> Vec<ChordSymbol> {
    let tpq = score.ticks_per_quarter;
    beat_grid(score)
        .into_iter()
        .map(|beat| {
            let start = beat.tick;
            let end = beat.tick + tpq;
            let mut sounding = [false; 12];
            let mut any = false;
            for note in &score.notes {
                if note.onset < end && note.offset() > start {
                    sounding[note.pitch_class() as usize] = true;
                    any = true;
                }
                if note.onset >= end {
                    break;
                }
            }
            let chord = if any { best_template(&sounding) } else { Chord::Rest };
            ChordSymbol { bar_index: beat.bar_index, beat_index: beat.beat_index, chord }
        })
        .collect()
}

fn best_template(sounding: &[bool; 12]) -> Chord {
    let mut best = CHORD_TEMPLATES[0];
    let mut best_score = f64::NEG_INFINITY;
    for &template in &CHORD_TEMPLATES {
        let s = template_score(template, sounding);
        if s > best_score {
            best_score = s;
            best = template;
        }
    }
    Chord::Sounding { root: best.root, quality: best.quality }
}
