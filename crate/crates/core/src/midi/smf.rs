//! Standard MIDI File reader and writer.
//!
//! Reads SMF type 0 and type 1 (big-endian chunk lengths, variable-length
//! delta times), flattening every track into the single note list of a
//! [`Score`]. Writes canonical type-0 files. Channel and program data are
//! discarded: the corpus is single-instrument piano.

use std::collections::BTreeMap;

use super::{normalize_overlaps, sort_notes, MidiError, NoteEvent, Score};

const DEFAULT_TEMPO_US: u32 = 500_000; // 120 BPM

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn err(&self, what: impl Into<String>) -> MidiError {
        MidiError::Malformed { offset: self.pos, what: what.into() }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        let b = *self.data.get(self.pos).ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(b)
    }

    fn u16_be(&mut self) -> Result<u16, MidiError> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }

    fn u32_be(&mut self) -> Result<u32, MidiError> {
        Ok(u32::from_be_bytes([self.u8()?, self.u8()?, self.u8()?, self.u8()?]))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.remaining() < n {
            return Err(self.err(format!("need {n} bytes, have {}", self.remaining())));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Variable-length quantity, at most 4 bytes per the SMF spec.
    fn vlq(&mut self) -> Result<u32, MidiError> {
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.err("variable-length quantity longer than 4 bytes"))
    }
}

/// Parses an SMF type-0 or type-1 file into a [`Score`].
///
/// All tracks are merged into one ordered note list. The first tempo and
/// time-signature events are honored; later changes are ignored with a
/// warning. Unmatched note-ons are dropped with a warning.
pub fn parse_midi(bytes: &[u8]) -> Result<Score, MidiError> {
    let mut cur = Cursor::new(bytes);

    if cur.bytes(4)? != b"MThd" {
        return Err(MidiError::Malformed { offset: 0, what: "missing MThd chunk".into() });
    }
    let header_len = cur.u32_be()?;
    if header_len < 6 {
        return Err(cur.err(format!("header length {header_len} < 6")));
    }
    let format = cur.u16_be()?;
    if format > 1 {
        return Err(MidiError::Unsupported(format!("SMF format {format}")));
    }
    let ntrks = cur.u16_be()?;
    let division = cur.u16_be()?;
    if division & 0x8000 != 0 {
        return Err(MidiError::Unsupported("SMPTE time division".into()));
    }
    if division == 0 {
        return Err(cur.err("zero ticks per quarter"));
    }
    cur.bytes(header_len as usize - 6)?;

    // (tick, track, seq) keys make "first event" well defined across tracks.
    type EventKey = (u32, usize, usize);
    let mut notes: Vec<NoteEvent> = Vec::new();
    let mut tempo_events: Vec<(EventKey, u32)> = Vec::new();
    let mut timesig_events: Vec<(EventKey, (u8, u8))> = Vec::new();
    let mut dropped = 0usize;

    for track_idx in 0..ntrks as usize {
        if cur.remaining() == 0 {
            log::warn!("MIDI header promises {ntrks} tracks, found {track_idx}");
            break;
        }
        if cur.bytes(4)? != b"MTrk" {
            return Err(MidiError::Malformed {
                offset: cur.pos - 4,
                what: "expected MTrk chunk".into(),
            });
        }
        let track_len = cur.u32_be()? as usize;
        if cur.remaining() < track_len {
            return Err(cur.err(format!("track length {track_len} exceeds file size")));
        }
        let track_end = cur.pos + track_len;

        let mut tick: u64 = 0;
        let mut running_status: Option<u8> = None;
        let mut seq = 0usize;
        // At most one sounding note per pitch: a retrigger closes the old one.
        let mut open: BTreeMap<u8, (u32, u8)> = BTreeMap::new();

        while cur.pos < track_end {
            tick += cur.vlq()? as u64;
            let tick32 = u32::try_from(tick).map_err(|_| cur.err("tick overflow"))?;
            seq += 1;

            let first = cur.u8()?;
            let status = if first & 0x80 != 0 {
                if first < 0xf0 {
                    running_status = Some(first);
                }
                first
            } else {
                cur.pos -= 1;
                running_status.ok_or_else(|| cur.err("data byte without running status"))?
            };

            match status & 0xf0 {
                0x80 | 0x90 => {
                    let pitch = cur.u8()? & 0x7f;
                    let velocity = cur.u8()? & 0x7f;
                    let is_on = status & 0xf0 == 0x90 && velocity > 0;
                    let closed = if is_on {
                        open.insert(pitch, (tick32, velocity))
                    } else {
                        open.remove(&pitch)
                        // A note-off without a matching note-on is skipped.
                    };
                    if let Some((onset, vel)) = closed {
                        if tick32 > onset {
                            notes.push(NoteEvent::new(onset, tick32 - onset, pitch, vel));
                        } else {
                            dropped += 1;
                        }
                    }
                }
                0xa0 | 0xb0 | 0xe0 => {
                    cur.bytes(2)?;
                }
                0xc0 | 0xd0 => {
                    cur.bytes(1)?;
                }
                0xf0 => match status {
                    0xff => {
                        let meta = cur.u8()?;
                        let len = cur.vlq()? as usize;
                        let data = cur.bytes(len)?;
                        match meta {
                            0x51 if len == 3 => {
                                let us = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                                tempo_events.push(((tick32, track_idx, seq), us.max(1)));
                            }
                            0x58 if len >= 2 => {
                                let num = data[0];
                                let den = 1u16 << data[1].min(15);
                                if let Ok(den8) = u8::try_from(den) {
                                    if matches!(den8, 2 | 4 | 8) {
                                        timesig_events.push(((tick32, track_idx, seq), (num, den8)));
                                    } else {
                                        log::warn!("ignoring time signature {num}/{den8}");
                                    }
                                } else {
                                    log::warn!("ignoring time signature with denominator {den}");
                                }
                            }
                            0x2f => break,
                            _ => {}
                        }
                    }
                    0xf0 | 0xf7 => {
                        let len = cur.vlq()? as usize;
                        cur.bytes(len)?;
                        running_status = None;
                    }
                    other => {
                        return Err(cur.err(format!("unexpected status byte {other:#04x}")));
                    }
                },
                _ => unreachable!("status high nibble covered above"),
            }
        }

        dropped += open.len();
        cur.pos = track_end;
    }

    if dropped > 0 {
        log::warn!("dropped {dropped} unmatched or zero-length notes");
    }

    tempo_events.sort_by_key(|(k, _)| *k);
    timesig_events.sort_by_key(|(k, _)| *k);
    if tempo_events.len() > 1 {
        log::warn!("ignoring {} later tempo changes", tempo_events.len() - 1);
    }
    if timesig_events.len() > 1 {
        log::warn!("ignoring {} later time-signature changes", timesig_events.len() - 1);
    }
    let tempo_us = tempo_events.first().map(|&(_, us)| us).unwrap_or(DEFAULT_TEMPO_US);
    let time_signature = timesig_events.first().map(|&(_, ts)| ts).unwrap_or((4, 4));

    sort_notes(&mut notes);
    Ok(Score {
        ticks_per_quarter: division as u32,
        tempo_bpm: 60_000_000.0 / tempo_us as f64,
        time_signature,
        notes,
    })
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 4];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(stack[i] | if i > 0 { 0x80 } else { 0 });
    }
}

/// Serializes a [`Score`] as a canonical SMF type-0 file.
///
/// Same-pitch overlaps are normalized first (see [`normalize_overlaps`]);
/// the written event order is deterministic, with note-offs before note-ons
/// at equal ticks, so `parse_midi(write_midi(s))` reproduces the normalized
/// `s` exactly — the identity for any score without same-pitch overlap.
pub fn write_midi(score: &Score) -> Vec<u8> {
    let score = normalize_overlaps(score);
    // kind 0 = note-off, 1 = note-on; sorting the tuples yields the order above.
    let mut events: Vec<(u32, u8, u8, u8)> = Vec::with_capacity(score.notes.len() * 2);
    for note in &score.notes {
        events.push((note.onset, 1, note.pitch, note.velocity));
        events.push((note.offset(), 0, note.pitch, 0));
    }
    events.sort();

    let mut track: Vec<u8> = Vec::new();
    // Time signature: nn, dd as a power of two, 24 clocks/metronome, 8 32nds/quarter.
    let (num, den) = score.time_signature;
    track.push(0);
    track.extend_from_slice(&[0xff, 0x58, 0x04, num, den.trailing_zeros() as u8, 24, 8]);
    let tempo_us = (60_000_000.0 / score.tempo_bpm).round().max(1.0) as u32;
    track.push(0);
    track.extend_from_slice(&[0xff, 0x51, 0x03]);
    track.extend_from_slice(&tempo_us.to_be_bytes()[1..]);

    let mut last_tick = 0u32;
    for (tick, kind, pitch, velocity) in events {
        push_vlq(&mut track, tick - last_tick);
        last_tick = tick;
        match kind {
            1 => track.extend_from_slice(&[0x90, pitch, velocity]),
            _ => track.extend_from_slice(&[0x80, pitch, 0]),
        }
    }
    track.push(0);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(score.ticks_per_quarter as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_note_file() -> Vec<u8> {
        let score = Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 480, 60, 64)]);
        write_midi(&score)
    }

    #[test]
    fn parses_single_note_file() {
        let score = parse_midi(&single_note_file()).unwrap();
        assert_eq!(score.ticks_per_quarter, 480);
        assert_eq!(score.tempo_bpm, 120.0);
        assert_eq!(score.time_signature, (4, 4));
        assert_eq!(score.notes, vec![NoteEvent::new(0, 480, 60, 64)]);
    }

    #[test]
    fn parses_empty_score() {
        let empty = write_midi(&Score::empty(480, 120.0));
        let score = parse_midi(&empty).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn missing_header_reports_offset_zero() {
        let err = parse_midi(b"RIFFxxxx").unwrap_err();
        match err {
            MidiError::Malformed { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_track_is_an_error_not_a_panic() {
        let mut bytes = single_note_file();
        bytes.truncate(bytes.len() - 5);
        assert!(parse_midi(&bytes).is_err());
    }

    #[test]
    fn note_on_with_zero_velocity_ends_the_note() {
        let mut bytes = single_note_file();
        // Rewrite the 0x80 note-off as a 0x90 with velocity 0.
        let pos = bytes.iter().rposition(|&b| b == 0x80).unwrap();
        bytes[pos] = 0x90;
        let score = parse_midi(&bytes).unwrap();
        assert_eq!(score.notes.len(), 1);
        assert_eq!(score.notes[0].duration, 480);
    }

    #[test]
    fn unmatched_note_on_is_dropped() {
        let mut track: Vec<u8> = vec![0, 0x90, 60, 64];
        track.extend_from_slice(&[0, 0xff, 0x2f, 0x00]);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MThd");
        bytes.extend_from_slice(&6u32.to_be_bytes());
        bytes.extend_from_slice(&[0, 0, 0, 1]);
        bytes.extend_from_slice(&480u16.to_be_bytes());
        bytes.extend_from_slice(b"MTrk");
        bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&track);
        let score = parse_midi(&bytes).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn running_status_is_honored() {
        // note-on 60 then (running status) note-on 64, offs likewise.
        let mut track: Vec<u8> = vec![0, 0x90, 60, 64, 0, 64, 64];
        track.extend_from_slice(&[0x83, 0x60, 0x80, 60, 0, 0, 64, 0]); // delta 480
        track.extend_from_slice(&[0, 0xff, 0x2f, 0x00]);
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MThd");
        bytes.extend_from_slice(&6u32.to_be_bytes());
        bytes.extend_from_slice(&[0, 0, 0, 1]);
        bytes.extend_from_slice(&480u16.to_be_bytes());
        bytes.extend_from_slice(b"MTrk");
        bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&track);
        let score = parse_midi(&bytes).unwrap();
        assert_eq!(score.notes.len(), 2);
        assert_eq!(score.notes[0].pitch, 60);
        assert_eq!(score.notes[1].pitch, 64);
    }

    #[test]
    fn multi_track_files_are_merged() {
        let a = Score::from_notes(480, 120.0, vec![NoteEvent::new(0, 480, 60, 64)]);
        let b = Score::from_notes(480, 120.0, vec![NoteEvent::new(480, 480, 72, 64)]);
        let bytes_a = write_midi(&a);
        let bytes_b = write_midi(&b);
        // Stitch the two single-track files into one type-1 file.
        let track_a = &bytes_a[14..];
        let track_b = &bytes_b[14..];
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MThd");
        bytes.extend_from_slice(&6u32.to_be_bytes());
        bytes.extend_from_slice(&1u16.to_be_bytes());
        bytes.extend_from_slice(&2u16.to_be_bytes());
        bytes.extend_from_slice(&480u16.to_be_bytes());
        bytes.extend_from_slice(track_a);
        bytes.extend_from_slice(track_b);
        let score = parse_midi(&bytes).unwrap();
        assert_eq!(score.notes.len(), 2);
        assert_eq!(score.notes[0].pitch, 60);
        assert_eq!(score.notes[1].pitch, 72);
    }

    #[test]
    fn vlq_round_trip() {
        for value in [0u32, 1, 127, 128, 0x3fff, 0x4000, 0x0fff_ffff] {
            let mut buf = Vec::new();
            push_vlq(&mut buf, value);
            let mut cur = Cursor::new(&buf);
            assert_eq!(cur.vlq().unwrap(), value);
            assert_eq!(cur.remaining(), 0);
        }
    }
}
