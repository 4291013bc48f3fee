//! Standard MIDI File writer (format 1) and reader (formats 0 and 1).
//!
//! The writer emits a conductor track holding the tempo, then one track per
//! channel in ascending channel order. Note-offs are explicit `0x8n` events
//! and running status is never used. The reader accepts running status,
//! velocity-0 note-ons, tempo maps, and skips sysex, unknown meta events and
//! unknown chunks.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NoteEvent;
use crate::mapping::round_half_up;

/// Largest value a variable-length quantity can hold.
pub const MAX_VLQ: u32 = 0x0FFF_FFFF;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmfConfig {
    #[serde(default = "default_tpq")]
    pub ticks_per_quarter: u16,
    #[serde(default = "default_tempo")]
    pub tempo_us_per_quarter: u32,
}

fn default_tpq() -> u16 {
    480
}

fn default_tempo() -> u32 {
    500_000
}

impl Default for SmfConfig {
    fn default() -> Self {
        SmfConfig { ticks_per_quarter: default_tpq(), tempo_us_per_quarter: default_tempo() }
    }
}

impl SmfConfig {
    pub fn check(&self) -> Result<(), SmfError> {
        if !(24..=32767).contains(&self.ticks_per_quarter) {
            return Err(SmfError::config(format!("ticks_per_quarter {} not in 24..32767", self.ticks_per_quarter)));
        }
        if self.tempo_us_per_quarter == 0 || self.tempo_us_per_quarter > 0xFF_FFFF {
            return Err(SmfError::config(format!("tempo {} not in 1..16777215", self.tempo_us_per_quarter)));
        }
        Ok(())
    }

    /// Length of one tick in whole milliseconds, rounded up.
    pub fn ms_per_tick_ceil(&self) -> u64 {
        let num = u64::from(self.tempo_us_per_quarter);
        let den = 1000 * u64::from(self.ticks_per_quarter);
        num.div_ceil(den)
    }
}

pub fn ms_to_ticks(ms: u64, c: &SmfConfig) -> u64 {
    round_half_up(ms * 1000 * u64::from(c.ticks_per_quarter), u64::from(c.tempo_us_per_quarter))
}

pub fn ticks_to_ms(ticks: u64, c: &SmfConfig) -> u64 {
    round_half_up(ticks * u64::from(c.tempo_us_per_quarter), 1000 * u64::from(c.ticks_per_quarter))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmfErrorKind {
    BadMagic,
    BadHeaderLength(u32),
    UnsupportedFormat(u16),
    SmpteDivision,
    ZeroDivision,
    Truncated(&'static str),
    ChunkOverrun { declared: u32, available: usize },
    VlqTooLong,
    MissingStatus,
    UnexpectedStatus(u8),
    DataByteHighBit(u8),
    TooManyChannels(u8),
    Unordered { index: usize },
    TimeOverflow(u64),
    Config(String),
}

impl fmt::Display for SmfErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmfErrorKind::BadMagic => f.write_str("missing MThd header"),
            SmfErrorKind::BadHeaderLength(n) => write!(f, "header chunk length {n}, expected at least 6"),
            SmfErrorKind::UnsupportedFormat(n) => write!(f, "unsupported SMF format {n}"),
            SmfErrorKind::SmpteDivision => f.write_str("SMPTE time division is not supported"),
            SmfErrorKind::ZeroDivision => f.write_str("ticks per quarter note is zero"),
            SmfErrorKind::Truncated(what) => write!(f, "truncated {what}"),
            SmfErrorKind::ChunkOverrun { declared, available } => {
                write!(f, "chunk declares {declared} bytes but only {available} remain")
            }
            SmfErrorKind::VlqTooLong => f.write_str("variable-length quantity longer than 4 bytes"),
            SmfErrorKind::MissingStatus => f.write_str("data byte with no running status"),
            SmfErrorKind::UnexpectedStatus(s) => write!(f, "unexpected status byte {s:#04x}"),
            SmfErrorKind::DataByteHighBit(b) => write!(f, "data byte {b:#04x} has the high bit set"),
            SmfErrorKind::TooManyChannels(v) => write!(f, "voice {v} has no MIDI channel (max 15)"),
            SmfErrorKind::Unordered { index } => write!(f, "event {index} starts before its predecessor"),
            SmfErrorKind::TimeOverflow(t) => write!(f, "tick delta {t} exceeds the variable-length limit"),
            SmfErrorKind::Config(msg) => f.write_str(msg),
        }
    }
}

/// Parse and write errors. `offset` is the byte position for parse errors
/// and the event index for write errors.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("at offset {offset}: {kind}")]
pub struct SmfError {
    pub offset: usize,
    pub kind: SmfErrorKind,
}

impl SmfError {
    fn at(offset: usize, kind: SmfErrorKind) -> Self {
        SmfError { offset, kind }
    }

    fn config(msg: String) -> Self {
        SmfError { offset: 0, kind: SmfErrorKind::Config(msg) }
    }
}

pub fn write_vlq(out: &mut Vec<u8>, value: u32) {
    debug_assert!(value <= MAX_VLQ);
    let mut groups = [0u8; 4];
    let mut n = 0;
    let mut v = value;
    loop {
        groups[n] = (v & 0x7F) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { groups[i] | 0x80 } else { groups[i] });
    }
}

fn chunk(out: &mut Vec<u8>, tag: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

/// (tick, class, sequence, bytes); class 0 = note-off, 1 = cc, 2 = note-on.
type TrackItem = (u64, u8, usize, [u8; 3]);

pub fn write_smf(events: &[NoteEvent], c: &SmfConfig) -> Result<Vec<u8>, SmfError> {
    c.check()?;
    let mut per_channel: BTreeMap<u8, Vec<TrackItem>> = BTreeMap::new();
    let mut last_onset = 0;
    for (i, e) in events.iter().enumerate() {
        if e.voice > 15 {
            return Err(SmfError::at(i, SmfErrorKind::TooManyChannels(e.voice)));
        }
        if e.t_ms < last_onset {
            return Err(SmfError::at(i, SmfErrorKind::Unordered { index: i }));
        }
        last_onset = e.t_ms;
        let ch = e.voice;
        let on = ms_to_ticks(e.t_ms, c);
        // A note never collapses to zero length, or its off would sort first.
        let off = ms_to_ticks(e.t_ms + u64::from(e.duration_ms), c).max(on + 1);
        let list = per_channel.entry(ch).or_default();
        list.push((on, 2, i, [0x90 | ch, e.midi_note & 0x7F, e.midi_velocity.clamp(1, 127)]));
        list.push((off, 0, i, [0x80 | ch, e.midi_note & 0x7F, 0x40]));
        for cc in &e.cc {
            list.push((on, 1, i, [0xB0 | ch, cc.number & 0x7F, cc.value & 0x7F]));
        }
    }

    let mut out = Vec::new();
    let mut header = Vec::with_capacity(6);
    header.extend_from_slice(&1u16.to_be_bytes());
    header.extend_from_slice(&(1 + per_channel.len() as u16).to_be_bytes());
    header.extend_from_slice(&c.ticks_per_quarter.to_be_bytes());
    chunk(&mut out, b"MThd", &header);

    let tempo = c.tempo_us_per_quarter.to_be_bytes();
    chunk(&mut out, b"MTrk", &[0x00, 0xFF, 0x51, 0x03, tempo[1], tempo[2], tempo[3], 0x00, 0xFF, 0x2F, 0x00]);

    for (_, mut list) in per_channel {
        list.sort_by_key(|&(tick, class, seq, _)| (tick, class, seq));
        let mut body = Vec::with_capacity(list.len() * 4 + 4);
        let mut prev = 0u64;
        for (tick, _, seq, bytes) in list {
            let delta = tick - prev;
            if delta > u64::from(MAX_VLQ) {
                return Err(SmfError::at(seq, SmfErrorKind::TimeOverflow(delta)));
            }
            write_vlq(&mut body, delta as u32);
            body.extend_from_slice(&bytes);
            prev = tick;
        }
        body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
        chunk(&mut out, b"MTrk", &body);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParsedNote {
    pub onset_ms: u64,
    pub channel: u8,
    pub note: u8,
    pub velocity: u8,
    pub duration_ms: u64,
    pub onset_tick: u64,
    pub duration_ticks: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParsedControl {
    pub onset_ms: u64,
    pub channel: u8,
    pub controller: u8,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmfDiagnostic {
    UnmatchedNoteOn { channel: u8, note: u8, tick: u64 },
    UnmatchedNoteOff { channel: u8, note: u8, tick: u64 },
    /// A note-on arrived while the same channel and note was still sounding;
    /// offs are matched first-on first-off.
    OverlappingNote { channel: u8, note: u8, tick: u64 },
    TrackCountMismatch { declared: u16, found: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParsedMidi {
    pub format: u16,
    pub ticks_per_quarter: u16,
    /// Ordered by note-on position in the merged timeline.
    pub notes: Vec<ParsedNote>,
    pub controls: Vec<ParsedControl>,
    pub diagnostics: Vec<SmfDiagnostic>,
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8], base: usize) -> Self {
        Reader { data, pos: 0, base }
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn at_end(&self) -> bool {
        self.pos >= self.data.len()
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, SmfError> {
        let b = *self.data.get(self.pos).ok_or_else(|| SmfError::at(self.offset(), SmfErrorKind::Truncated(what)))?;
        self.pos += 1;
        Ok(b)
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    fn data_byte(&mut self) -> Result<u8, SmfError> {
        let at = self.offset();
        let b = self.u8("channel message")?;
        if b & 0x80 != 0 {
            return Err(SmfError::at(at, SmfErrorKind::DataByteHighBit(b)));
        }
        Ok(b)
    }

    fn bytes(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], SmfError> {
        if self.data.len() - self.pos < n {
            return Err(SmfError::at(self.offset(), SmfErrorKind::Truncated(what)));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn vlq(&mut self) -> Result<u32, SmfError> {
        let start = self.offset();
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8("variable-length quantity")?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(SmfError::at(start, SmfErrorKind::VlqTooLong))
    }
}

#[derive(Clone, Copy)]
enum TrackEvent {
    NoteOn { channel: u8, note: u8, velocity: u8 },
    NoteOff { channel: u8, note: u8 },
    Control { channel: u8, controller: u8, value: u8 },
    Tempo(u32),
}

fn parse_track(data: &[u8], base: usize, track: usize, out: &mut Vec<(u64, usize, usize, TrackEvent)>) -> Result<(), SmfError> {
    let mut r = Reader::new(data, base);
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut seq = 0;
    while !r.at_end() {
        tick += u64::from(r.vlq()?);
        let status_at = r.offset();
        let status = match r.peek() {
            Some(b) if b & 0x80 != 0 => {
                r.pos += 1;
                b
            }
            Some(_) => running.ok_or_else(|| SmfError::at(status_at, SmfErrorKind::MissingStatus))?,
            None => return Err(SmfError::at(status_at, SmfErrorKind::Truncated("event"))),
        };
        let mut push = |ev| {
            out.push((tick, track, seq, ev));
            seq += 1;
        };
        match status {
            0x80..=0xEF => {
                running = Some(status);
                let channel = status & 0x0F;
                let a = r.data_byte()?;
                let b = if matches!(status & 0xF0, 0xC0 | 0xD0) { 0 } else { r.data_byte()? };
                match status & 0xF0 {
                    0x80 => push(TrackEvent::NoteOff { channel, note: a }),
                    0x90 if b == 0 => push(TrackEvent::NoteOff { channel, note: a }),
                    0x90 => push(TrackEvent::NoteOn { channel, note: a, velocity: b }),
                    0xB0 => push(TrackEvent::Control { channel, controller: a, value: b }),
                    _ => {}
                }
            }
            0xFF => {
                running = None;
                let kind = r.u8("meta event")?;
                let len = r.vlq()? as usize;
                let body = r.bytes(len, "meta event")?;
                match kind {
                    0x51 if len == 3 => {
                        push(TrackEvent::Tempo(u32::from_be_bytes([0, body[0], body[1], body[2]])));
                    }
                    0x2F => break,
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = r.vlq()? as usize;
                r.bytes(len, "sysex event")?;
            }
            other => return Err(SmfError::at(status_at, SmfErrorKind::UnexpectedStatus(other))),
        }
    }
    Ok(())
}

/// Tick to millisecond conversion through a tempo map.
struct TempoMap {
    tpq: u64,
    /// (start tick, elapsed microseconds * tpq at start tick, tempo)
    segments: Vec<(u64, u128, u64)>,
}

impl TempoMap {
    fn new(tpq: u16, mut changes: Vec<(u64, u32)>) -> Self {
        changes.sort_by_key(|&(t, _)| t);
        let mut segments = vec![(0u64, 0u128, 500_000u64)];
        for (tick, tempo) in changes {
            let &(start, acc, cur) = segments.last().unwrap();
            let acc = acc + u128::from(tick - start) * u128::from(cur);
            if tick == start {
                segments.pop();
            }
            segments.push((tick, acc, u64::from(tempo.max(1))));
        }
        TempoMap { tpq: u64::from(tpq), segments }
    }

    fn ms(&self, tick: u64) -> u64 {
        let i = self.segments.partition_point(|&(start, _, _)| start <= tick) - 1;
        let (start, acc, tempo) = self.segments[i];
        let total = acc + u128::from(tick - start) * u128::from(tempo);
        let den = 1000 * u128::from(self.tpq);
        ((2 * total + den) / (2 * den)) as u64
    }
}

pub fn read_smf(bytes: &[u8]) -> Result<ParsedMidi, SmfError> {
    let mut r = Reader::new(bytes, 0);
    if r.bytes(4, "header").map_err(|_| SmfError::at(0, SmfErrorKind::BadMagic))? != b"MThd" {
        return Err(SmfError::at(0, SmfErrorKind::BadMagic));
    }
    let len = u32::from_be_bytes(r.bytes(4, "header length")?.try_into().unwrap());
    if len < 6 {
        return Err(SmfError::at(4, SmfErrorKind::BadHeaderLength(len)));
    }
    let header_at = r.offset();
    let header = r.bytes(len as usize, "header chunk").map_err(|_| {
        SmfError::at(header_at, SmfErrorKind::ChunkOverrun { declared: len, available: bytes.len() - header_at })
    })?;
    let format = u16::from_be_bytes([header[0], header[1]]);
    let declared_tracks = u16::from_be_bytes([header[2], header[3]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(SmfError::at(header_at, SmfErrorKind::UnsupportedFormat(format)));
    }
    if division & 0x8000 != 0 {
        return Err(SmfError::at(header_at + 4, SmfErrorKind::SmpteDivision));
    }
    if division == 0 {
        return Err(SmfError::at(header_at + 4, SmfErrorKind::ZeroDivision));
    }

    let mut raw = Vec::new();
    let mut tracks = 0;
    while !r.at_end() {
        let chunk_at = r.offset();
        let tag: [u8; 4] = r.bytes(4, "chunk header")?.try_into().unwrap();
        let len = u32::from_be_bytes(r.bytes(4, "chunk header")?.try_into().unwrap());
        let body_at = r.offset();
        let available = bytes.len() - body_at;
        if len as usize > available {
            return Err(SmfError::at(chunk_at, SmfErrorKind::ChunkOverrun { declared: len, available }));
        }
        let body = r.bytes(len as usize, "chunk")?;
        if &tag == b"MTrk" {
            parse_track(body, body_at, tracks, &mut raw)?;
            tracks += 1;
        }
    }

    let mut diagnostics = Vec::new();
    if tracks != usize::from(declared_tracks) {
        diagnostics.push(SmfDiagnostic::TrackCountMismatch { declared: declared_tracks, found: tracks });
    }

    raw.sort_by_key(|&(tick, track, seq, _)| (tick, track, seq));
    let tempos = raw
        .iter()
        .filter_map(|&(tick, _, _, ev)| match ev {
            TrackEvent::Tempo(t) => Some((tick, t)),
            _ => None,
        })
        .collect();
    let map = TempoMap::new(division, tempos);

    let mut notes: Vec<Option<ParsedNote>> = Vec::new();
    let mut sounding: BTreeMap<(u8, u8), VecDeque<usize>> = BTreeMap::new();
    let mut controls = Vec::new();
    for &(tick, _, _, ev) in &raw {
        match ev {
            TrackEvent::NoteOn { channel, note, velocity } => {
                let queue = sounding.entry((channel, note)).or_default();
                if !queue.is_empty() {
                    diagnostics.push(SmfDiagnostic::OverlappingNote { channel, note, tick });
                }
                queue.push_back(notes.len());
                notes.push(Some(ParsedNote {
                    onset_ms: map.ms(tick),
                    channel,
                    note,
                    velocity,
                    duration_ms: 0,
                    onset_tick: tick,
                    duration_ticks: 0,
                }));
            }
            TrackEvent::NoteOff { channel, note } => {
                match sounding.get_mut(&(channel, note)).and_then(VecDeque::pop_front) {
                    Some(i) => {
                        let n = notes[i].as_mut().unwrap();
                        n.duration_ticks = tick - n.onset_tick;
                        n.duration_ms = map.ms(tick) - n.onset_ms;
                    }
                    None => diagnostics.push(SmfDiagnostic::UnmatchedNoteOff { channel, note, tick }),
                }
            }
            TrackEvent::Control { channel, controller, value } => {
                controls.push(ParsedControl { onset_ms: map.ms(tick), channel, controller, value });
            }
            TrackEvent::Tempo(_) => {}
        }
    }
    for ((channel, note), queue) in sounding {
        for i in queue {
            let tick = notes[i].take().unwrap().onset_tick;
            diagnostics.push(SmfDiagnostic::UnmatchedNoteOn { channel, note, tick });
        }
    }

    Ok(ParsedMidi {
        format,
        ticks_per_quarter: division,
        notes: notes.into_iter().flatten().collect(),
        controls,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{CcValue, RawQuartet};

    fn note(t: u64, voice: u8, pitch: u8, vel: u8, dur: u32) -> NoteEvent {
        NoteEvent {
            t_ms: t,
            voice,
            midi_note: pitch,
            midi_velocity: vel,
            duration_ms: dur,
            raw: RawQuartet { p: 1, v: 1, d: 1, ed: 1 },
            cc: vec![],
        }
    }

    #[test]
    fn tick_conversions() {
        let c = SmfConfig::default();
        assert_eq!(ms_to_ticks(500, &c), 480);
        assert_eq!(ms_to_ticks(0, &c), 0);
        assert_eq!(ms_to_ticks(333, &c), 320);
        assert_eq!(ticks_to_ms(480, &c), 500);
        assert_eq!(ticks_to_ms(320, &c), 333);
    }

    #[test]
    fn vlq_encoding() {
        let cases: [(u32, &[u8]); 6] = [
            (0, &[0x00]),
            (0x40, &[0x40]),
            (0x7F, &[0x7F]),
            (0x80, &[0x81, 0x00]),
            (0x2000, &[0xC0, 0x00]),
            (0x0FFF_FFFF, &[0xFF, 0xFF, 0xFF, 0x7F]),
        ];
        for (v, bytes) in cases {
            let mut out = Vec::new();
            write_vlq(&mut out, v);
            assert_eq!(out, bytes);
            assert_eq!(Reader::new(bytes, 0).vlq().unwrap(), v);
        }
        assert_eq!(Reader::new(&[0x81, 0x80], 0).vlq().unwrap_err().kind, SmfErrorKind::Truncated("variable-length quantity"));
        assert_eq!(Reader::new(&[0xFF, 0xFF, 0xFF, 0xFF, 0x7F], 0).vlq().unwrap_err().kind, SmfErrorKind::VlqTooLong);
    }

    #[test]
    fn empty_stream() {
        let bytes = write_smf(&[], &SmfConfig::default()).unwrap();
        assert_eq!(&bytes[..8], &[0x4D, 0x54, 0x68, 0x64, 0, 0, 0, 6]);
        assert_eq!(&bytes[8..14], &[0, 1, 0, 1, 0x01, 0xE0]);
        let parsed = read_smf(&bytes).unwrap();
        assert!(parsed.notes.is_empty());
        assert!(parsed.diagnostics.is_empty());
    }

    #[test]
    fn single_note_bytes() {
        let bytes = write_smf(&[note(0, 0, 60, 100, 500)], &SmfConfig::default()).unwrap();
        // header (14) + conductor (8 + 11)
        let track = &bytes[33..];
        assert_eq!(&track[..4], b"MTrk");
        let len = u32::from_be_bytes(track[4..8].try_into().unwrap()) as usize;
        assert_eq!(track.len(), 8 + len);
        assert_eq!(&track[8..], &[0x00, 0x90, 60, 100, 0x83, 0x60, 0x80, 60, 0x40, 0x00, 0xFF, 0x2F, 0x00]);
    }

    #[test]
    fn running_status_matches_explicit() {
        let explicit: &[u8] = &[0x00, 0x91, 60, 90, 0x10, 0x91, 64, 80, 0x20, 0x81, 60, 0, 0x00, 0x81, 64, 0, 0x00, 0xFF, 0x2F, 0x00];
        let running: &[u8] = &[0x00, 0x91, 60, 90, 0x10, 64, 80, 0x20, 0x91, 60, 0, 0x00, 64, 0, 0x00, 0xFF, 0x2F, 0x00];
        let wrap = |track: &[u8]| {
            let mut out = Vec::new();
            chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
            chunk(&mut out, b"MTrk", track);
            out
        };
        let a = read_smf(&wrap(explicit)).unwrap();
        let b = read_smf(&wrap(running)).unwrap();
        assert_eq!(a.notes, b.notes);
        assert_eq!(a.notes.len(), 2);
        assert_eq!(a.notes[0].channel, 1);
        assert_eq!(a.notes[1].duration_ticks, 0x20);
    }

    #[test]
    fn velocity_zero_is_note_off() {
        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
        chunk(&mut out, b"MTrk", &[0x00, 0x90, 60, 100, 0x83, 0x60, 0x90, 60, 0, 0x00, 0xFF, 0x2F, 0x00]);
        let p = read_smf(&out).unwrap();
        assert_eq!(p.notes.len(), 1);
        assert_eq!(p.notes[0].duration_ms, 500);
        assert!(p.diagnostics.is_empty());
    }

    #[test]
    fn tempo_map_applies() {
        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 1, 0, 1, 0x01, 0xE0]);
        // 480 ticks at 500000 us, then tempo 1000000: next 480 ticks = 1000 ms
        chunk(
            &mut out,
            b"MTrk",
            &[0x00, 0x90, 60, 100, 0x83, 0x60, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40, 0x83, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00],
        );
        let p = read_smf(&out).unwrap();
        assert_eq!(p.notes[0].duration_ms, 1500);
    }

    #[test]
    fn unmatched_and_overlapping_are_reported() {
        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
        chunk(
            &mut out,
            b"MTrk",
            &[0x00, 0x90, 60, 100, 0x10, 0x90, 60, 90, 0x10, 0x80, 60, 0, 0x00, 0x80, 62, 0, 0x00, 0xFF, 0x2F, 0x00],
        );
        let p = read_smf(&out).unwrap();
        assert_eq!(p.notes.len(), 1);
        assert_eq!(p.notes[0].velocity, 100, "first on matches first off");
        assert!(p.diagnostics.contains(&SmfDiagnostic::OverlappingNote { channel: 0, note: 60, tick: 0x10 }));
        assert!(p.diagnostics.contains(&SmfDiagnostic::UnmatchedNoteOff { channel: 0, note: 62, tick: 0x20 }));
        assert!(p.diagnostics.contains(&SmfDiagnostic::UnmatchedNoteOn { channel: 0, note: 60, tick: 0x10 }));
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(read_smf(b"RIFF").unwrap_err().kind, SmfErrorKind::BadMagic);
        assert_eq!(read_smf(b"MThd\0\0\0\x02\0\0").unwrap_err().kind, SmfErrorKind::BadHeaderLength(2));
        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 2, 0, 1, 0x01, 0xE0]);
        assert_eq!(read_smf(&out).unwrap_err().kind, SmfErrorKind::UnsupportedFormat(2));

        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
        out.extend_from_slice(b"MTrk\0\0\0\x10\0\x90");
        let err = read_smf(&out).unwrap_err();
        assert_eq!(err.offset, 14);
        assert!(matches!(err.kind, SmfErrorKind::ChunkOverrun { declared: 16, available: 2 }));

        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
        chunk(&mut out, b"MTrk", &[0x00, 60, 100]);
        let err = read_smf(&out).unwrap_err();
        assert_eq!((err.offset, err.kind), (23, SmfErrorKind::MissingStatus));

        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 0, 0, 1, 0x01, 0xE0]);
        chunk(&mut out, b"MTrk", &[0x00, 0x90, 60]);
        assert!(matches!(read_smf(&out).unwrap_err().kind, SmfErrorKind::Truncated(_)));
    }

    #[test]
    fn writer_rejects_bad_streams() {
        let c = SmfConfig::default();
        assert!(matches!(write_smf(&[note(0, 16, 60, 1, 1)], &c).unwrap_err().kind, SmfErrorKind::TooManyChannels(16)));
        assert!(matches!(
            write_smf(&[note(10, 0, 60, 1, 1), note(5, 1, 60, 1, 1)], &c).unwrap_err().kind,
            SmfErrorKind::Unordered { index: 1 }
        ));
        let huge = note(u64::from(MAX_VLQ) * 2, 0, 60, 1, 1);
        assert!(matches!(write_smf(&[huge], &c).unwrap_err().kind, SmfErrorKind::TimeOverflow(_)));
    }

    #[test]
    fn cc_events_are_written_and_read() {
        let mut e = note(100, 3, 60, 50, 100);
        e.cc = vec![CcValue { number: 74, value: 64 }];
        let bytes = write_smf(&[e], &SmfConfig::default()).unwrap();
        let p = read_smf(&bytes).unwrap();
        assert_eq!(p.controls, vec![ParsedControl { onset_ms: 100, channel: 3, controller: 74, value: 64 }]);
    }

    #[test]
    fn unknown_chunks_and_meta_skipped() {
        let mut out = Vec::new();
        chunk(&mut out, b"MThd", &[0, 1, 0, 1, 0x01, 0xE0]);
        chunk(&mut out, b"XFIH", &[1, 2, 3]);
        chunk(&mut out, b"MTrk", &[0x00, 0xFF, 0x03, 0x02, b'h', b'i', 0x00, 0xF0, 0x02, 0x7E, 0xF7, 0x00, 0x90, 60, 1, 0x10, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00]);
        let p = read_smf(&out).unwrap();
        assert_eq!(p.notes.len(), 1);
    }
}
