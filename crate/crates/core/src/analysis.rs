//! Event distributions, Shannon entropy and behaviour classification.
//!
//! Probabilities and entropies are generic over the float type; see the
//! `f64` aliases at the crate root.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::NoteEvent;
use crate::mapping::round_half_up;
use crate::smf::ParsedMidi;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no events to analyse")]
    EmptySource,
    #[error("probabilities must be positive, got {0}")]
    NonPositive(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalised(f64),
    #[error("sequence of length {len} is shorter than max_period * min_repeats = {needed}")]
    SequenceTooShort { len: usize, needed: usize },
    #[error("max_period and min_repeats must be at least 1")]
    BadPeriodParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MusicalEventKey {
    Pitch,
    Duration,
    /// `(pitch, duration)` pair.
    Note,
}

impl MusicalEventKey {
    pub const ALL: [MusicalEventKey; 3] = [MusicalEventKey::Pitch, MusicalEventKey::Duration, MusicalEventKey::Note];

    pub fn name(self) -> &'static str {
        match self {
            MusicalEventKey::Pitch => "pitch",
            MusicalEventKey::Duration => "duration",
            MusicalEventKey::Note => "note",
        }
    }
}

impl std::str::FromStr for MusicalEventKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pitch" => Ok(MusicalEventKey::Pitch),
            "duration" => Ok(MusicalEventKey::Duration),
            "note" => Ok(MusicalEventKey::Note),
            other => Err(format!("unknown key `{other}` (expected pitch, duration or note)")),
        }
    }
}

impl fmt::Display for MusicalEventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Pitch(u8),
    Duration(u64),
    Note { pitch: u8, duration_ms: u64 },
    /// Outcome without musical meaning, for synthetic distributions.
    Label(u64),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pitch(p) => write!(f, "{p}"),
            Outcome::Duration(d) => write!(f, "{d}ms"),
            Outcome::Note { pitch, duration_ms } => write!(f, "{pitch}/{duration_ms}ms"),
            Outcome::Label(l) => write!(f, "#{l}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(format!("unknown log base `{other}` (expected 2 or e)")),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        })
    }
}

impl LogBase {
    fn log<F: Float>(self, x: F) -> F {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }
}

/// One observed note, reduced to what the distributions need.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoteSample {
    pub channel: u8,
    pub pitch: u8,
    pub duration_ms: u64,
}

/// Anything that yields note samples.
pub trait NoteSource {
    fn samples(&self) -> Vec<NoteSample>;
}

/// Engine streams keep exact durations.
impl NoteSource for [NoteEvent] {
    fn samples(&self) -> Vec<NoteSample> {
        self.iter()
            .map(|e| NoteSample { channel: e.voice, pitch: e.midi_note, duration_ms: u64::from(e.duration_ms) })
            .collect()
    }
}

impl NoteSource for Vec<NoteEvent> {
    fn samples(&self) -> Vec<NoteSample> {
        self.as_slice().samples()
    }
}

/// Step for quantising durations read from MIDI files.
pub const DURATION_QUANTUM_MS: u64 = 10;

/// Round to the nearest multiple of `DURATION_QUANTUM_MS`, halves up.
pub fn quantize_duration(ms: u64) -> u64 {
    round_half_up(ms, DURATION_QUANTUM_MS) * DURATION_QUANTUM_MS
}

/// Parsed files have tick-quantised timing, so durations are snapped to
/// 10 ms classes.
impl NoteSource for ParsedMidi {
    fn samples(&self) -> Vec<NoteSample> {
        self.notes
            .iter()
            .map(|n| NoteSample { channel: n.channel, pitch: n.note, duration_ms: quantize_duration(n.duration_ms) })
            .collect()
    }
}

/// Empirical distribution. Outcomes are kept in ascending order with
/// strictly positive probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct EventDistribution<F> {
    outcomes: Vec<(Outcome, F)>,
    counts: Option<Vec<u64>>,
    samples: u64,
}

impl<F: Float + FromPrimitive> EventDistribution<F> {
    pub fn from_counts(counts: &BTreeMap<Outcome, u64>) -> Result<Self, AnalysisError> {
        let n: u64 = counts.values().sum();
        if n == 0 {
            return Err(AnalysisError::EmptySource);
        }
        let nf = F::from_u64(n).unwrap();
        let mut outcomes = Vec::with_capacity(counts.len());
        let mut kept = Vec::with_capacity(counts.len());
        for (&o, &c) in counts.iter().filter(|(_, &c)| c > 0) {
            outcomes.push((o, F::from_u64(c).unwrap() / nf));
            kept.push(c);
        }
        Ok(EventDistribution { outcomes, counts: Some(kept), samples: n })
    }

    /// Synthetic distribution over labels `0..probs.len()`. Probabilities must
    /// be positive and sum to 1 within `1e-9`.
    pub fn from_probabilities(probs: &[F]) -> Result<Self, AnalysisError> {
        if probs.is_empty() {
            return Err(AnalysisError::EmptySource);
        }
        if let Some(p) = probs.iter().find(|&&p| p.partial_cmp(&F::zero()) != Some(std::cmp::Ordering::Greater)) {
            return Err(AnalysisError::NonPositive(p.to_f64().unwrap_or(f64::NAN)));
        }
        let total = neumaier_sum(probs.iter().copied());
        if (total - F::one()).abs() > F::from_f64(1e-9).unwrap() {
            return Err(AnalysisError::NotNormalised(total.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(EventDistribution {
            outcomes: probs.iter().enumerate().map(|(i, &p)| (Outcome::Label(i as u64), p)).collect(),
            counts: None,
            samples: probs.len() as u64,
        })
    }

    pub fn outcomes(&self) -> &[(Outcome, F)] {
        &self.outcomes
    }

    pub fn probability(&self, o: &Outcome) -> Option<F> {
        self.outcomes.iter().find(|(x, _)| x == o).map(|&(_, p)| p)
    }

    /// Number of distinct outcomes.
    pub fn support(&self) -> usize {
        self.outcomes.len()
    }

    pub fn sample_count(&self) -> u64 {
        self.samples
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }
}

fn neumaier_sum<F: Float>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

fn outcome_of(s: &NoteSample, key: MusicalEventKey) -> Outcome {
    match key {
        MusicalEventKey::Pitch => Outcome::Pitch(s.pitch),
        MusicalEventKey::Duration => Outcome::Duration(s.duration_ms),
        MusicalEventKey::Note => Outcome::Note { pitch: s.pitch, duration_ms: s.duration_ms },
    }
}

/// Counts outcomes over every sample. Order of samples is irrelevant.
pub fn count_events(samples: &[NoteSample], key: MusicalEventKey) -> BTreeMap<Outcome, u64> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(outcome_of(s, key)).or_insert(0) += 1;
    }
    counts
}

pub fn extract_events<F, S>(source: &S, key: MusicalEventKey) -> Result<EventDistribution<F>, AnalysisError>
where
    F: Float + FromPrimitive,
    S: NoteSource + ?Sized,
{
    let samples = source.samples();
    if samples.is_empty() {
        return Err(AnalysisError::EmptySource);
    }
    EventDistribution::from_counts(&count_events(&samples, key))
}

/// `H = -sum p log p`.
///
/// Count-based distributions use `log n - (1/n) sum c log c`, which is exact
/// for uniform counts; synthetic ones sum `-p log p` with compensation.
pub fn shannon_entropy<F: Float + FromPrimitive>(d: &EventDistribution<F>, base: LogBase) -> F {
    let h = match &d.counts {
        Some(counts) => {
            let n = F::from_u64(d.samples).unwrap();
            let weighted = neumaier_sum(counts.iter().filter(|&&c| c > 1).map(|&c| {
                let cf = F::from_u64(c).unwrap();
                cf * base.log(cf)
            }));
            base.log(n) - weighted / n
        }
        None => -neumaier_sum(d.outcomes.iter().map(|&(_, p)| p * base.log(p))),
    };
    h.max(F::zero())
}

/// One row per (piece, key). A piece that could not be read keeps its row
/// with the error message.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyRow<F> {
    pub piece: String,
    pub group: String,
    pub key: MusicalEventKey,
    pub base: LogBase,
    pub result: Result<EntropyStats<F>, String>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyStats<F> {
    pub entropy: F,
    pub distinct: usize,
    pub events: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport<F> {
    pub rows: Vec<EntropyRow<F>>,
}

pub const REPORT_CSV_HEADER: &str = "piece,group,key,base,entropy,distinct,events";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl<F: Float + FromPrimitive + fmt::Display> EntropyReport<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let tail = match &r.result {
                Ok(s) => format!("{:.10},{},{}", s.entropy, s.distinct, s.events),
                Err(e) => format!("{},,", csv_field(&format!("error: {e}"))),
            };
            out.push_str(&format!("{},{},{},{},{}\n", csv_field(&r.piece), csv_field(&r.group), r.key, r.base, tail));
        }
        out
    }

    /// Mean entropy of the successful rows of `group` for `key`.
    pub fn group_mean(&self, group: &str, key: MusicalEventKey) -> Option<F> {
        let values: Vec<F> = self
            .rows
            .iter()
            .filter(|r| r.group == group && r.key == key)
            .filter_map(|r| r.result.as_ref().ok().map(|s| s.entropy))
            .collect();
        if values.is_empty() {
            return None;
        }
        Some(neumaier_sum(values.iter().copied()) / F::from_usize(values.len()).unwrap())
    }
}

/// A labelled piece: its samples, or the reason it could not be read.
#[derive(Clone, Debug)]
pub struct Piece {
    pub id: String,
    pub group: String,
    pub samples: Result<Vec<NoteSample>, String>,
}

impl Piece {
    pub fn new<S: NoteSource + ?Sized>(id: impl Into<String>, group: impl Into<String>, source: &S) -> Self {
        Piece { id: id.into(), group: group.into(), samples: Ok(source.samples()) }
    }

    pub fn failed(id: impl Into<String>, group: impl Into<String>, error: impl Into<String>) -> Self {
        Piece { id: id.into(), group: group.into(), samples: Err(error.into()) }
    }

    /// One piece per channel present, ids suffixed `#chN`.
    pub fn split_channels(&self) -> Vec<Piece> {
        match &self.samples {
            Err(_) => vec![self.clone()],
            Ok(samples) => {
                let mut by_channel: BTreeMap<u8, Vec<NoteSample>> = BTreeMap::new();
                for s in samples {
                    by_channel.entry(s.channel).or_default().push(*s);
                }
                by_channel
                    .into_iter()
                    .map(|(ch, s)| Piece { id: format!("{}#ch{ch}", self.id), group: self.group.clone(), samples: Ok(s) })
                    .collect()
            }
        }
    }
}

/// Rows ordered by group, then piece id, then key order given.
pub fn entropy_report<F: Float + FromPrimitive>(
    pieces: &[Piece],
    keys: &[MusicalEventKey],
    base: LogBase,
) -> EntropyReport<F> {
    let mut ordered: Vec<&Piece> = pieces.iter().collect();
    ordered.sort_by(|a, b| (&a.group, &a.id).cmp(&(&b.group, &b.id)));
    let mut rows = Vec::new();
    for piece in ordered {
        for &key in keys {
            let result = match &piece.samples {
                Err(e) => Err(e.clone()),
                Ok(samples) => EventDistribution::<F>::from_counts(&count_events(samples, key))
                    .map(|d| EntropyStats {
                        entropy: shannon_entropy(&d, base),
                        distinct: d.support(),
                        events: d.sample_count(),
                    })
                    .map_err(|e| e.to_string()),
            };
            rows.push(EntropyRow { piece: piece.id.clone(), group: piece.group.clone(), key, base, result });
        }
    }
    EntropyReport { rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum BehaviorClass {
    /// Eventually constant.
    Class1,
    /// Eventually periodic with the given period, at least 2.
    Class2 { period: usize },
    /// No period up to the search bound (class 3 or 4).
    Aperiodic,
}

/// Classifies the tail of `seq`.
///
/// The tail examined is the last `max_period * min_repeats` values. If it is
/// constant the result is [`BehaviorClass::Class1`]; otherwise the smallest
/// `p` in `2..=max_period` with `tail[i] == tail[i - p]` throughout gives
/// `Class2 { period: p }`; otherwise [`BehaviorClass::Aperiodic`].
pub fn detect_period<T: PartialEq>(seq: &[T], max_period: usize, min_repeats: usize) -> Result<BehaviorClass, AnalysisError> {
    if max_period == 0 || min_repeats == 0 {
        return Err(AnalysisError::BadPeriodParams);
    }
    let needed = max_period * min_repeats;
    if seq.len() < needed {
        return Err(AnalysisError::SequenceTooShort { len: seq.len(), needed });
    }
    let tail = &seq[seq.len() - needed..];
    if tail.iter().all(|x| *x == tail[0]) {
        return Ok(BehaviorClass::Class1);
    }
    for p in 2..=max_period {
        if (p..tail.len()).all(|i| tail[i] == tail[i - p]) {
            return Ok(BehaviorClass::Class2 { period: p });
        }
    }
    Ok(BehaviorClass::Aperiodic)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PeriodParams {
    pub max_period: usize,
    pub min_repeats: usize,
}

impl Default for PeriodParams {
    fn default() -> Self {
        PeriodParams { max_period: 16, min_repeats: 3 }
    }
}

/// Classes for each raw attribute of one voice. `None` when the voice has
/// too few events for the search window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VoiceBehavior {
    pub voice: u8,
    pub events: usize,
    pub pitch: Option<BehaviorClass>,
    pub velocity: Option<BehaviorClass>,
    pub duration: Option<BehaviorClass>,
    pub entry_delay: Option<BehaviorClass>,
}

impl VoiceBehavior {
    pub fn classes(&self) -> [Option<BehaviorClass>; 4] {
        [self.pitch, self.velocity, self.duration, self.entry_delay]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BehaviorSummary {
    pub voices: Vec<VoiceBehavior>,
    pub class1: usize,
    pub class2: usize,
    pub aperiodic: usize,
    pub undetermined: usize,
}

impl BehaviorSummary {
    pub fn voices_with_any_aperiodic(&self) -> usize {
        self.voices
            .iter()
            .filter(|v| v.classes().contains(&Some(BehaviorClass::Aperiodic)))
            .count()
    }
}

/// Applies [`detect_period`] to each voice's raw `p`, `v`, `d` and `ed`
/// sequences. The summary counts are over all (voice, attribute) pairs.
pub fn classify_run(log: &[NoteEvent], params: PeriodParams) -> BehaviorSummary {
    let mut per_voice: BTreeMap<u8, Vec<&NoteEvent>> = BTreeMap::new();
    for e in log {
        per_voice.entry(e.voice).or_default().push(e);
    }
    let mut summary = BehaviorSummary::default();
    for (voice, events) in per_voice {
        let classify = |f: fn(&NoteEvent) -> u32| {
            let seq: Vec<u32> = events.iter().map(|e| f(e)).collect();
            detect_period(&seq, params.max_period, params.min_repeats).ok()
        };
        let vb = VoiceBehavior {
            voice,
            events: events.len(),
            pitch: classify(|e| e.raw.p),
            velocity: classify(|e| e.raw.v),
            duration: classify(|e| e.raw.d),
            entry_delay: classify(|e| e.raw.ed),
        };
        for c in vb.classes() {
            match c {
                Some(BehaviorClass::Class1) => summary.class1 += 1,
                Some(BehaviorClass::Class2 { .. }) => summary.class2 += 1,
                Some(BehaviorClass::Aperiodic) => summary.aperiodic += 1,
                None => summary.undetermined += 1,
            }
        }
        summary.voices.push(vb);
    }
    summary
}
