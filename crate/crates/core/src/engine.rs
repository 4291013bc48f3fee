//! Asynchronous network dynamics driven by a time-ordered event queue.
//!
//! Each voice activates when its entry-delay node says so. On activation the
//! four nodes of the voice sum their input registers, look the sums up in
//! their tables, and a note is emitted. Each output is then delivered to every
//! out-neighbour (the node itself included) after the voice's entry delay,
//! which is also when the voice activates next.
//!
//! Queue order: ascending due time; at equal times every delivery lands before
//! any activation; deliveries tie-break on `(source, destination)` canonical
//! order and activations on voice index.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lut::{Lut, LutAssignment, ValueRange};
use crate::mapping::{
    map_cc, map_duration, map_pitch, map_velocity, scale_entry_delay, MappingConfig, MappingError,
};
use crate::rng::SimRng;
use crate::topology::{validate, NetworkTopology, NodeId, VoiceQuartet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("node {0} has no LUT")]
    MissingLut(NodeId),
    #[error("LUT for {node} expects {lut_inputs} inputs but the node has {node_inputs}")]
    InputCountMismatch { node: NodeId, lut_inputs: usize, node_inputs: usize },
    #[error("LUT for {0} uses a different value range than the assignment")]
    RangeMismatch(NodeId),
    #[error("topology is not valid for simulation: {0}")]
    InvalidTopology(String),
    #[error("topology has no complete voice")]
    NoVoices,
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartPolicy {
    /// Every voice activates at t = 0.
    #[default]
    Simultaneous,
    /// Voice `i` first activates at `i * step_ms`.
    Staggered { step_ms: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQuartet {
    pub p: u32,
    pub v: u32,
    pub d: u32,
    pub ed: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CcValue {
    pub number: u8,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteEvent {
    pub t_ms: u64,
    pub voice: u8,
    pub midi_note: u8,
    pub midi_velocity: u8,
    pub duration_ms: u32,
    pub raw: RawQuartet,
    #[serde(default)]
    pub cc: Vec<CcValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopCondition {
    /// Process every time step with due time `<= ms`.
    MaxMs(u64),
    /// Stop after exactly this many events.
    MaxEvents(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PendingKind {
    Delivery { src: NodeId, dst: NodeId, value: u32 },
    Activation { voice: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingEvent {
    pub due_ms: u64,
    pub kind: PendingKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pending {
    due: u64,
    // 0 = delivery, 1 = activation
    rank: u8,
    // delivery: (src, dst) dense indices; activation: (voice, 0)
    a: u16,
    b: u16,
    slot: u32,
    value: u32,
}

impl Pending {
    fn key(&self) -> (u64, u8, u16, u16) {
        (self.due, self.rank, self.a, self.b)
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dense per-voice node indices, in module order (p, v, d, ed).
#[derive(Clone, Debug)]
struct VoiceSlots {
    quartet: VoiceQuartet,
    nodes: [usize; 4],
}

#[derive(Clone, Debug)]
pub struct EngineState {
    topology: Arc<NetworkTopology>,
    range: ValueRange,
    mapping: MappingConfig,
    luts: Vec<Arc<Lut>>,
    /// `registers[offsets[i]..offsets[i + 1]]` are node `i`'s inputs, in the
    /// order of `topology.inputs_of(i)`.
    offsets: Vec<usize>,
    registers: Vec<u32>,
    /// Per source node: `(destination, register slot)`.
    out_links: Vec<Vec<(usize, usize)>>,
    voices: Vec<VoiceSlots>,
    queue: BinaryHeap<Reverse<Pending>>,
    clock_ms: u64,
    emitted: u64,
    /// Events produced by the last step but not yet handed out by `run`.
    outbox: Vec<NoteEvent>,
    outbox_pos: usize,
}

impl EngineState {
    /// Seeds every register uniformly from the value range, in canonical
    /// node order then canonical input order, and queues one activation per
    /// voice.
    pub fn init(
        topology: Arc<NetworkTopology>,
        luts: &LutAssignment,
        mapping: MappingConfig,
        start: StartPolicy,
        seed: u64,
    ) -> Result<Self, EngineError> {
        let report = validate(&topology);
        if !report.is_clean() {
            return Err(EngineError::InvalidTopology(report.to_string().replace('\n', "; ")));
        }
        let range = luts.range();
        mapping.check(range)?;

        let mut node_luts = Vec::with_capacity(topology.len());
        for (i, &node) in topology.nodes().iter().enumerate() {
            let lut = luts.get(node).ok_or(EngineError::MissingLut(node))?;
            let node_inputs = topology.inputs_of(i).len();
            if lut.n_inputs() != node_inputs {
                return Err(EngineError::InputCountMismatch { node, lut_inputs: lut.n_inputs(), node_inputs });
            }
            if lut.range() != range {
                return Err(EngineError::RangeMismatch(node));
            }
            node_luts.push(Arc::clone(lut));
        }

        let mut offsets = Vec::with_capacity(topology.len() + 1);
        offsets.push(0);
        for i in 0..topology.len() {
            offsets.push(offsets[i] + topology.inputs_of(i).len());
        }
        let mut out_links = vec![Vec::new(); topology.len()];
        for dst in 0..topology.len() {
            for (pos, &src) in topology.inputs_of(dst).iter().enumerate() {
                out_links[src].push((dst, offsets[dst] + pos));
            }
        }

        let mut rng = SimRng::new(seed);
        let registers: Vec<u32> = (0..offsets[topology.len()]).map(|_| range.min() + rng.below(range.span())).collect();

        let voices: Vec<VoiceSlots> = topology
            .voices()
            .into_iter()
            .map(|quartet| VoiceSlots {
                quartet,
                nodes: quartet.nodes().map(|n| topology.index_of(n).expect("voice node present")),
            })
            .collect();
        if voices.is_empty() {
            return Err(EngineError::NoVoices);
        }

        let mut queue = BinaryHeap::new();
        for v in &voices {
            let due = match start {
                StartPolicy::Simultaneous => 0,
                StartPolicy::Staggered { step_ms } => u64::from(v.quartet.voice) * u64::from(step_ms),
            };
            queue.push(Reverse(activation(due, v.quartet.voice)));
        }

        Ok(EngineState {
            topology,
            range,
            mapping,
            luts: node_luts,
            offsets,
            registers,
            out_links,
            voices,
            queue,
            clock_ms: 0,
            emitted: 0,
            outbox: Vec::new(),
            outbox_pos: 0,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    /// Events emitted by `step` so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn register_count(&self) -> usize {
        self.registers.len()
    }

    /// `(source, value)` for each input register of `node`, canonical order.
    pub fn registers_of(&self, node: NodeId) -> Option<Vec<(NodeId, u32)>> {
        let i = self.topology.index_of(node)?;
        let nodes = self.topology.nodes();
        Some(
            self.topology
                .inputs_of(i)
                .iter()
                .zip(&self.registers[self.offsets[i]..self.offsets[i + 1]])
                .map(|(&src, &v)| (nodes[src], v))
                .collect(),
        )
    }

    /// Pending queue contents in processing order.
    pub fn pending(&self) -> Vec<PendingEvent> {
        let nodes = self.topology.nodes();
        let mut all: Vec<Pending> = self.queue.iter().map(|r| r.0).collect();
        all.sort();
        all.into_iter()
            .map(|p| PendingEvent {
                due_ms: p.due,
                kind: if p.rank == 0 {
                    PendingKind::Delivery { src: nodes[p.a as usize], dst: nodes[p.b as usize], value: p.value }
                } else {
                    PendingKind::Activation { voice: p.a as u8 }
                },
            })
            .collect()
    }

    pub fn next_due(&self) -> Option<u64> {
        self.queue.peek().map(|r| r.0.due)
    }

    fn node_output(&self, i: usize) -> u32 {
        let sum: u32 = self.registers[self.offsets[i]..self.offsets[i + 1]].iter().sum();
        self.luts[i].lookup(sum)
    }

    /// Advances to the next due time and processes everything due then.
    /// Returns the notes emitted, in voice order. Empty only if the queue is
    /// empty.
    pub fn step(&mut self) -> Vec<NoteEvent> {
        let Some(t) = self.next_due() else {
            return Vec::new();
        };
        debug_assert!(t >= self.clock_ms);
        self.clock_ms = t;
        let mut activations = Vec::new();
        while let Some(Reverse(p)) = self.queue.peek().copied() {
            if p.due != t {
                break;
            }
            self.queue.pop();
            if p.rank == 0 {
                self.registers[p.slot as usize] = p.value;
            } else {
                activations.push(p.a as u8);
            }
        }

        let mut notes = Vec::with_capacity(activations.len());
        for voice in activations {
            let slots = self
                .voices
                .iter()
                .find(|v| v.quartet.voice == voice)
                .expect("activation for a known voice")
                .clone();
            notes.push(self.activate(t, &slots));
        }
        self.emitted += notes.len() as u64;
        notes
    }

    fn activate(&mut self, t: u64, voice: &VoiceSlots) -> NoteEvent {
        let [pi, vi, di, ei] = voice.nodes;
        let ed = self.node_output(ei);
        let delay = scale_entry_delay(ed, &self.mapping.entry_delay, self.range).expect("ed output in range");
        let (p, v, d) = (self.node_output(pi), self.node_output(vi), self.node_output(di));
        let raw = RawQuartet { p, v, d, ed };

        let q = voice.quartet;
        let cc = map_cc(
            &[(q.pitch, p), (q.velocity, v), (q.duration, d), (q.entry_delay, ed)],
            &self.mapping.cc,
            self.range,
        )
        .expect("outputs in range")
        .into_iter()
        .map(|(number, value)| CcValue { number, value })
        .collect();
        let event = NoteEvent {
            t_ms: t,
            voice: q.voice,
            midi_note: map_pitch(p, &self.mapping.pitch, self.range).expect("checked at init"),
            midi_velocity: map_velocity(v, &self.mapping.velocity, self.range).expect("checked at init"),
            duration_ms: map_duration(d, &self.mapping.duration, delay, self.range).expect("checked at init"),
            raw,
            cc,
        };

        let due = t + u64::from(delay);
        for (src, value) in [(pi, p), (vi, v), (di, d), (ei, ed)] {
            for &(dst, slot) in &self.out_links[src] {
                self.queue.push(Reverse(Pending {
                    due,
                    rank: 0,
                    a: src as u16,
                    b: dst as u16,
                    slot: slot as u32,
                    value,
                }));
            }
        }
        self.queue.push(Reverse(activation(due, q.voice)));
        event
    }

    /// Collects events until `stop`. Events left over from a step cut short
    /// by `MaxEvents` are kept and returned first by the next call, so
    /// splitting a run never changes the stream.
    pub fn run(&mut self, stop: StopCondition) -> Vec<NoteEvent> {
        let mut out = Vec::new();
        loop {
            while self.outbox_pos < self.outbox.len() {
                let ev = &self.outbox[self.outbox_pos];
                match stop {
                    StopCondition::MaxEvents(n) if out.len() >= n => return out,
                    StopCondition::MaxMs(ms) if ev.t_ms > ms => return out,
                    _ => {}
                }
                out.push(ev.clone());
                self.outbox_pos += 1;
            }
            match stop {
                StopCondition::MaxEvents(n) if out.len() >= n => return out,
                StopCondition::MaxMs(ms) if self.next_due().is_none_or(|t| t > ms) => return out,
                _ => {}
            }
            self.outbox = self.step();
            self.outbox_pos = 0;
            if self.outbox.is_empty() {
                return out;
            }
        }
    }

    /// Digest of the dynamical state: registers plus the queue with due
    /// times taken relative to the clock. States that differ only by a time
    /// shift hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.registers.len() as u64).to_be_bytes());
        for &r in &self.registers {
            h.update(r.to_be_bytes());
        }
        let mut pending: Vec<Pending> = self.queue.iter().map(|r| r.0).collect();
        pending.sort();
        h.update((pending.len() as u64).to_be_bytes());
        for p in pending {
            h.update((p.due - self.clock_ms).to_be_bytes());
            h.update([p.rank]);
            h.update(p.a.to_be_bytes());
            h.update(p.b.to_be_bytes());
            h.update(p.value.to_be_bytes());
        }
        let digest = h.finalize();
        u64::from_be_bytes(digest[..8].try_into().unwrap())
    }
}

fn activation(due: u64, voice: u8) -> Pending {
    Pending { due, rank: 1, a: u16::from(voice), b: 0, slot: 0, value: 0 }
}

/// Convenience wrapper over [`EngineState::fingerprint`].
pub fn state_fingerprint(state: &EngineState) -> u64 {
    state.fingerprint()
}
