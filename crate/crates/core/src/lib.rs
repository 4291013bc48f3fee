//! A 64-node hierarchically clustered network whose asynchronous node
//! dynamics are rendered as MIDI, together with the entropy and periodicity
//! analysis used to characterise its output.
//!
//! * [`topology`]: the network graph, the `paper64` preset, pruning, export.
//! * [`lut`]: look-up-table rules and their assignment to nodes.
//! * [`engine`]: event-queue simulation producing [`NoteEvent`]s.
//! * [`mapping`]: raw node values to MIDI attributes and milliseconds.
//! * [`smf`]: Standard MIDI File writer and reader.
//! * [`analysis`]: event distributions, Shannon entropy, behaviour classes.
//! * [`eventlog`]: JSON Lines event logs.
//!
//! Everything is deterministic for a fixed configuration and seed.

pub mod analysis;
pub mod engine;
pub mod eventlog;
pub mod lut;
pub mod mapping;
pub mod rng;
pub mod smf;
pub mod topology;

pub use engine::{EngineState, NoteEvent, StartPolicy, StopCondition};
pub use lut::{Lut, LutAssignment, LutMethod, LutPlan, LutScope, ValueRange};
pub use mapping::MappingConfig;
pub use topology::{ModuleKind, NetworkTopology, NodeId};

/// Version recorded in event logs and manifests.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Distribution with `f64` probabilities.
pub type EventDistribution = analysis::EventDistribution<f64>;
/// Entropy report with `f64` values.
pub type EntropyReport = analysis::EntropyReport<f64>;
pub type EntropyRow = analysis::EntropyRow<f64>;
