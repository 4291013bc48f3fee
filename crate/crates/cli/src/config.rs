//! Run configuration: a single JSON document, optionally overridden by
//! dotted-path assignments on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use networks_core::lut::{assign_luts, LutAssignment};
use networks_core::topology::{build_custom, build_preset, prune, PruneSpec, TopologySpec, PRESETS};
use networks_core::{
    LutMethod, LutPlan, LutScope, MappingConfig, ModuleKind, NetworkTopology, StartPolicy, StopCondition, ValueRange,
};
use networks_core::smf::SmfConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default = "default_range")]
    pub range: ValueRange,
    pub lut: LutSection,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub smf: SmfConfig,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_range() -> ValueRange {
    ValueRange::default()
}

/// Exactly one of `preset` and `custom`; `paper64` when both are absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<TopologySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prune: Option<PruneSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutSection {
    pub scope: LutScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<LutMethod>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub modules: BTreeMap<ModuleKind, LutMethod>,
    /// Defaults to the engine seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LutSection {
    pub fn plan(&self) -> LutPlan {
        LutPlan { scope: self.scope, method: self.method, modules: self.modules.clone() }
    }
}

/// At most one of `max_events` and `max_ms`; 1000 events when neither is set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start: StartPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ms: Option<u64>,
}

pub const DEFAULT_MAX_EVENTS: usize = 1000;

impl EngineSection {
    pub fn stop(&self) -> Result<StopCondition, CliError> {
        match (self.max_events, self.max_ms) {
            (Some(_), Some(_)) => Err(CliError::Config("engine: set only one of max_events and max_ms".into())),
            (Some(0), None) => Err(CliError::Config("engine.max_events: must be positive".into())),
            (Some(n), None) => Ok(StopCondition::MaxEvents(n)),
            (None, Some(ms)) => Ok(StopCondition::MaxMs(ms)),
            (None, None) => Ok(StopCondition::MaxEvents(DEFAULT_MAX_EVENTS)),
        }
    }
}

/// Artifact paths. The event log and manifest default to siblings of the
/// MIDI file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub midi: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

pub struct OutputPaths {
    pub midi: PathBuf,
    pub log: PathBuf,
    pub manifest: PathBuf,
}

impl OutputSection {
    pub fn resolve(&self) -> OutputPaths {
        let midi = self.midi.clone().unwrap_or_else(|| PathBuf::from("networks.mid"));
        let log = self.log.clone().unwrap_or_else(|| midi.with_extension("jsonl"));
        let manifest = self.manifest.clone().unwrap_or_else(|| midi.with_extension("manifest.json"));
        OutputPaths { midi, log, manifest }
    }
}

/// Reads a config or a manifest produced by `generate` (its `config` member
/// is used).
pub fn load_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match doc {
        Value::Object(mut map) if map.contains_key("config_digest") && map.contains_key("config") => {
            Ok(map.remove("config").expect("checked"))
        }
        other => Ok(other),
    }
}

/// Sets `path` (dot separated) to `raw`, parsed as JSON when possible and
/// taken as a string otherwise. Intermediate objects are created.
pub fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(doc, path, value)
}

pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut cur = doc;
    for (i, key) in keys.iter().enumerate() {
        if !cur.is_object() {
            if cur.is_null() {
                *cur = Value::Object(Default::default());
            } else {
                return Err(CliError::Config(format!("override `{path}`: `{}` is not an object", keys[..i].join("."))));
            }
        }
        let map = cur.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        cur = map.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one key")
}

pub fn remove_path(doc: &mut Value, path: &str) {
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = doc;
    for key in &keys[..keys.len() - 1] {
        match cur.get_mut(*key) {
            Some(next) => cur = next,
            None => return,
        }
    }
    if let Some(map) = cur.as_object_mut() {
        map.remove(keys[keys.len() - 1]);
    }
}

/// Typed parse with the failing field path in the message.
pub fn parse_config(doc: Value) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        if path == "." || path.is_empty() {
            CliError::Config(e.inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.inner()))
        }
    })?;
    Ok(cfg)
}

impl RunConfig {
    /// Fills defaults that depend on other fields, so the echoed config is
    /// complete.
    pub fn effective(mut self) -> Result<Self, CliError> {
        if self.topology.preset.is_none() && self.topology.custom.is_none() {
            self.topology.preset = Some(PRESETS[0].to_string());
        }
        if self.lut.seed.is_none() {
            self.lut.seed = Some(self.engine.seed);
        }
        if self.engine.max_events.is_none() && self.engine.max_ms.is_none() {
            self.engine.max_events = Some(DEFAULT_MAX_EVENTS);
        }
        self.engine.stop()?;
        self.mapping
            .check(self.range)
            .map_err(|e| CliError::Config(format!("mapping: {e}")))?;
        self.smf.check().map_err(|e| CliError::Config(format!("smf: {e}")))?;
        Ok(self)
    }

    pub fn lut_seed(&self) -> u64 {
        self.lut.seed.unwrap_or(self.engine.seed)
    }

    pub fn build_topology(&self) -> Result<Arc<NetworkTopology>, CliError> {
        let base = match (&self.topology.preset, &self.topology.custom) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("topology: set only one of preset and custom".into()));
            }
            (Some(name), None) => build_preset(name).map_err(|e| CliError::Config(format!("topology.preset: {e}")))?,
            (None, Some(spec)) => build_custom(spec).map_err(|e| CliError::Config(format!("topology.custom: {e}")))?,
            (None, None) => build_preset(PRESETS[0]).expect("built-in preset"),
        };
        let t = match &self.topology.prune {
            Some(p) => prune(&base, p).map_err(|e| CliError::Config(format!("topology.prune: {e}")))?,
            None => base,
        };
        Ok(Arc::new(t))
    }

    pub fn assign(&self, t: &NetworkTopology) -> Result<LutAssignment, CliError> {
        assign_luts(t, &self.lut.plan(), self.range, self.lut_seed()).map_err(|e| CliError::Config(format!("lut: {e}")))
    }

    /// SHA-256 over the canonical JSON of everything except output paths,
    /// so relocating artifacts leaves their contents unchanged.
    pub fn digest(&self) -> String {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        remove_path(&mut doc, "output");
        hex(&Sha256::digest(serde_json::to_vec(&doc).expect("value serializes")))
    }

    pub fn start(&self) -> StartPolicy {
        self.engine.start
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
