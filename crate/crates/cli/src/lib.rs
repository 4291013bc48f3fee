//! Command implementations behind the `networks` binary.

pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use networks_core::analysis::{entropy_report, LogBase, MusicalEventKey, Piece};
use networks_core::eventlog::{read_event_log, write_event_log, LogHeader};
use networks_core::lut::generate_lut;
use networks_core::rng::RNG_ALGORITHM;
use networks_core::smf::{read_smf, write_smf};
use networks_core::topology::{
    build_custom, build_preset, export_graph, prune, validate, GraphFormat, NetworkTopology, PruneSpec, TopologySpec,
};
use networks_core::{EngineState, EntropyReport, LutMethod, NoteEvent, ValueRange, ENGINE_VERSION};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::RunConfig;
use config::hex;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or configuration; exit code 1.
    #[error("{0}")]
    Config(String),
    /// Failure while doing the work; exit code 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn runtime(context: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| runtime(path.display(), e))?;
    tmp.write_all(bytes).map_err(|e| runtime(path.display(), e))?;
    tmp.as_file().sync_all().map_err(|e| runtime(path.display(), e))?;
    tmp.persist(path).map_err(|e| runtime(path.display(), e.error))?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct ArtifactRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Seeds {
    pub engine: u64,
    pub lut: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub engine_version: String,
    pub rng: String,
    pub config_digest: String,
    pub seeds: Seeds,
    pub events: usize,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactRecord>,
}

/// Everything `generate` produces, before it touches the file system.
pub struct Generated {
    pub config: RunConfig,
    pub events: Vec<NoteEvent>,
    pub midi: Vec<u8>,
    pub log: String,
}

/// Runs the engine for an effective config.
pub fn run_config(cfg: &RunConfig) -> Result<Generated, CliError> {
    let topology = cfg.build_topology()?;
    let luts = cfg.assign(&topology)?;
    let mut state = EngineState::init(topology, &luts, cfg.mapping.clone(), cfg.start(), cfg.engine.seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let events = state.run(cfg.engine.stop()?);
    let midi = write_smf(&events, &cfg.smf).map_err(|e| runtime("midi", e))?;
    let header = LogHeader {
        engine_version: ENGINE_VERSION.to_string(),
        rng: RNG_ALGORITHM.to_string(),
        seed: cfg.engine.seed,
        config_digest: cfg.digest(),
    };
    let log = write_event_log(&header, &events);
    Ok(Generated { config: cfg.clone(), events, midi, log })
}

pub struct GenerateArgs {
    pub config: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub max_events: Option<usize>,
    pub max_ms: Option<u64>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

/// Loads, overrides and validates a config into its effective form.
pub fn resolve_config(args: &GenerateArgs) -> Result<RunConfig, CliError> {
    use serde_json::Value;
    let mut doc = match &args.config {
        Some(p) => config::load_document(p)?,
        None => Value::Object(Default::default()),
    };
    for (path, value) in &args.overrides {
        config::apply_override(&mut doc, path, value)?;
    }
    if let Some(seed) = args.seed {
        config::set_path(&mut doc, "engine.seed", seed.into())?;
    }
    if let Some(n) = args.max_events {
        config::remove_path(&mut doc, "engine.max_ms");
        config::set_path(&mut doc, "engine.max_events", n.into())?;
    }
    if let Some(ms) = args.max_ms {
        config::remove_path(&mut doc, "engine.max_events");
        config::set_path(&mut doc, "engine.max_ms", ms.into())?;
    }
    for (key, value) in [("midi", &args.out), ("log", &args.log), ("manifest", &args.manifest)] {
        if let Some(p) = value {
            config::set_path(&mut doc, &format!("output.{key}"), Value::String(p.display().to_string()))?;
        }
    }
    config::parse_config(doc)?.effective()
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<Manifest, CliError> {
    let cfg = resolve_config(args)?;
    let generated = run_config(&cfg)?;
    let paths = cfg.output.resolve();
    write_atomic(&paths.midi, &generated.midi)?;
    write_atomic(&paths.log, generated.log.as_bytes())?;
    let record = |path: &Path, bytes: &[u8]| ArtifactRecord {
        path: path.to_path_buf(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len(),
    };
    let manifest = Manifest {
        engine_version: ENGINE_VERSION.to_string(),
        rng: RNG_ALGORITHM.to_string(),
        config_digest: cfg.digest(),
        seeds: Seeds { engine: cfg.engine.seed, lut: cfg.lut_seed() },
        events: generated.events.len(),
        artifacts: BTreeMap::from([
            ("midi".into(), record(&paths.midi, &generated.midi)),
            ("log".into(), record(&paths.log, generated.log.as_bytes())),
        ]),
        config: cfg,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&paths.manifest, text.as_bytes())?;
    Ok(manifest)
}

/// `GROUP=PATH` or `PATH`; the group defaults to `all`.
pub fn parse_input(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((g, p)) if !g.is_empty() && !g.contains(['/', '\\']) => (g.to_string(), PathBuf::from(p)),
        _ => ("all".to_string(), PathBuf::from(spec)),
    }
}

pub fn load_piece(group: &str, path: &Path) -> Piece {
    let id = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return Piece::failed(id, group, e.to_string()),
    };
    match ext.as_deref() {
        Some("mid") | Some("midi") => match read_smf(&bytes) {
            Ok(parsed) => Piece::new(id, group, &parsed),
            Err(e) => Piece::failed(id, group, e.to_string()),
        },
        Some("jsonl") => {
            let text = match String::from_utf8(bytes) {
                Ok(t) => t,
                Err(e) => return Piece::failed(id, group, e.to_string()),
            };
            match read_event_log(&text) {
                Ok((_, events)) => Piece::new(id, group, &events),
                Err(e) => Piece::failed(id, group, e.to_string()),
            }
        }
        _ => Piece::failed(id, group, "unsupported input (expected .mid or .jsonl)"),
    }
}

pub struct AnalyzeArgs {
    pub inputs: Vec<String>,
    pub keys: Vec<MusicalEventKey>,
    pub base: LogBase,
    pub per_channel: bool,
    pub out: PathBuf,
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<EntropyReport, CliError> {
    let pieces: Vec<Piece> = args
        .inputs
        .par_iter()
        .map(|spec| {
            let (group, path) = parse_input(spec);
            load_piece(&group, &path)
        })
        .collect();
    let pieces: Vec<Piece> = if args.per_channel {
        pieces.iter().flat_map(|p| p.split_channels()).collect()
    } else {
        pieces
    };
    let keys = if args.keys.is_empty() { vec![MusicalEventKey::Note] } else { args.keys.clone() };
    let report = entropy_report::<f64>(&pieces, &keys, args.base);
    write_atomic(&args.out, report.to_csv().as_bytes())?;
    Ok(report)
}

pub struct TopologyArgs {
    pub preset: Option<String>,
    pub custom: Option<PathBuf>,
    pub prune: Option<PathBuf>,
    pub validate: bool,
    pub export: Option<GraphFormat>,
    pub out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| CliError::Config(format!("{}: {}: {}", path.display(), e.path(), e.inner())))
}

pub fn load_topology(
    preset: Option<&str>,
    custom: Option<&Path>,
    prune_spec: Option<&Path>,
) -> Result<NetworkTopology, CliError> {
    let base = match (preset, custom) {
        (Some(_), Some(_)) => return Err(CliError::Config("use either --preset or --custom".into())),
        (Some(name), None) => build_preset(name).map_err(|e| CliError::Config(e.to_string()))?,
        (None, Some(path)) => {
            let spec: TopologySpec = read_json(path)?;
            build_custom(&spec).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, None) => return Err(CliError::Config("one of --preset or --custom is required".into())),
    };
    match prune_spec {
        Some(path) => {
            let spec: PruneSpec = read_json(path)?;
            prune(&base, &spec).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(base),
    }
}

/// Returns the text for standard output.
pub fn cmd_topology(args: &TopologyArgs) -> Result<String, CliError> {
    let t = load_topology(args.preset.as_deref(), args.custom.as_deref(), args.prune.as_deref())?;
    let mut stdout = String::new();
    if args.validate || args.export.is_none() {
        stdout.push_str(&validate(&t).to_string());
        stdout.push('\n');
    }
    if let Some(format) = args.export {
        let graph = export_graph(&t, format);
        match &args.out {
            Some(path) => write_atomic(path, graph.as_bytes())?,
            None => stdout.push_str(&graph),
        }
    }
    Ok(stdout)
}

pub struct LutArgs {
    pub method: LutMethod,
    pub inputs: usize,
    pub range: ValueRange,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

/// Returns the dump when no output path is given.
pub fn cmd_lut(args: &LutArgs) -> Result<Option<String>, CliError> {
    let lut = generate_lut(args.method, args.inputs, args.range, args.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let text = lut.dump(args.method, args.seed);
    match &args.out {
        Some(path) => {
            write_atomic(path, text.as_bytes())?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}
