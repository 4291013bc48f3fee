use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use networks_cli::{
    cmd_analyze, cmd_generate, cmd_lut, cmd_topology, AnalyzeArgs, CliError, GenerateArgs, LutArgs, TopologyArgs,
};
use networks_core::analysis::{LogBase, MusicalEventKey};
use networks_core::topology::GraphFormat;
use networks_core::{LutMethod, ValueRange};

#[derive(Parser)]
#[command(name = "networks", version, about = "Generate and analyse network-driven MIDI")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine and write a MIDI file, an event log and a manifest.
    Generate {
        /// Config file, or a manifest from an earlier run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config field, e.g. `--set lut.method=ratio(3)`.
        #[arg(long = "set", value_name = "PATH=VALUE", value_parser = parse_assignment)]
        overrides: Vec<(String, String)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, conflicts_with = "max_ms")]
        max_events: Option<usize>,
        #[arg(long)]
        max_ms: Option<u64>,
        /// MIDI output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Event log path.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Entropy report over .mid and .jsonl files, given as `[GROUP=]PATH`.
    Analyze {
        inputs: Vec<String>,
        #[arg(long = "key", value_name = "pitch|duration|note")]
        keys: Vec<MusicalEventKey>,
        #[arg(long, default_value = "2")]
        base: LogBase,
        /// Analyse every channel as its own piece.
        #[arg(long)]
        per_channel: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate or export a topology.
    Topology {
        #[arg(long, conflicts_with = "custom", required_unless_present = "custom")]
        preset: Option<String>,
        /// Topology spec as JSON.
        #[arg(long)]
        custom: Option<PathBuf>,
        /// Prune spec as JSON, applied after building.
        #[arg(long)]
        prune: Option<PathBuf>,
        #[arg(long)]
        validate: bool,
        #[arg(long, value_name = "graph-dot|graph-json")]
        export: Option<GraphFormat>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a single look-up table.
    Lut {
        #[arg(long)]
        method: LutMethod,
        #[arg(long)]
        inputs: usize,
        #[arg(long, default_value = "1..13")]
        range: ValueRange,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_assignment(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected PATH=VALUE, got `{s}`"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, overrides, seed, max_events, max_ms, out, log, manifest } => {
            let m = cmd_generate(&GenerateArgs { config, overrides, seed, max_events, max_ms, out, log, manifest })?;
            eprintln!("wrote {} events (config {})", m.events, &m.config_digest[..12]);
        }
        Command::Analyze { inputs, keys, base, per_channel, out } => {
            if inputs.is_empty() {
                eprintln!("warning: no inputs; writing an empty report");
            }
            let report = cmd_analyze(&AnalyzeArgs { inputs, keys, base, per_channel, out })?;
            for row in report.rows.iter().filter(|r| r.result.is_err()) {
                eprintln!("warning: {}: {}", row.piece, row.result.as_ref().unwrap_err());
            }
        }
        Command::Topology { preset, custom, prune, validate, export, out } => {
            print!("{}", cmd_topology(&TopologyArgs { preset, custom, prune, validate, export, out })?);
        }
        Command::Lut { method, inputs, range, seed, out } => {
            if let Some(text) = cmd_lut(&LutArgs { method, inputs, range, seed, out })? {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
