use std::path::Path;
use std::process::{Command, Output};

use networks_core::smf::read_smf;

fn networks(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_networks")).current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const CONSTANT: &str = r#"{"lut": {"scope": "global", "method": "constant(3)"}, "engine": {"seed": 7, "max_events": 64}}"#;

#[test]
fn topology_validate_prints_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&networks(dir.path(), &["topology", "--preset", "paper64", "--validate"]));
    assert!(text.contains("{4:18, 5:15, 6:27, 15:3, 40:1}"), "{text}");
    assert!(text.contains("1 self + 12 pitch + 9 velocity + 9 duration + 9 entry_delay"));
}

#[test]
fn topology_exports() {
    let dir = tempfile::tempdir().unwrap();
    ok(&networks(dir.path(), &["topology", "--preset", "paper64", "--export", "graph-dot", "--out", "g.dot"]));
    let dot = std::fs::read_to_string(dir.path().join("g.dot")).unwrap();
    let lines: Vec<&str> = dot.lines().map(str::trim).collect();
    assert_eq!(lines.first(), Some(&"digraph networks {"));
    assert_eq!(lines.last(), Some(&"}"));
    let edge = |l: &&str| l.contains(" -> ");
    let both: Vec<&&str> = lines.iter().filter(|l| edge(l) && l.ends_with("[dir=both];")).collect();
    assert_eq!(both.len(), 165);
    let loops = lines
        .iter()
        .filter(|l| edge(l) && !l.contains("dir=both"))
        .filter(|l| {
            let (a, b) = l.trim_end_matches(';').split_once(" -> ").unwrap();
            a.trim() == b.trim()
        })
        .count();
    assert_eq!(loops, 64);
    for l in both {
        let (a, rest) = l.split_once(" -> ").unwrap();
        let b = rest.split_whitespace().next().unwrap();
        for id in [a, b] {
            let parts: Vec<&str> = id.split('_').collect();
            assert_eq!(parts.len(), 3, "{id}");
            assert!(["p", "v", "d", "e"].contains(&parts[0]));
        }
    }

    ok(&networks(dir.path(), &["topology", "--preset", "paper64", "--export", "graph-json", "--out", "g.json"]));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(json["edges"].as_array().unwrap().len(), 165);
    // The export is itself a valid custom spec.
    let text = ok(&networks(dir.path(), &["topology", "--custom", "g.json", "--validate"]));
    assert!(text.contains("{4:18, 5:15, 6:27, 15:3, 40:1}"));
}

#[test]
fn topology_prune_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "prune.json",
        r#"{"caps": [{"target": "module_hubs", "max_inputs": 7, "policy": "highest_order_first"}]}"#,
    );
    let out = networks(dir.path(), &["topology", "--preset", "paper64", "--prune", "prune.json", "--validate"]);
    let text = ok(&out);
    assert!(text.contains("super-hub inputs: 7"), "{text}");
}

#[test]
fn unknown_preset_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let out = networks(dir.path(), &["topology", "--preset", "paper65", "--validate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("paper64"));
}

#[test]
fn generate_constant_run() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONSTANT);
    ok(&networks(dir.path(), &["generate", "--config", "c.json", "--out", "c.mid"]));
    let log = std::fs::read_to_string(dir.path().join("c.jsonl")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert!(lines[0].starts_with("{\"header\":"));
    assert_eq!(lines.len() - 1, 64);
    let midi = read_smf(&std::fs::read(dir.path().join("c.mid")).unwrap()).unwrap();
    assert_eq!(midi.notes.len(), 64);
    let channels: std::collections::BTreeSet<u8> = midi.notes.iter().map(|n| n.channel).collect();
    assert_eq!(channels.len(), 16);
    // One conductor track plus one per channel.
    let bytes = std::fs::read(dir.path().join("c.mid")).unwrap();
    assert_eq!(u16::from_be_bytes([bytes[10], bytes[11]]), 17);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"]["engine"], 7);
    assert_eq!(manifest["seeds"]["lut"], 7);
    assert_eq!(manifest["events"], 64);
    assert_eq!(manifest["config"]["lut"]["seed"], 7);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "r.json", r#"{"lut": {"scope": "per_node", "method": "random"}, "engine": {"seed": 3, "max_events": 500}}"#);
    ok(&networks(dir.path(), &["generate", "--config", "r.json", "--out", "a.mid"]));
    ok(&networks(dir.path(), &["generate", "--config", "r.json", "--out", "b.mid"]));
    // From the manifest, with only the output moved.
    ok(&networks(dir.path(), &["generate", "--config", "a.manifest.json", "--out", "c.mid", "--log", "c.jsonl", "--manifest", "c.manifest.json"]));
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.mid"), read("b.mid"));
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_eq!(read("a.mid"), read("c.mid"));
    assert_eq!(read("a.jsonl"), read("c.jsonl"));
    // Overrides change the output.
    ok(&networks(dir.path(), &["generate", "--config", "r.json", "--seed", "4", "--out", "d.mid"]));
    assert_ne!(read("a.mid"), read("d.mid"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "nolut.json", r#"{"engine": {"seed": 1}}"#);
    let out = networks(dir.path(), &["generate", "--config", "nolut.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("`lut`"), "{}", stderr(&out));

    write(dir.path(), "c.json", CONSTANT);
    let out = networks(dir.path(), &["generate", "--config", "c.json", "--set", "mapping.velocity.step=loud"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("mapping.velocity.step"), "{}", stderr(&out));

    let out = networks(dir.path(), &["generate", "--config", "c.json", "--set", "lut.method=cubic"]);
    assert_eq!(out.status.code(), Some(1));

    let out = networks(dir.path(), &["generate", "--max-events", "3", "--max-ms", "4"]);
    assert_eq!(out.status.code(), Some(1));

    let out = networks(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONSTANT);
    let out = networks(dir.path(), &["generate", "--config", "c.json", "--out", "missing/dir/c.mid"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn analyze_constant_and_random() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONSTANT);
    ok(&networks(dir.path(), &["generate", "--config", "c.json", "--out", "c.mid"]));
    ok(&networks(dir.path(), &["generate", "--set", "lut.scope=per_node", "--set", "lut.method=random", "--max-events", "300", "--out", "r.mid"]));
    ok(&networks(dir.path(), &["analyze", "constant=c.mid", "random=r.jsonl", "junk=nothing.txt", "--key", "note", "--key", "pitch", "--out", "h.csv"]));
    let csv = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(csv.lines().next(), Some("piece,group,key,base,entropy,distinct,events"));
    assert_eq!(rows.len(), 6);
    // Sorted by group, then piece.
    let groups: Vec<&str> = rows.iter().map(|r| r[1]).collect();
    assert_eq!(groups, ["constant", "constant", "junk", "junk", "random", "random"]);
    for r in &rows {
        match r[1] {
            "constant" => assert_eq!(r[4], "0.0000000000"),
            "random" => assert!(r[4].parse::<f64>().unwrap() > 0.0),
            _ => assert!(r[4].trim_start_matches('"').starts_with("error:"), "{r:?}"),
        }
    }
}

#[test]
fn analyze_formats_agree() {
    let dir = tempfile::tempdir().unwrap();
    // Fixed-table durations on the 10 ms grid and delays that always exceed
    // them, so no note overlaps its successor.
    write(
        dir.path(),
        "f.json",
        r#"{"lut": {"scope": "per_node", "method": "random"},
            "mapping": {"duration": {"mode": "fixed_table", "start_ms": 100, "step_ms": 50},
                        "entry_delay": {"min_ms": 700, "max_ms": 1900}},
            "engine": {"seed": 21, "max_events": 1000}}"#,
    );
    ok(&networks(dir.path(), &["generate", "--config", "f.json", "--out", "f.mid"]));
    ok(&networks(dir.path(), &["analyze", "f.mid", "f.jsonl", "--key", "note", "--key", "duration", "--key", "pitch", "--out", "h.csv"]));
    let csv = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    let mut by_key: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for l in csv.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        by_key.entry(f[2].to_string()).or_default().push(f[4].parse().unwrap());
    }
    assert_eq!(by_key.len(), 3);
    for (key, h) in by_key {
        assert_eq!(h.len(), 2);
        assert!((h[0] - h[1]).abs() <= 0.02, "{key}: {h:?}");
    }
}

#[test]
fn analyze_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONSTANT);
    ok(&networks(dir.path(), &["generate", "--config", "c.json", "--out", "c.mid"]));
    ok(&networks(dir.path(), &["analyze", "c.jsonl", "--per-channel", "--out", "h.csv"]));
    let csv = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn analyze_without_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = networks(dir.path(), &["analyze", "--out", "empty.csv"]);
    ok(&out);
    assert!(stderr(&out).contains("warning"));
    let csv = std::fs::read_to_string(dir.path().join("empty.csv")).unwrap();
    assert_eq!(csv, "piece,group,key,base,entropy,distinct,events\n");
}

#[test]
fn lut_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let data = |text: &str| text.lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();

    let c = ok(&networks(dir.path(), &["lut", "--method", "constant(7)", "--inputs", "4", "--range", "1..13"]));
    let rows = data(&c);
    assert_eq!(rows.len(), 49);
    assert!(rows.iter().all(|l| l.ends_with(" 7")));
    assert!(c.contains("# method constant(7)"));

    ok(&networks(dir.path(), &["lut", "--method", "random", "--inputs", "40", "--seed", "5", "--out", "a.txt"]));
    ok(&networks(dir.path(), &["lut", "--method", "random", "--inputs", "40", "--seed", "5", "--out", "b.txt"]));
    let a = std::fs::read_to_string(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.txt")).unwrap());
    let rows = data(&a);
    assert_eq!(rows.len(), 481);
    assert_eq!(rows.first().unwrap().split(' ').next(), Some("40"));
    assert_eq!(rows.last().unwrap().split(' ').next(), Some("520"));

    let out = networks(dir.path(), &["lut", "--method", "constant(20)", "--inputs", "4"]);
    assert_eq!(out.status.code(), Some(1));
}
