#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use networks_core::analysis::BehaviorClass;
use networks_core::engine::RawQuartet;
use networks_core::lut::{assign_luts, LutAssignment, LutMethod, LutPlan, ValueRange};
use networks_core::mapping::{DurationMap, EdScale};
use networks_core::topology::{build_custom, ClusterSpec, ModuleKind, NetworkTopology, NodeId, TopologySpec};
use networks_core::{EngineState, MappingConfig, StartPolicy};

pub fn r13() -> ValueRange {
    ValueRange::new(1, 13).unwrap()
}

/// Four voices (cluster 0 of every module), complete clusters, plus a few
/// links across modules and into the hubs.
pub fn sixteen_node() -> Arc<NetworkTopology> {
    let clusters = ModuleKind::ALL
        .iter()
        .map(|&module| ClusterSpec { module, cluster: 0, slots: vec![0, 1, 2, 3], complete: true })
        .collect();
    let n = |m: usize, s: u8| NodeId::at(ModuleKind::ALL[m], 0, s);
    let edges = vec![
        (n(0, 0), n(1, 0)),
        (n(0, 0), n(2, 0)),
        (n(0, 0), n(3, 0)),
        (n(1, 1), n(3, 2)),
        (n(2, 3), n(3, 3)),
        (n(0, 2), n(2, 1)),
    ];
    Arc::new(build_custom(&TopologySpec { clusters, edges, ..TopologySpec::default() }).unwrap())
}

pub fn default_mapping() -> MappingConfig {
    MappingConfig { entry_delay: EdScale::new(100, 1300).unwrap(), ..MappingConfig::default() }
}

pub fn fixed_table_mapping() -> MappingConfig {
    MappingConfig {
        duration: DurationMap::FixedTable { start_ms: 100, step_ms: 50 },
        ..default_mapping()
    }
}

pub fn start(
    t: &Arc<NetworkTopology>,
    method: LutMethod,
    lut_seed: u64,
    seed: u64,
) -> (EngineState, LutAssignment) {
    let a = assign_luts(t, &LutPlan::per_node(method), r13(), lut_seed).unwrap();
    let s = EngineState::init(Arc::clone(t), &a, default_mapping(), StartPolicy::Simultaneous, seed).unwrap();
    (s, a)
}

/// Recomputes a run without any queue. Every node keeps the history of the
/// values it has broadcast together with their arrival times; the register
/// a destination reads at time `t` is the newest arrival at or before `t`,
/// or the initial seed. Voices are scanned for the earliest next activation.
pub fn brute_force(
    t: &NetworkTopology,
    a: &LutAssignment,
    initial: &BTreeMap<NodeId, Vec<(NodeId, u32)>>,
    n_events: usize,
) -> Vec<(u64, u8, RawQuartet)> {
    let range = a.range();
    let delay_of = |ed: u32| 100 + (ed - range.min()) * 1200 / (range.max() - range.min());
    let mut sent: BTreeMap<NodeId, Vec<(u64, u32)>> = BTreeMap::new();
    let voices: Vec<u8> = t.voices().iter().map(|q| q.voice).collect();
    let mut next: BTreeMap<u8, u64> = voices.iter().map(|&v| (v, 0)).collect();
    let mut out = Vec::new();

    let output = |node: NodeId, now: u64, sent: &BTreeMap<NodeId, Vec<(u64, u32)>>| -> u32 {
        let mut sum = 0;
        for &(src, seed) in &initial[&node] {
            let latest = sent
                .get(&src)
                .and_then(|h| h.iter().filter(|(arr, _)| *arr <= now).max_by_key(|(arr, _)| *arr))
                .map(|&(_, v)| v);
            sum += latest.unwrap_or(seed);
        }
        a.get(node).unwrap().lookup(sum)
    };

    while out.len() < n_events {
        let now = *next.values().min().unwrap();
        let due: Vec<u8> = voices.iter().copied().filter(|v| next[v] == now).collect();
        let mut new_sends = Vec::new();
        for v in due {
            let [p, vn, d, e] = ModuleKind::ALL.map(|m| NodeId::in_voice(m, v));
            let ed = output(e, now, &sent);
            let raw = RawQuartet { p: output(p, now, &sent), v: output(vn, now, &sent), d: output(d, now, &sent), ed };
            let arrive = now + u64::from(delay_of(ed));
            for (node, val) in [(p, raw.p), (vn, raw.v), (d, raw.d), (e, raw.ed)] {
                new_sends.push((node, arrive, val));
            }
            next.insert(v, arrive);
            out.push((now, v, raw));
        }
        for (node, arrive, val) in new_sends {
            sent.entry(node).or_default().push((arrive, val));
        }
    }
    out.truncate(n_events);
    out
}

pub fn initial_registers(s: &EngineState) -> BTreeMap<NodeId, Vec<(NodeId, u32)>> {
    s.topology().nodes().iter().map(|&n| (n, s.registers_of(n).unwrap())).collect()
}

/// Period scan written as "the tail is its first `p` symbols repeated".
pub fn brute_period<T: PartialEq>(seq: &[T], max_period: usize, min_repeats: usize) -> BehaviorClass {
    let tail = &seq[seq.len() - max_period * min_repeats..];
    for p in 1..=max_period {
        if tail.iter().enumerate().all(|(i, x)| *x == tail[i % p]) {
            return if p == 1 { BehaviorClass::Class1 } else { BehaviorClass::Class2 { period: p } };
        }
    }
    BehaviorClass::Aperiodic
}

/// `-sum p log2 p` by plain summation.
pub fn direct_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}
