//! Network graph: four 16-node modules of 4-node clusters, joined through
//! cluster hubs, module hubs and the pitch super-hub.
//!
//! Every edge between distinct nodes is bidirectional and every node also
//! receives its own output (self-loop). Input counts therefore include the
//! node itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of clusters per module and nodes per cluster.
pub const CLUSTER_SIZE: u8 = 4;
/// Voices (and MIDI channels) in a full network.
pub const VOICE_COUNT: usize = 16;
/// Nodes in a full network.
pub const MAX_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Pitch,
    Velocity,
    Duration,
    EntryDelay,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 4] = [
        ModuleKind::Pitch,
        ModuleKind::Velocity,
        ModuleKind::Duration,
        ModuleKind::EntryDelay,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn code(self) -> char {
        match self {
            ModuleKind::Pitch => 'p',
            ModuleKind::Velocity => 'v',
            ModuleKind::Duration => 'd',
            ModuleKind::EntryDelay => 'e',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModuleKind::Pitch => "pitch",
            ModuleKind::Velocity => "velocity",
            ModuleKind::Duration => "duration",
            ModuleKind::EntryDelay => "entry_delay",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Address of one node. Slot 0 is the cluster hub; `(m, 0, 0)` is the hub of
/// module `m`; `(Pitch, 0, 0)` is the super-hub.
///
/// The derived ordering is the canonical node order used everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawNodeId")]
pub struct NodeId {
    pub module: ModuleKind,
    pub cluster: u8,
    pub slot: u8,
}

#[derive(Deserialize)]
struct RawNodeId {
    module: ModuleKind,
    cluster: u8,
    slot: u8,
}

impl TryFrom<RawNodeId> for NodeId {
    type Error = TopologyError;

    fn try_from(raw: RawNodeId) -> Result<Self, Self::Error> {
        NodeId::new(raw.module, raw.cluster, raw.slot)
    }
}

impl NodeId {
    pub const SUPER_HUB: NodeId = NodeId::at(ModuleKind::Pitch, 0, 0);

    pub fn new(module: ModuleKind, cluster: u8, slot: u8) -> Result<Self, TopologyError> {
        if cluster >= CLUSTER_SIZE || slot >= CLUSTER_SIZE {
            return Err(TopologyError::InvalidNode { module, cluster, slot });
        }
        Ok(NodeId { module, cluster, slot })
    }

    /// Panics on an out-of-range cluster or slot. For literals.
    pub const fn at(module: ModuleKind, cluster: u8, slot: u8) -> Self {
        assert!(cluster < CLUSTER_SIZE && slot < CLUSTER_SIZE);
        NodeId { module, cluster, slot }
    }

    pub fn module_hub(module: ModuleKind) -> Self {
        NodeId::at(module, 0, 0)
    }

    /// Position in the canonical order, 0..64.
    pub fn ordinal(self) -> usize {
        self.module.ordinal() * 16 + self.voice() as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Option<Self> {
        if ordinal >= MAX_NODES {
            return None;
        }
        let module = ModuleKind::ALL[ordinal / 16];
        let voice = (ordinal % 16) as u8;
        Some(NodeId::at(module, voice / CLUSTER_SIZE, voice % CLUSTER_SIZE))
    }

    /// Voice index `4 * cluster + slot`.
    pub fn voice(self) -> u8 {
        self.cluster * CLUSTER_SIZE + self.slot
    }

    pub fn in_voice(module: ModuleKind, voice: u8) -> Self {
        NodeId::at(module, voice / CLUSTER_SIZE, voice % CLUSTER_SIZE)
    }

    pub fn is_cluster_hub(self) -> bool {
        self.slot == 0
    }

    pub fn is_module_hub(self) -> bool {
        self.slot == 0 && self.cluster == 0
    }

    /// Identifier used in DOT output, e.g. `p_0_0`.
    pub fn dot_id(self) -> String {
        format!("{}_{}_{}", self.module.code(), self.cluster, self.slot)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.module, self.cluster, self.slot)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("invalid node address {module}({cluster},{slot}): cluster and slot must be below 4")]
    InvalidNode { module: ModuleKind, cluster: u8, slot: u8 },
    #[error("edge {0} -- {1} listed more than once")]
    DuplicateEdge(NodeId, NodeId),
    #[error("self edge {0} in the edge list; self-loops are implicit")]
    SelfEdge(NodeId),
    #[error("node {0} has no self-loop")]
    MissingSelfLoop(NodeId),
    #[error("arc {0} -> {1} has no reverse arc")]
    AsymmetricEdge(NodeId, NodeId),
    #[error("voice {voice} is missing its {module} node")]
    IncompleteVoice { voice: u8, module: ModuleKind },
    #[error("topology has no nodes")]
    Empty,
    #[error("node {0} is not part of the topology")]
    UnknownNode(NodeId),
    #[error("edge {0} -- {1} does not exist")]
    UnknownEdge(NodeId, NodeId),
    #[error("cannot remove the self-loop of {0}")]
    SelfLoopRemoval(NodeId),
    #[error("input cap must be at least 1 (the self-loop), got {0}")]
    InvalidCap(usize),
    #[error("node {node} lists {input} as an input more than once")]
    DuplicateInput { node: NodeId, input: NodeId },
    #[error("node {0} has more than one adjacency entry")]
    DuplicateNode(NodeId),
    #[error("unknown preset `{name}`; available presets: {}", available.join(", "))]
    UnknownPreset { name: String, available: Vec<&'static str> },
}

/// The four nodes that share one voice index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VoiceQuartet {
    pub voice: u8,
    pub pitch: NodeId,
    pub velocity: NodeId,
    pub duration: NodeId,
    pub entry_delay: NodeId,
}

impl VoiceQuartet {
    pub fn of(voice: u8) -> Self {
        VoiceQuartet {
            voice,
            pitch: NodeId::in_voice(ModuleKind::Pitch, voice),
            velocity: NodeId::in_voice(ModuleKind::Velocity, voice),
            duration: NodeId::in_voice(ModuleKind::Duration, voice),
            entry_delay: NodeId::in_voice(ModuleKind::EntryDelay, voice),
        }
    }

    /// Nodes in module order.
    pub fn nodes(&self) -> [NodeId; 4] {
        [self.pitch, self.velocity, self.duration, self.entry_delay]
    }
}

/// Immutable network graph. Adjacency is stored densely: node `i` of
/// [`NetworkTopology::nodes`] has inputs `inputs[i]`, a sorted list of dense
/// indices that always contains `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkTopology {
    nodes: Vec<NodeId>,
    index: [Option<u8>; MAX_NODES],
    inputs: Vec<Vec<usize>>,
}

impl NetworkTopology {
    fn from_undirected(
        nodes: BTreeSet<NodeId>,
        edges: &BTreeSet<(NodeId, NodeId)>,
    ) -> Result<Self, TopologyError> {
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.iter().map(|&n| (n, BTreeSet::from([n]))).collect();
        for &(a, b) in edges {
            adjacency.entry(a).or_default().insert(b);
            adjacency.entry(b).or_default().insert(a);
            adjacency.entry(a).or_default().insert(a);
            adjacency.entry(b).or_default().insert(b);
        }
        let topology = Self::from_adjacency(adjacency)?;
        topology.check_voices()?;
        Ok(topology)
    }

    fn from_adjacency(adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>) -> Result<Self, TopologyError> {
        if adjacency.is_empty() {
            return Err(TopologyError::Empty);
        }
        let nodes: Vec<NodeId> = adjacency.keys().copied().collect();
        let mut index = [None; MAX_NODES];
        for (i, n) in nodes.iter().enumerate() {
            index[n.ordinal()] = Some(i as u8);
        }
        let mut inputs = Vec::with_capacity(nodes.len());
        for (node, sources) in &adjacency {
            let mut list = Vec::with_capacity(sources.len());
            for src in sources {
                match index[src.ordinal()] {
                    Some(i) => list.push(i as usize),
                    None => return Err(TopologyError::UnknownNode(*src)),
                }
            }
            debug_assert!(list.windows(2).all(|w| w[0] < w[1]), "{node} inputs unsorted");
            inputs.push(list);
        }
        Ok(NetworkTopology { nodes, index, inputs })
    }

    fn check_voices(&self) -> Result<(), TopologyError> {
        for &n in &self.nodes {
            for module in ModuleKind::ALL {
                if !self.contains(NodeId::in_voice(module, n.voice())) {
                    return Err(TopologyError::IncompleteVoice { voice: n.voice(), module });
                }
            }
        }
        Ok(())
    }

    /// Nodes in canonical order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.index[node.ordinal()].is_some()
    }

    /// Dense index of `node`.
    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.index[node.ordinal()].map(usize::from)
    }

    /// Dense input indices of the node at dense index `i`.
    pub fn inputs_of(&self, i: usize) -> &[usize] {
        &self.inputs[i]
    }

    pub fn in_neighbors(&self, node: NodeId) -> Option<Vec<NodeId>> {
        let i = self.index_of(node)?;
        Some(self.inputs[i].iter().map(|&j| self.nodes[j]).collect())
    }

    pub fn input_count(&self, node: NodeId) -> Option<usize> {
        self.index_of(node).map(|i| self.inputs[i].len())
    }

    /// Total number of directed inputs, self-loops included.
    pub fn total_inputs(&self) -> usize {
        self.inputs.iter().map(Vec::len).sum()
    }

    /// Distinct-node edges as canonical `(lower, higher)` pairs, each once.
    /// Only edges present in both directions are listed.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (i, list) in self.inputs.iter().enumerate() {
            for &j in list {
                if j > i && self.inputs[j].binary_search(&i).is_ok() {
                    out.push((self.nodes[i], self.nodes[j]));
                }
            }
        }
        out
    }

    /// Voice quartets for every voice whose four nodes are all present,
    /// ascending by voice index.
    pub fn voices(&self) -> Vec<VoiceQuartet> {
        (0..VOICE_COUNT as u8)
            .map(VoiceQuartet::of)
            .filter(|q| q.nodes().iter().all(|&n| self.contains(n)))
            .collect()
    }

    fn undirected_edge_set(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges().into_iter().collect()
    }
}

/// The canonical 64-node preset.
///
/// Per module `m`, with cluster hubs `h(m,c) = (m,c,0)`, module hub
/// `H_m = (m,0,0)` and super-hub `S = (Pitch,0,0)`:
///
/// * every cluster is complete;
/// * in each non-pitch module, `H_m` links to `h(m,1..3)`, to leaves
///   `(m,c,1)` and `(m,c,2)` for `c` in `1..3`, and to `(m,1,3)`, `(m,2,3)`;
/// * `S` links to `h(P,1..3)` and to leaves `(P,c,1)`, `(P,c,2)` for `c` in
///   `1..3`;
/// * `S` links, in each non-pitch module, to `h(m,1..3)` and to leaves
///   `(m,c,1)`, `(m,c,2)` for `c` in `1..3`.
///
/// Input counts come out as `{4: 18, 5: 15, 6: 27, 15: 3, 40: 1}`.
pub fn build_paper64() -> NetworkTopology {
    let mut edges = BTreeSet::new();
    let mut link = |a: NodeId, b: NodeId| {
        edges.insert(if a < b { (a, b) } else { (b, a) });
    };
    let s = NodeId::SUPER_HUB;
    for m in ModuleKind::ALL {
        for c in 0..CLUSTER_SIZE {
            for a in 0..CLUSTER_SIZE {
                for b in a + 1..CLUSTER_SIZE {
                    link(NodeId::at(m, c, a), NodeId::at(m, c, b));
                }
            }
        }
        let hub = NodeId::module_hub(m);
        for c in 1..CLUSTER_SIZE {
            let cluster_hub = NodeId::at(m, c, 0);
            let leaves = [NodeId::at(m, c, 1), NodeId::at(m, c, 2)];
            // In the pitch module the module hub is the super-hub, so both
            // rule sets coincide there.
            link(s, cluster_hub);
            leaves.iter().for_each(|&l| link(s, l));
            if m != ModuleKind::Pitch {
                link(hub, cluster_hub);
                leaves.iter().for_each(|&l| link(hub, l));
            }
        }
        if m != ModuleKind::Pitch {
            link(hub, NodeId::at(m, 1, 3));
            link(hub, NodeId::at(m, 2, 3));
        }
    }
    let nodes = (0..MAX_NODES).filter_map(NodeId::from_ordinal).collect();
    NetworkTopology::from_undirected(nodes, &edges).expect("paper64 wiring is valid")
}

pub const PRESETS: [&str; 1] = ["paper64"];

pub fn build_preset(name: &str) -> Result<NetworkTopology, TopologyError> {
    match name {
        "paper64" => Ok(build_paper64()),
        _ => Err(TopologyError::UnknownPreset { name: name.to_string(), available: PRESETS.to_vec() }),
    }
}

fn default_true() -> bool {
    true
}

fn all_slots() -> Vec<u8> {
    (0..CLUSTER_SIZE).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub module: ModuleKind,
    pub cluster: u8,
    #[serde(default = "all_slots")]
    pub slots: Vec<u8>,
    /// Link every pair of members.
    #[serde(default = "default_true")]
    pub complete: bool,
}

/// Description accepted by [`build_custom`]. The graph-json export is a valid
/// instance (it uses only `nodes` and `edges`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    #[serde(default)]
    pub nodes: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<ClusterSpec>,
    /// Undirected edges between distinct nodes, each listed once.
    #[serde(default)]
    pub edges: Vec<(NodeId, NodeId)>,
    /// Directed `(source, destination)` inputs. Must include every self-loop
    /// and be symmetric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcs: Option<Vec<(NodeId, NodeId)>>,
}

pub fn build_custom(spec: &TopologySpec) -> Result<NetworkTopology, TopologyError> {
    let mut nodes: BTreeSet<NodeId> = spec.nodes.iter().copied().collect();
    let mut edges = BTreeSet::new();
    let add = |a: NodeId, b: NodeId, edges: &mut BTreeSet<(NodeId, NodeId)>| {
        if a == b {
            return Err(TopologyError::SelfEdge(a));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if !edges.insert(key) {
            return Err(TopologyError::DuplicateEdge(key.0, key.1));
        }
        Ok(())
    };

    for cluster in &spec.clusters {
        let mut members = Vec::new();
        for &slot in &cluster.slots {
            let n = NodeId::new(cluster.module, cluster.cluster, slot)?;
            if !members.contains(&n) {
                members.push(n);
            }
        }
        members.sort();
        nodes.extend(&members);
        if cluster.complete {
            for (i, &a) in members.iter().enumerate() {
                for &b in &members[i + 1..] {
                    add(a, b, &mut edges)?;
                }
            }
        }
    }

    for &(a, b) in &spec.edges {
        nodes.insert(a);
        nodes.insert(b);
        add(a, b, &mut edges)?;
    }

    if let Some(arcs) = &spec.arcs {
        let mut seen = BTreeSet::new();
        for &(src, dst) in arcs {
            if !seen.insert((src, dst)) {
                return Err(TopologyError::DuplicateEdge(src, dst));
            }
        }
        let arc_nodes: BTreeSet<NodeId> = arcs.iter().flat_map(|&(a, b)| [a, b]).collect();
        for &n in nodes.iter().chain(&arc_nodes) {
            if !seen.contains(&(n, n)) {
                return Err(TopologyError::MissingSelfLoop(n));
            }
        }
        for &(src, dst) in &seen {
            if !seen.contains(&(dst, src)) {
                return Err(TopologyError::AsymmetricEdge(src, dst));
            }
        }
        nodes.extend(arc_nodes);
        for &(src, dst) in &seen {
            if src < dst {
                add(src, dst, &mut edges)?;
            }
        }
    }

    NetworkTopology::from_undirected(nodes, &edges)
}

/// Which edges of an over-capped node go first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalPolicy {
    HighestOrderFirst,
    LowestOrderFirst,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapTarget {
    Node(NodeId),
    ModuleHubs,
    ClusterHubs,
    AllNodes,
}

impl CapTarget {
    fn matches(&self, n: NodeId) -> bool {
        match self {
            CapTarget::Node(id) => *id == n,
            CapTarget::ModuleHubs => n.is_module_hub(),
            CapTarget::ClusterHubs => n.is_cluster_hub(),
            CapTarget::AllNodes => true,
        }
    }
}

/// Limit the input count (self-loop included) of the targeted nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputCap {
    pub target: CapTarget,
    pub max_inputs: usize,
    pub policy: RemovalPolicy,
}

/// Edge removals are applied first, then caps in list order. Each capped
/// node is processed in canonical order, removing one edge (both directions)
/// at a time until it is within its cap.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneSpec {
    #[serde(default)]
    pub remove_edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    pub caps: Vec<InputCap>,
}

impl PruneSpec {
    pub fn is_empty(&self) -> bool {
        self.remove_edges.is_empty() && self.caps.is_empty()
    }
}

pub fn prune(topology: &NetworkTopology, spec: &PruneSpec) -> Result<NetworkTopology, TopologyError> {
    let mut edges = topology.undirected_edge_set();
    for &(a, b) in &spec.remove_edges {
        for n in [a, b] {
            if !topology.contains(n) {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        if a == b {
            return Err(TopologyError::SelfLoopRemoval(a));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if !edges.remove(&key) {
            return Err(TopologyError::UnknownEdge(key.0, key.1));
        }
    }

    for cap in &spec.caps {
        if cap.max_inputs == 0 {
            return Err(TopologyError::InvalidCap(0));
        }
        if let CapTarget::Node(n) = cap.target {
            if !topology.contains(n) {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        for &node in topology.nodes().iter().filter(|&&n| cap.target.matches(n)) {
            let mut peers: Vec<NodeId> = edges
                .iter()
                .filter_map(|&(a, b)| match (a == node, b == node) {
                    (true, _) => Some(b),
                    (_, true) => Some(a),
                    _ => None,
                })
                .collect();
            peers.sort();
            let excess = (peers.len() + 1).saturating_sub(cap.max_inputs);
            let doomed: Vec<NodeId> = match cap.policy {
                RemovalPolicy::HighestOrderFirst => peers.iter().rev().take(excess).copied().collect(),
                RemovalPolicy::LowestOrderFirst => peers.iter().take(excess).copied().collect(),
            };
            for peer in doomed {
                let key = if node < peer { (node, peer) } else { (peer, node) };
                edges.remove(&key);
            }
        }
    }

    NetworkTopology::from_undirected(topology.nodes().iter().copied().collect(), &edges)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuperHubComposition {
    pub input_count: usize,
    pub self_loop: bool,
    /// In-neighbors other than the super-hub itself, by module.
    pub per_module: BTreeMap<ModuleKind, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub node_count: usize,
    pub total_inputs: usize,
    /// Input count -> number of nodes with that count.
    pub degree_histogram: BTreeMap<usize, usize>,
    pub super_hub: Option<SuperHubComposition>,
    /// `(a, b)`: `a` feeds `b` but `b` does not feed `a`.
    pub symmetry_violations: Vec<(NodeId, NodeId)>,
    pub missing_self_loops: Vec<NodeId>,
    pub incomplete_voices: Vec<u8>,
    pub connected: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.symmetry_violations.is_empty()
            && self.missing_self_loops.is_empty()
            && self.incomplete_voices.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes: {}", self.node_count)?;
        writeln!(f, "total inputs: {}", self.total_inputs)?;
        let hist: Vec<String> = self.degree_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        writeln!(f, "input-count histogram: {{{}}}", hist.join(", "))?;
        if let Some(hub) = &self.super_hub {
            let parts: Vec<String> = hub.per_module.iter().map(|(m, n)| format!("{n} {m}")).collect();
            writeln!(
                f,
                "super-hub inputs: {} ({}self + {})",
                hub.input_count,
                if hub.self_loop { "1 " } else { "0 " },
                parts.join(" + ")
            )?;
        }
        writeln!(f, "connected: {}", self.connected)?;
        writeln!(f, "symmetry violations: {}", self.symmetry_violations.len())?;
        for (a, b) in &self.symmetry_violations {
            writeln!(f, "  {a} -> {b} without reverse")?;
        }
        writeln!(f, "missing self-loops: {}", self.missing_self_loops.len())?;
        write!(f, "incomplete voices: {}", self.incomplete_voices.len())
    }
}

pub fn validate(topology: &NetworkTopology) -> ValidationReport {
    let mut degree_histogram = BTreeMap::new();
    let mut symmetry_violations = Vec::new();
    let mut missing_self_loops = Vec::new();
    for (i, list) in topology.inputs.iter().enumerate() {
        *degree_histogram.entry(list.len()).or_insert(0) += 1;
        if list.binary_search(&i).is_err() {
            missing_self_loops.push(topology.nodes[i]);
        }
        for &src in list {
            if src != i && topology.inputs[src].binary_search(&i).is_err() {
                symmetry_violations.push((topology.nodes[src], topology.nodes[i]));
            }
        }
    }
    symmetry_violations.sort();

    let super_hub = topology.index_of(NodeId::SUPER_HUB).map(|i| {
        let mut per_module: BTreeMap<ModuleKind, usize> = ModuleKind::ALL.iter().map(|&m| (m, 0)).collect();
        let mut self_loop = false;
        for &j in &topology.inputs[i] {
            if j == i {
                self_loop = true;
            } else {
                *per_module.get_mut(&topology.nodes[j].module).unwrap() += 1;
            }
        }
        SuperHubComposition { input_count: topology.inputs[i].len(), self_loop, per_module }
    });

    let mut incomplete_voices: Vec<u8> = topology
        .nodes
        .iter()
        .filter(|n| ModuleKind::ALL.iter().any(|&m| !topology.contains(NodeId::in_voice(m, n.voice()))))
        .map(|n| n.voice())
        .collect();
    incomplete_voices.dedup();
    incomplete_voices.sort();
    incomplete_voices.dedup();

    ValidationReport {
        node_count: topology.len(),
        total_inputs: topology.total_inputs(),
        degree_histogram,
        super_hub,
        symmetry_violations,
        missing_self_loops,
        incomplete_voices,
        connected: is_connected(topology),
    }
}

/// Weak connectivity over inputs in either direction.
fn is_connected(topology: &NetworkTopology) -> bool {
    let n = topology.len();
    let mut undirected = vec![Vec::new(); n];
    for (i, list) in topology.inputs.iter().enumerate() {
        for &j in list {
            undirected[i].push(j);
            undirected[j].push(i);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &undirected[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFormat {
    GraphDot,
    GraphJson,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph-dot" | "dot" => Ok(GraphFormat::GraphDot),
            "graph-json" | "json" => Ok(GraphFormat::GraphJson),
            other => Err(format!("unknown graph format `{other}` (expected graph-dot or graph-json)")),
        }
    }
}

pub fn export_graph(topology: &NetworkTopology, format: GraphFormat) -> String {
    match format {
        GraphFormat::GraphJson => {
            let doc = TopologySpec {
                nodes: topology.nodes().to_vec(),
                edges: topology.edges(),
                ..TopologySpec::default()
            };
            let mut text = serde_json::to_string_pretty(&doc).expect("topology serializes");
            text.push('\n');
            text
        }
        GraphFormat::GraphDot => {
            let mut out = String::from("digraph networks {\n");
            for n in topology.nodes() {
                out.push_str(&format!(
                    "  {} [label=\"{} {}.{}\", module={}, cluster={}, slot={}];\n",
                    n.dot_id(),
                    n.module,
                    n.cluster,
                    n.slot,
                    n.module,
                    n.cluster,
                    n.slot
                ));
            }
            for (a, b) in topology.edges() {
                out.push_str(&format!("  {} -> {} [dir=both];\n", a.dot_id(), b.dot_id()));
            }
            for (i, n) in topology.nodes().iter().enumerate() {
                if topology.inputs_of(i).contains(&i) {
                    out.push_str(&format!("  {} -> {};\n", n.dot_id(), n.dot_id()));
                }
            }
            out.push_str("}\n");
            out
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AdjacencyEntry {
    node: NodeId,
    inputs: Vec<NodeId>,
}

#[derive(Serialize, Deserialize)]
struct AdjacencyDoc {
    in_neighbors: Vec<AdjacencyEntry>,
}

impl Serialize for NetworkTopology {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let doc = AdjacencyDoc {
            in_neighbors: self
                .nodes
                .iter()
                .map(|&node| AdjacencyEntry { node, inputs: self.in_neighbors(node).unwrap() })
                .collect(),
        };
        doc.serialize(serializer)
    }
}

/// Deserialization keeps the adjacency as written (no symmetry or self-loop
/// checks) so hand-edited documents can be inspected with [`validate`].
impl<'de> Deserialize<'de> for NetworkTopology {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AdjacencyDoc::deserialize(deserializer)?;
        let mut adjacency = BTreeMap::new();
        for entry in doc.in_neighbors {
            let mut set = BTreeSet::new();
            for input in entry.inputs {
                if !set.insert(input) {
                    return Err(D::Error::custom(TopologyError::DuplicateInput { node: entry.node, input }));
                }
            }
            if adjacency.insert(entry.node, set).is_some() {
                return Err(D::Error::custom(TopologyError::DuplicateNode(entry.node)));
            }
        }
        NetworkTopology::from_adjacency(adjacency).map_err(D::Error::custom)
    }
}
