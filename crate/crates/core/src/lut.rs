//! Look-up tables: the node rules. A table maps the sum of a node's input
//! registers to an output in the value range.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, SimRng};
use crate::topology::{ModuleKind, NetworkTopology, NodeId};

/// Upper bound on table length, far above anything a 64-node network needs.
const MAX_TABLE_LEN: u64 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LutError {
    #[error("invalid value range {min}..{max}: need 1 <= min < max")]
    InvalidRange { min: u32, max: u32 },
    #[error("constant {value} outside value range {min}..{max}")]
    ConstantOutOfRange { value: u32, min: u32, max: u32 },
    #[error("ratio multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("random_no_adjacent_repeat needs at least two output values")]
    NoRepeatImpossible,
    #[error("a table needs at least one input")]
    ZeroInputs,
    #[error("table for {n_inputs} inputs over {min}..{max} is too large")]
    TooLarge { n_inputs: usize, min: u32, max: u32 },
    #[error("no LUT method for module {0}")]
    MissingModuleMethod(ModuleKind),
    #[error("global scope needs a method")]
    MissingGlobalMethod,
    #[error("unrecognised LUT method `{0}`")]
    UnknownMethod(String),
    #[error("bad range `{0}` (expected MIN..MAX)")]
    BadRangeSyntax(String),
}

/// Node output alphabet `min..=max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRange")]
pub struct ValueRange {
    min: u32,
    max: u32,
}

#[derive(Deserialize)]
struct RawRange {
    min: u32,
    max: u32,
}

impl TryFrom<RawRange> for ValueRange {
    type Error = LutError;

    fn try_from(raw: RawRange) -> Result<Self, LutError> {
        ValueRange::new(raw.min, raw.max)
    }
}

impl ValueRange {
    pub fn new(min: u32, max: u32) -> Result<Self, LutError> {
        if min < 1 || max <= min {
            return Err(LutError::InvalidRange { min, max });
        }
        Ok(ValueRange { min, max })
    }

    pub fn min(&self) -> u32 {
        self.min
    }

    pub fn max(&self) -> u32 {
        self.max
    }

    /// Number of distinct values.
    pub fn span(&self) -> u32 {
        self.max - self.min + 1
    }

    pub fn contains(&self, v: u32) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

impl Default for ValueRange {
    fn default() -> Self {
        ValueRange { min: 1, max: 13 }
    }
}

impl fmt::Display for ValueRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl FromStr for ValueRange {
    type Err = LutError;

    fn from_str(s: &str) -> Result<Self, LutError> {
        let bad = || LutError::BadRangeSyntax(s.to_string());
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        ValueRange::new(lo, hi)
    }
}

/// How table entries are produced.
///
/// Text form: `random`, `random_no_adjacent_repeat`, `ratio(M)`, `constant(V)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LutMethod {
    Random,
    /// No two neighbouring sums map to the same value.
    RandomNoAdjacentRepeat,
    /// `table[i] = min + (i * multiplier) mod span`.
    Ratio(u32),
    Constant(u32),
}

impl fmt::Display for LutMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LutMethod::Random => f.write_str("random"),
            LutMethod::RandomNoAdjacentRepeat => f.write_str("random_no_adjacent_repeat"),
            LutMethod::Ratio(m) => write!(f, "ratio({m})"),
            LutMethod::Constant(v) => write!(f, "constant({v})"),
        }
    }
}

impl FromStr for LutMethod {
    type Err = LutError;

    fn from_str(s: &str) -> Result<Self, LutError> {
        let t = s.trim();
        let arg = |name: &str| -> Option<Result<u32, LutError>> {
            let rest = t.strip_prefix(name)?;
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| rest.strip_prefix(':'))?;
            Some(inner.trim().parse().map_err(|_| LutError::UnknownMethod(s.to_string())))
        };
        match t {
            "random" => return Ok(LutMethod::Random),
            "random_no_adjacent_repeat" | "no_repeat" => return Ok(LutMethod::RandomNoAdjacentRepeat),
            _ => {}
        }
        if let Some(m) = arg("ratio") {
            return m.map(LutMethod::Ratio);
        }
        if let Some(v) = arg("constant") {
            return v.map(LutMethod::Constant);
        }
        Err(LutError::UnknownMethod(s.to_string()))
    }
}

impl TryFrom<String> for LutMethod {
    type Error = LutError;

    fn try_from(s: String) -> Result<Self, LutError> {
        s.parse()
    }
}

impl From<LutMethod> for String {
    fn from(m: LutMethod) -> String {
        m.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lut {
    n_inputs: usize,
    range: ValueRange,
    table: Vec<u32>,
}

impl Lut {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// Smallest valid sum, `n_inputs * min`.
    pub fn min_sum(&self) -> u32 {
        self.n_inputs as u32 * self.range.min
    }

    /// Largest valid sum, `n_inputs * max`.
    pub fn max_sum(&self) -> u32 {
        self.n_inputs as u32 * self.range.max
    }

    /// Panics if `sum` is outside `min_sum..=max_sum`; the engine only ever
    /// sums in-range registers, so that is a bug, not bad input.
    pub fn lookup(&self, sum: u32) -> u32 {
        match self.try_lookup(sum) {
            Some(v) => v,
            None => panic!(
                "LUT sum {sum} outside domain {}..={} ({} inputs)",
                self.min_sum(),
                self.max_sum(),
                self.n_inputs
            ),
        }
    }

    pub fn try_lookup(&self, sum: u32) -> Option<u32> {
        sum.checked_sub(self.min_sum()).and_then(|i| self.table.get(i as usize).copied())
    }

    /// Text dump: `#` header lines, then one `sum value` line per entry.
    pub fn dump(&self, method: LutMethod, seed: u64) -> String {
        let mut out = format!(
            "# method {method}\n# seed {seed}\n# range {}\n# n_inputs {}\n",
            self.range, self.n_inputs
        );
        for (i, v) in self.table.iter().enumerate() {
            out.push_str(&format!("{} {v}\n", self.min_sum() + i as u32));
        }
        out
    }
}

pub fn generate_lut(method: LutMethod, n_inputs: usize, range: ValueRange, seed: u64) -> Result<Lut, LutError> {
    if n_inputs == 0 {
        return Err(LutError::ZeroInputs);
    }
    let len = (n_inputs as u64) * u64::from(range.max - range.min) + 1;
    if len > MAX_TABLE_LEN || (n_inputs as u64) * u64::from(range.max) > u64::from(u32::MAX) {
        return Err(LutError::TooLarge { n_inputs, min: range.min, max: range.max });
    }
    let len = len as usize;
    let span = range.span();
    let table = match method {
        LutMethod::Constant(value) => {
            if !range.contains(value) {
                return Err(LutError::ConstantOutOfRange { value, min: range.min, max: range.max });
            }
            vec![value; len]
        }
        LutMethod::Ratio(multiplier) => {
            if multiplier == 0 {
                return Err(LutError::ZeroMultiplier);
            }
            (0..len as u64)
                .map(|i| range.min + ((i * u64::from(multiplier)) % u64::from(span)) as u32)
                .collect()
        }
        LutMethod::Random => {
            let mut rng = SimRng::new(seed);
            (0..len).map(|_| range.min + rng.below(span)).collect()
        }
        LutMethod::RandomNoAdjacentRepeat => {
            if span < 2 {
                return Err(LutError::NoRepeatImpossible);
            }
            let mut rng = SimRng::new(seed);
            let mut table = Vec::with_capacity(len);
            let mut prev = rng.below(span);
            table.push(range.min + prev);
            for _ in 1..len {
                let r = rng.below(span - 1);
                prev = if r >= prev { r + 1 } else { r };
                table.push(range.min + prev);
            }
            table
        }
    };
    Ok(Lut { n_inputs, range, table })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LutScope {
    Global,
    PerModule,
    PerNode,
}

/// Which method each node's table uses. Module entries override the default
/// `method` for their module; under [`LutScope::Global`] only `method` is used.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutPlan {
    pub scope: LutScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<LutMethod>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub modules: BTreeMap<ModuleKind, LutMethod>,
}

impl LutPlan {
    pub fn global(method: LutMethod) -> Self {
        LutPlan { scope: LutScope::Global, method: Some(method), modules: BTreeMap::new() }
    }

    pub fn per_node(method: LutMethod) -> Self {
        LutPlan { scope: LutScope::PerNode, method: Some(method), modules: BTreeMap::new() }
    }

    pub fn method_for(&self, module: ModuleKind) -> Result<LutMethod, LutError> {
        match self.scope {
            LutScope::Global => self.method.ok_or(LutError::MissingGlobalMethod),
            LutScope::PerModule | LutScope::PerNode => self
                .modules
                .get(&module)
                .copied()
                .or(self.method)
                .ok_or(LutError::MissingModuleMethod(module)),
        }
    }
}

/// Sentinel for "no module / no node" in sub-seed keys.
const NO_KEY: u64 = u64::MAX;

/// Seed for the table shared by `(scope key, n_inputs)`.
pub fn sub_seed(seed: u64, scope: LutScope, node: NodeId, n_inputs: usize) -> u64 {
    let (module, ordinal) = match scope {
        LutScope::Global => (NO_KEY, NO_KEY),
        LutScope::PerModule => (node.module.ordinal() as u64, NO_KEY),
        LutScope::PerNode => (node.module.ordinal() as u64, node.ordinal() as u64),
    };
    derive_seed(seed, &[module, ordinal, n_inputs as u64])
}

/// One table per node; nodes sharing a scope key and input count share the
/// same `Arc`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LutAssignment {
    scope: LutScope,
    range: ValueRange,
    luts: BTreeMap<NodeId, Arc<Lut>>,
}

impl LutAssignment {
    pub fn scope(&self) -> LutScope {
        self.scope
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn get(&self, node: NodeId) -> Option<&Arc<Lut>> {
        self.luts.get(&node)
    }

    pub fn len(&self) -> usize {
        self.luts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.luts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Arc<Lut>)> {
        self.luts.iter().map(|(&n, l)| (n, l))
    }

    /// Builds an assignment from explicit tables, for experiments and tests.
    pub fn from_tables(scope: LutScope, range: ValueRange, luts: BTreeMap<NodeId, Arc<Lut>>) -> Self {
        LutAssignment { scope, range, luts }
    }
}

pub fn assign_luts(
    topology: &NetworkTopology,
    plan: &LutPlan,
    range: ValueRange,
    seed: u64,
) -> Result<LutAssignment, LutError> {
    let mut shared: BTreeMap<(u64, LutMethod), Arc<Lut>> = BTreeMap::new();
    let mut luts = BTreeMap::new();
    for &node in topology.nodes() {
        let method = plan.method_for(node.module)?;
        let n_inputs = topology.input_count(node).expect("node from topology");
        let s = sub_seed(seed, plan.scope, node, n_inputs);
        let lut = match shared.get(&(s, method)) {
            Some(l) => Arc::clone(l),
            None => {
                let l = Arc::new(generate_lut(method, n_inputs, range, s)?);
                shared.insert((s, method), Arc::clone(&l));
                l
            }
        };
        luts.insert(node, lut);
    }
    Ok(LutAssignment { scope: plan.scope, range, luts })
}

impl PartialOrd for LutMethod {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LutMethod {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        fn key(m: &LutMethod) -> (u8, u32) {
            match *m {
                LutMethod::Random => (0, 0),
                LutMethod::RandomNoAdjacentRepeat => (1, 0),
                LutMethod::Ratio(x) => (2, x),
                LutMethod::Constant(x) => (3, x),
            }
        }
        key(self).cmp(&key(other))
    }
}
