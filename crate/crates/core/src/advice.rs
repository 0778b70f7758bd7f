//! The oracle's offline computation.
//!
//! Given the network and the initially awake set, the oracle partitions the
//! nodes into epochs of actors, assigns each actor the sleeping neighbours it
//! is responsible for, and encodes search hints as short bit strings. A bit
//! string addresses a node of the (implicit) advice tree over a node's ports;
//! the leaves below it form a contiguous port range.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::network::{NodeIndex, Port, PortNetwork, WakeConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdviceError {
    #[error("bit string of length {len} exceeds advice tree depth {depth}")]
    TooDeep { len: usize, depth: u32 },
    #[error("node {w} is not adjacent to node {v}")]
    NotAdjacent { v: u32, w: u32 },
    #[error("node {node} receives proxy advice from actors {first} and {second}")]
    ProxyConflict { node: u32, first: u32, second: u32 },
    #[error("degree must be positive")]
    ZeroDegree,
    #[error("advice dump line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Half of the advice budget: `max(floor((alpha - 1) / 2), 0)`.
pub fn beta(alpha: u32) -> u32 {
    alpha.saturating_sub(1) / 2
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// The `len` low bits of `value`, most significant first.
    pub fn from_value(value: u64, len: usize) -> Self {
        Self((0..len).rev().map(|k| (value >> k) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn value(&self) -> u64 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self(self.0[..len.min(self.0.len())].to_vec())
    }

    /// Right-pads with zeros up to `len`.
    pub fn padded(&self, len: usize) -> Self {
        let mut bits = self.0.clone();
        bits.resize(len.max(bits.len()), false);
        Self(bits)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid bit {other:?}")),
            })
            .collect::<Result<_, _>>()
            .map(Self)
    }
}

/// Inclusive interval of ports `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRange {
    pub lo: Port,
    pub hi: Port,
}

impl PortRange {
    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, port: Port) -> bool {
        (self.lo..=self.hi).contains(&port)
    }

    pub fn intersects(&self, other: &PortRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn ports(&self) -> impl Iterator<Item = Port> {
        self.lo..=self.hi
    }
}

impl fmt::Display for PortRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// Depth of the advice tree over `degree` ports: `log2` of the next power of two.
pub fn tree_depth(degree: usize) -> u32 {
    degree.max(1).next_power_of_two().trailing_zeros()
}

/// Port range below the tree node reached by following `bits` from the root
/// (`0` = left). Padding leaves right of `degree` carry the label `degree`.
pub fn port_range(degree: usize, bits: &BitString) -> Result<PortRange, AdviceError> {
    if degree == 0 {
        return Err(AdviceError::ZeroDegree);
    }
    let depth = tree_depth(degree);
    if bits.len() > depth as usize {
        return Err(AdviceError::TooDeep { len: bits.len(), depth });
    }
    let width = 1u64 << (depth as usize - bits.len());
    let first = bits.value() * width + 1;
    let last = first + width - 1;
    let clamp = |x: u64| x.min(degree as u64) as Port;
    Ok(PortRange { lo: clamp(first), hi: clamp(last) })
}

/// Bits and range of the tree node at level `min(beta, depth)` whose range
/// contains the port from `v` to `w`. When that port is the last one, every
/// padding leaf carries the same label; the node holding the real leaf has
/// the largest range (leftmost on ties) and is the one returned.
pub fn level_beta_range(
    network: &PortNetwork,
    v: NodeIndex,
    w: NodeIndex,
    beta: u32,
) -> Result<(BitString, PortRange), AdviceError> {
    let port = network.port_to(v, w).ok_or(AdviceError::NotAdjacent {
        v: network.id(v),
        w: network.id(w),
    })?;
    Ok(range_of_port(network.degree(v), port, beta))
}

pub fn range_of_port(degree: usize, port: Port, beta: u32) -> (BitString, PortRange) {
    let depth = tree_depth(degree);
    let level = beta.min(depth) as usize;
    let prefix = (port as u64 - 1) >> (depth as usize - level);
    let bits = BitString::from_value(prefix, level);
    let range = port_range(degree, &bits).expect("level never exceeds depth");
    (bits, range)
}

/// One epoch of the oracle's induction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Epoch {
    /// `A_i`, by increasing ID.
    pub actors: Vec<NodeIndex>,
    /// `S_i`: nodes first reached from this epoch's actors.
    pub sleepers: BTreeSet<NodeIndex>,
    /// Per actor, the sleepers assigned to it (possibly empty).
    pub assigned: BTreeMap<NodeIndex, BTreeSet<NodeIndex>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochPlan {
    pub epochs: Vec<Epoch>,
}

impl EpochPlan {
    /// Epochs that wake somebody; equals the awake distance.
    pub fn epoch_count(&self) -> usize {
        self.epochs.iter().filter(|e| !e.sleepers.is_empty()).count()
    }

    /// `(epoch number starting at 1, assigned sleepers)` for an actor.
    pub fn actor_epoch(&self, v: NodeIndex) -> Option<(usize, &BTreeSet<NodeIndex>)> {
        self.epochs
            .iter()
            .enumerate()
            .find_map(|(i, e)| e.assigned.get(&v).map(|s| (i + 1, s)))
    }

    pub fn assigned(&self, v: NodeIndex) -> Option<&BTreeSet<NodeIndex>> {
        self.actor_epoch(v).map(|(_, s)| s)
    }
}

pub fn compute_epoch_plan(network: &PortNetwork, wake: &WakeConfig) -> EpochPlan {
    let n = network.node_count();
    let mut previous: BTreeSet<NodeIndex> = BTreeSet::new();
    let mut current: BTreeSet<NodeIndex> = wake.nodes().collect();
    let mut epochs = Vec::new();
    loop {
        let mut sleepers = BTreeSet::new();
        for &v in &current {
            for w in network.neighbors(v) {
                if !current.contains(&w) && !previous.contains(&w) {
                    sleepers.insert(w);
                }
            }
        }
        let mut taken = vec![false; n];
        let mut assigned = BTreeMap::new();
        for &v in &current {
            let mut mine: BTreeSet<NodeIndex> = network
                .neighbors(v)
                .filter(|&w| sleepers.contains(&w) && !taken[w])
                .collect();
            for &w in &mine {
                taken[w] = true;
            }
            assigned.insert(v, std::mem::take(&mut mine));
        }
        let done = sleepers.is_empty();
        epochs.push(Epoch { actors: current.iter().copied().collect(), sleepers: sleepers.clone(), assigned });
        if done {
            break;
        }
        previous = std::mem::replace(&mut current, sleepers);
    }
    EpochPlan { epochs }
}

/// Per-node advice `(g, lambda, pi)`; `g = None` is the empty advice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Advice {
    pub g: Option<bool>,
    pub lambda: BitString,
    pub pi: BitString,
}

impl Advice {
    pub fn bit_len(&self) -> usize {
        self.g.is_some() as usize + self.lambda.len() + self.pi.len()
    }
}

/// One link `w_j` of an actor's proxy chain with its level-β range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainLink {
    pub node: NodeIndex,
    pub bits: BitString,
    pub range: PortRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdviceTable {
    pub alpha: u32,
    pub beta: u32,
    pub advice: Vec<Advice>,
    /// Chains `w_1..w_k` of actors with `g = 0` and a nonempty assignment.
    pub chains: BTreeMap<NodeIndex, Vec<ChainLink>>,
}

impl AdviceTable {
    /// Advice-free table: every node runs the full search.
    pub fn empty(n: usize, alpha: u32) -> Self {
        Self { alpha, beta: beta(alpha), advice: vec![Advice::default(); n], chains: BTreeMap::new() }
    }

    pub fn get(&self, v: NodeIndex) -> &Advice {
        &self.advice[v]
    }

    /// `id g lambda pi` per line, `-` for empty fields.
    pub fn dump(&self) -> String {
        let field = |b: &BitString| if b.is_empty() { "-".to_string() } else { b.to_string() };
        let mut out = String::new();
        for (v, a) in self.advice.iter().enumerate() {
            let g = match a.g {
                None => "-",
                Some(true) => "1",
                Some(false) => "0",
            };
            out.push_str(&format!("{} {} {} {}\n", v + 1, g, field(&a.lambda), field(&a.pi)));
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<Vec<Advice>, AdviceError> {
        let mut advice = Vec::new();
        for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let err = |reason: String| AdviceError::Parse { line: idx + 1, reason };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", f.len())));
            }
            let id: usize = f[0].parse().map_err(|e| err(format!("{e}")))?;
            if id != advice.len() + 1 {
                return Err(err(format!("expected id {}, found {id}", advice.len() + 1)));
            }
            let g = match f[1] {
                "-" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => return Err(err(format!("bad g {other:?}"))),
            };
            let bits = |s: &str| -> Result<BitString, AdviceError> {
                if s == "-" {
                    Ok(BitString::empty())
                } else {
                    s.parse().map_err(err)
                }
            };
            advice.push(Advice { g, lambda: bits(f[2])?, pi: bits(f[3])? });
        }
        Ok(advice)
    }
}

pub fn assign_advice(
    network: &PortNetwork,
    plan: &EpochPlan,
    alpha: u32,
) -> Result<AdviceTable, AdviceError> {
    let n = network.node_count();
    let mut table = AdviceTable::empty(n, alpha);
    if alpha <= 2 {
        return Ok(table);
    }
    let b = table.beta;
    let mut proxy_owner: Vec<Option<NodeIndex>> = vec![None; n];
    for epoch in &plan.epochs {
        for (&v, assigned) in &epoch.assigned {
            let wide = assigned.len() as u64 >= 1u64 << b.min(63);
            table.advice[v].g = Some(wide);
            if wide || assigned.is_empty() {
                continue;
            }
            let degree = network.degree(v);
            let mut remaining = assigned.clone();
            let mut chain: Vec<ChainLink> = Vec::new();
            while let Some(&w) = remaining.first() {
                let (bits, range) = level_beta_range(network, v, w, b)?;
                remaining.retain(|&x| {
                    let p = network.port_to(v, x).expect("assigned sleepers are neighbours");
                    !range.contains(p)
                });
                chain.push(ChainLink { node: w, bits, range });
            }
            debug_assert!(chain.iter().all(|l| l.range.hi as usize <= degree));
            table.advice[v].lambda = chain[0].bits.padded(b as usize);
            for pair in chain.windows(2) {
                let carrier = pair[0].node;
                if let Some(first) = proxy_owner[carrier] {
                    return Err(AdviceError::ProxyConflict {
                        node: network.id(carrier),
                        first: network.id(first),
                        second: network.id(v),
                    });
                }
                proxy_owner[carrier] = Some(v);
                table.advice[carrier].pi = pair[1].bits.padded(b as usize);
            }
            table.chains.insert(v, chain);
        }
    }
    Ok(table)
}

/// Range invariant violation found by [`audit_ranges`].
#[derive(Debug, Clone, PartialEq)]
pub enum RangeViolation {
    Overlap { actor: NodeIndex, a: PortRange, b: PortRange },
    TooLarge { actor: NodeIndex, range: PortRange, bound: f64 },
    /// Above `n / 2^(beta-1)`. Unavoidable once `2^beta > 2n`, where the
    /// bound drops below one port.
    AboveGlobalBound { actor: NodeIndex, range: PortRange, bound: f64 },
    Uncovered { actor: NodeIndex, sleeper: NodeIndex },
    BudgetExceeded { node: NodeIndex, bits: usize },
}

/// Checks every chain against the range invariants: pairwise disjoint ranges,
/// each of size at most `n'_v / 2^min(beta, depth)` and at most `n / 2^(beta-1)`,
/// jointly covering all assigned sleepers; and every node within budget.
pub fn audit_ranges(network: &PortNetwork, plan: &EpochPlan, table: &AdviceTable) -> Vec<RangeViolation> {
    let mut out = Vec::new();
    let n = network.node_count() as f64;
    for (v, a) in table.advice.iter().enumerate() {
        if a.bit_len() > table.alpha as usize {
            out.push(RangeViolation::BudgetExceeded { node: v, bits: a.bit_len() });
        }
    }
    for (&v, chain) in &table.chains {
        let degree = network.degree(v);
        let depth = tree_depth(degree);
        let local = (1u64 << depth) as f64 / (1u64 << table.beta.min(depth)) as f64;
        let global = n / 2f64.powi(table.beta as i32 - 1);
        for (k, link) in chain.iter().enumerate() {
            let size = link.range.len() as f64;
            if size > local {
                out.push(RangeViolation::TooLarge { actor: v, range: link.range, bound: local });
            }
            if size > global {
                out.push(RangeViolation::AboveGlobalBound { actor: v, range: link.range, bound: global });
            }
            for other in &chain[k + 1..] {
                if link.range.intersects(&other.range) {
                    out.push(RangeViolation::Overlap { actor: v, a: link.range, b: other.range });
                }
            }
        }
        if let Some(assigned) = plan.assigned(v) {
            for &s in assigned {
                let p = network.port_to(v, s).expect("assigned sleepers are neighbours");
                if !chain.iter().any(|l| l.range.contains(p)) {
                    out.push(RangeViolation::Uncovered { actor: v, sleeper: s });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, path_graph, PortAssignment};

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn beta_formula() {
        assert_eq!(beta(0), 0);
        assert_eq!(beta(1), 0);
        assert_eq!(beta(2), 0);
        assert_eq!(beta(3), 1);
        assert_eq!(beta(5), 2);
    }

    #[test]
    fn port_range_examples() {
        assert_eq!(port_range(8, &bits("")).unwrap(), PortRange { lo: 1, hi: 8 });
        assert_eq!(port_range(8, &bits("10")).unwrap(), PortRange { lo: 5, hi: 6 });
        assert_eq!(port_range(5, &bits("1")).unwrap(), PortRange { lo: 5, hi: 5 });
        assert_eq!(port_range(5, &bits("111")).unwrap(), PortRange { lo: 5, hi: 5 });
        assert!(matches!(port_range(5, &bits("0000")), Err(AdviceError::TooDeep { .. })));
        assert_eq!(port_range(1, &bits("")).unwrap(), PortRange { lo: 1, hi: 1 });
    }

    #[test]
    fn level_beta_examples() {
        assert_eq!(range_of_port(8, 3, 2), (bits("01"), PortRange { lo: 3, hi: 4 }));
        assert_eq!(range_of_port(8, 3, 0), (bits(""), PortRange { lo: 1, hi: 8 }));
        assert_eq!(range_of_port(5, 5, 1), (bits("1"), PortRange { lo: 5, hi: 5 }));
        // beta beyond the depth stops at the leaf
        assert_eq!(range_of_port(2, 2, 4), (bits("1"), PortRange { lo: 2, hi: 2 }));
    }

    #[test]
    fn path_plan_and_advice() {
        let g = path_graph(3).unwrap();
        let wake = WakeConfig::new(&g, [0]).unwrap();
        let plan = compute_epoch_plan(&g, &wake);
        assert_eq!(plan.epochs[0].actors, vec![0]);
        assert_eq!(plan.epochs[0].assigned[&0], BTreeSet::from([1]));
        assert_eq!(plan.epochs[1].actors, vec![1]);
        assert_eq!(plan.epochs[1].assigned[&1], BTreeSet::from([2]));
        assert_eq!(plan.epoch_count(), 2);

        let table = assign_advice(&g, &plan, 3).unwrap();
        assert_eq!(table.advice[1].g, Some(false));
        assert_eq!(table.advice[1].lambda, bits("1"));
        assert!(table.advice.iter().all(|a| a.pi.is_empty()));
        assert_eq!(table.advice[2].g, Some(false));
        assert!(table.advice[2].lambda.is_empty());
    }

    #[test]
    fn clique_threshold() {
        let edges: Vec<(u32, u32)> =
            (1..=4).flat_map(|a| (a + 1..=4).map(move |b| (a, b))).collect();
        let g = build_network(4, &edges, PortAssignment::Canonical).unwrap();
        let wake = WakeConfig::new(&g, [1]).unwrap();
        let plan = compute_epoch_plan(&g, &wake);
        assert_eq!(plan.epochs[0].assigned[&1], BTreeSet::from([0, 2, 3]));
        assert_eq!(plan.epochs[1].actors, vec![0, 2, 3]);
        assert!(plan.epochs[1].assigned.values().all(|s| s.is_empty()));
        let table = assign_advice(&g, &plan, 3).unwrap();
        assert_eq!(table.advice[1].g, Some(true));
        assert!(table.advice[1].lambda.is_empty());
        for v in [0, 2, 3] {
            assert_eq!(table.advice[v].g, Some(false));
        }
    }

    #[test]
    fn small_alpha_gives_no_advice() {
        let g = path_graph(5).unwrap();
        let plan = compute_epoch_plan(&g, &WakeConfig::new(&g, [2]).unwrap());
        for alpha in 0..=2 {
            let t = assign_advice(&g, &plan, alpha).unwrap();
            assert!(t.advice.iter().all(|a| a.bit_len() == 0));
        }
    }

    #[test]
    fn star_chain_covers_sleepers() {
        // centre with eight leaves, everything awake except IDs 2 and 8
        let edges: Vec<(u32, u32)> = (2..=9).map(|k| (1, k)).collect();
        let g = build_network(9, &edges, PortAssignment::Canonical).unwrap();
        let wake = WakeConfig::new(&g, [0, 2, 3, 4, 5, 6, 8]).unwrap();
        let plan = compute_epoch_plan(&g, &wake);
        // sleepers 2 and 8 (IDs) at ports 1 and 7
        assert_eq!(plan.epochs[0].assigned[&0], BTreeSet::from([1, 7]));
        let table = assign_advice(&g, &plan, 7).unwrap();
        assert_eq!(table.beta, 3);
        assert_eq!(table.advice[0].g, Some(false));
        let chain = &table.chains[&0];
        assert_eq!(chain.len(), 2);
        assert_eq!(chain[0].range, PortRange { lo: 1, hi: 1 });
        assert_eq!(chain[1].range, PortRange { lo: 7, hi: 7 });
        assert_eq!(table.advice[1].pi, bits("110"));
        assert!(audit_ranges(&g, &plan, &table).is_empty());
    }

    #[test]
    fn dump_round_trips() {
        let g = path_graph(6).unwrap();
        let plan = compute_epoch_plan(&g, &WakeConfig::new(&g, [3]).unwrap());
        let table = assign_advice(&g, &plan, 5).unwrap();
        let text = table.dump();
        assert_eq!(AdviceTable::parse_dump(&text).unwrap(), table.advice);
        assert!(AdviceTable::parse_dump("1 2 - -").is_err());
    }
}
