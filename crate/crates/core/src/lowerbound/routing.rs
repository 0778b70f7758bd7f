//! Register-level simulation of one communication round on a hidden-matching
//! instance, driven only by queries to the matching.
//!
//! Every basis configuration holds the port-send registers written by the
//! nodes, the outbox, the edge-level send/receive registers, and the
//! workspace `(I, J, B)`. All steps permute basis configurations (up to a
//! sign), so the state is kept as a sparse map from configuration to
//! amplitude. Per outbox entry the round applies load, lookup, dispatch,
//! lookup, load; the two lookups are the only oracle applications.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use super::{tgt, LowerBoundError, QueryOracle};
use crate::network::hidden::CliquePorts;
use crate::network::Port;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HNode {
    Center(u32),
    Pendant(u32),
}

impl fmt::Display for HNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Center(i) => write!(f, "v{i}"),
            Self::Pendant(i) => write!(f, "w{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Classical,
    Quantum,
}

/// Opaque message token tagged with the channel it travels on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Message {
    pub token: u32,
    pub channel: Channel,
}

impl Message {
    pub fn quantum(token: u32) -> Self {
        Self { token, channel: Channel::Quantum }
    }

    pub fn classical(token: u32) -> Self {
        Self { token, channel: Channel::Classical }
    }
}

/// `None` fields are the vacuum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutboxEntry {
    pub index: Option<(u32, Port)>,
    pub message: Option<Message>,
}

/// One computational-basis configuration. Absent map keys are vacuum.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    /// Port-send registers of the centres, keyed `(i, port)`.
    pub psend: BTreeMap<(u32, Port), Message>,
    /// Port-send register of pendant `w_i` (single port).
    pub pendant_send: BTreeMap<u32, Message>,
    pub outbox: Vec<OutboxEntry>,
    /// `send[u -> v]`, keyed `(u, v)`.
    pub send: BTreeMap<(HNode, HNode), Message>,
    /// `receive[v <- u]`, keyed `(v, u)`.
    pub receive: BTreeMap<(HNode, HNode), Message>,
    pub work_i: Option<u32>,
    pub work_j: Option<Port>,
    pub answer: bool,
}

impl Configuration {
    /// A start-of-round configuration in which centre `v_i` writes each
    /// `(port, message)` of `sends`.
    pub fn with_sends(sends: impl IntoIterator<Item = (u32, Port, Message)>) -> Self {
        Self { psend: sends.into_iter().map(|(i, j, m)| ((i, j), m)).collect(), ..Default::default() }
    }

    fn is_round_start(&self) -> bool {
        self.outbox.is_empty()
            && self.send.is_empty()
            && self.receive.is_empty()
            && self.work_i.is_none()
            && self.work_j.is_none()
            && !self.answer
    }

    /// Clears outbox indices left behind by the load steps.
    pub fn reset_outbox(&mut self) {
        self.outbox.clear();
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseQuantumState {
    amps: BTreeMap<Configuration, Complex64>,
}

impl SparseQuantumState {
    pub fn basis(config: Configuration) -> Self {
        Self::from_branches([(config, Complex64::new(1.0, 0.0))])
    }

    pub fn from_branches(branches: impl IntoIterator<Item = (Configuration, Complex64)>) -> Self {
        let mut s = Self::default();
        for (c, a) in branches {
            *s.amps.entry(c).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, config: &Configuration) -> Complex64 {
        self.amps.get(config).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, &Complex64)> {
        self.amps.iter()
    }

    /// Largest amplitude difference over the union of supports.
    pub fn distance(&self, other: &Self) -> f64 {
        self.amps
            .keys()
            .chain(other.amps.keys())
            .map(|c| (self.amplitude(c) - other.amplitude(c)).norm())
            .fold(0.0, f64::max)
    }

    /// Applies a basis permutation with optional sign to every branch.
    fn map(self, mut f: impl FnMut(Configuration) -> (Configuration, f64)) -> Self {
        Self::from_branches(self.amps.into_iter().map(|(c, a)| {
            let (c, s) = f(c);
            (c, a * s)
        }))
    }

    /// Drops outbox leftovers in every branch.
    pub fn without_outbox(self) -> Self {
        self.map(|mut c| {
            c.reset_outbox();
            (c, 1.0)
        })
    }
}

/// Instance data that is independent of the hidden matching.
#[derive(Debug, Clone)]
pub struct RoutingContext<'a> {
    pub clique_ports: &'a CliquePorts,
    /// Nodes whose quantum interface reflects phase `-1`.
    pub asleep: BTreeSet<HNode>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("a branch sends {sends} messages but only {mu_r} outbox entries exist")]
    Overflow { sends: usize, mu_r: usize },
    #[error("registers are not vacuum at the start of the round")]
    NotVacuum,
    #[error(transparent)]
    Query(#[from] LowerBoundError),
    #[error("norm drifted to {0}")]
    NormalizationDrift(f64),
}

fn swap_slot<K: Ord>(map: &mut BTreeMap<K, Message>, key: K, slot: &mut Option<Message>) {
    let held = map.remove(&key);
    if let Some(m) = slot.take() {
        map.insert(key, m);
    }
    *slot = held;
}

/// Routes one round. Returns the new state and the number of oracle
/// applications, always `2 * mu_r`.
pub fn simulate_routing_round(
    state: SparseQuantumState,
    mu_r: usize,
    oracle: &mut dyn QueryOracle,
    ctx: &RoutingContext<'_>,
) -> Result<(SparseQuantumState, u64), RoutingError> {
    for c in state.amps.keys() {
        if !c.is_round_start() {
            return Err(RoutingError::NotVacuum);
        }
        if c.psend.len() > mu_r {
            return Err(RoutingError::Overflow { sends: c.psend.len(), mu_r });
        }
        for &(i, j) in c.psend.keys() {
            if !ctx.clique_ports.is_valid_port(i, j) {
                return Err(LowerBoundError::InvalidPort { i, port: j }.into());
            }
        }
    }
    let start_norm = state.norm_sqr();

    // push: stable compaction by (centre, port)
    let mut state = state.map(|mut c| {
        let mut outbox: Vec<OutboxEntry> = std::mem::take(&mut c.psend)
            .into_iter()
            .map(|(idx, m)| OutboxEntry { index: Some(idx), message: Some(m) })
            .collect();
        outbox.resize(mu_r, OutboxEntry::default());
        c.outbox = outbox;
        (c, 1.0)
    });

    let mut queries = 0u64;
    for t in 0..mu_r {
        state = state.map(|mut c| {
            load(&mut c, t);
            (c, 1.0)
        });
        state = lookup(state, oracle, ctx.clique_ports)?;
        queries += 1;
        let mut failure = None;
        state = state.map(|mut c| {
            if let (Some(i), Some(j)) = (c.work_i, c.work_j) {
                match tgt(i, j, c.answer, ctx.clique_ports) {
                    Ok(dest) => swap_slot(&mut c.send, (HNode::Center(i), dest), &mut c.outbox[t].message),
                    Err(e) => failure = Some(e),
                }
            }
            (c, 1.0)
        });
        if let Some(e) = failure {
            return Err(e.into());
        }
        state = lookup(state, oracle, ctx.clique_ports)?;
        queries += 1;
        state = state.map(|mut c| {
            load(&mut c, t);
            (c, 1.0)
        });
    }

    // pendant traffic has a fixed destination and needs no query
    state = state.map(|mut c| {
        for (i, m) in std::mem::take(&mut c.pendant_send) {
            c.send.insert((HNode::Pendant(i), HNode::Center(i)), m);
        }
        (c, 1.0)
    });

    state = state.map(|mut c| {
        let mut sign = 1.0;
        for ((u, v), m) in std::mem::take(&mut c.send) {
            if m.channel == Channel::Quantum && ctx.asleep.contains(&v) {
                sign = -sign;
            }
            c.receive.insert((v, u), m);
        }
        (c, sign)
    });

    let end_norm = state.norm_sqr();
    if (end_norm - start_norm).abs() > 1e-12 {
        return Err(RoutingError::NormalizationDrift(end_norm));
    }
    Ok((state, queries))
}

/// Swaps `(I, J)` with the index pair of outbox entry `t`.
fn load(c: &mut Configuration, t: usize) {
    let entry = &mut c.outbox[t];
    let work = c.work_i.zip(c.work_j);
    let stored = entry.index;
    entry.index = work;
    c.work_i = stored.map(|(i, _)| i);
    c.work_j = stored.map(|(_, j)| j);
}

/// One superposed oracle application: `B ^= P[I][partner(I, J)]` in every branch.
fn lookup(
    state: SparseQuantumState,
    oracle: &mut dyn QueryOracle,
    ports: &CliquePorts,
) -> Result<SparseQuantumState, RoutingError> {
    let points: BTreeSet<(u32, u32)> = state
        .amps
        .keys()
        .filter_map(|c| c.work_i.zip(c.work_j))
        .map(|(i, j)| (i, ports.partner(i, j)))
        .collect();
    let points: Vec<(u32, u32)> = points.into_iter().collect();
    let answers = oracle.apply(&points)?;
    let table: BTreeMap<(u32, u32), bool> = points.into_iter().zip(answers).collect();
    Ok(state.map(|mut c| {
        if let Some((i, j)) = c.work_i.zip(c.work_j) {
            c.answer ^= table[&(i, ports.partner(i, j))];
        }
        (c, 1.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::PermutationOracle;

    #[test]
    fn single_send_reaches_clique_partner() {
        let ports = CliquePorts::canonical(4);
        // matching (1 2)(3 4); port 2 of v1 leads to v3, not matched
        let mut oracle = PermutationOracle::new(vec![2, 1, 4, 3]).unwrap();
        let ctx = RoutingContext { clique_ports: &ports, asleep: BTreeSet::new() };
        let m = Message::quantum(7);
        let state = SparseQuantumState::basis(Configuration::with_sends([(1, 2, m)]));
        let (out, q) = simulate_routing_round(state, 1, &mut oracle, &ctx).unwrap();
        assert_eq!(q, 2);
        assert_eq!(oracle.query_count(), 2);
        let (c, a) = out.iter().next().unwrap();
        assert_eq!(c.receive.get(&(HNode::Center(3), HNode::Center(1))), Some(&m));
        assert!(!c.answer);
        assert!(c.outbox.iter().all(|e| e.message.is_none()));
        assert!((a.re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantum_message_to_sleeper_flips_sign() {
        let ports = CliquePorts::canonical(4);
        let mut oracle = PermutationOracle::new(vec![2, 1, 4, 3]).unwrap();
        let asleep = (1..=4).map(HNode::Pendant).collect();
        let ctx = RoutingContext { clique_ports: &ports, asleep };
        let state = SparseQuantumState::basis(Configuration::with_sends([(1, 1, Message::quantum(1))]));
        let (out, _) = simulate_routing_round(state, 2, &mut oracle, &ctx).unwrap();
        let (c, a) = out.iter().next().unwrap();
        assert!(c.receive.contains_key(&(HNode::Pendant(1), HNode::Center(1))));
        assert!((a.re + 1.0).abs() < 1e-15);
        assert_eq!(oracle.query_count(), 4);
    }

    #[test]
    fn overflow_is_rejected() {
        let ports = CliquePorts::canonical(4);
        let mut oracle = PermutationOracle::new(vec![2, 1, 4, 3]).unwrap();
        let ctx = RoutingContext { clique_ports: &ports, asleep: BTreeSet::new() };
        let sends = [(1, 1, Message::classical(1)), (1, 2, Message::classical(2))];
        let state = SparseQuantumState::basis(Configuration::with_sends(sends));
        assert!(matches!(
            simulate_routing_round(state, 1, &mut oracle, &ctx),
            Err(RoutingError::Overflow { sends: 2, mu_r: 1 })
        ));
    }
}
