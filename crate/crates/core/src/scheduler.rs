//! The synchronous round engine.
//!
//! Time advances in epochs of `n` phases, each `tau` rounds long. Phase `l`
//! belongs to the node with ID `l`; a node acts at most once, in the first
//! epoch that starts at or after the round it woke up in. Phases are run on a
//! global barrier: the engine jumps to the next phase once the actor is done
//! but still charges the full `tau` rounds.
//!
//! Within a phase, every oracle call costs one round, a wake-up message one
//! round, and a woken node holding proxy advice answers on the following
//! round. A node wakes in the round after the first classical message that
//! reaches it; quantum traffic never wakes anybody.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::advice::{beta, port_range, tree_depth, AdviceTable, EpochPlan, PortRange};
use crate::log_factor;
use crate::network::{awake_distance, distances_from, NodeIndex, Port, PortNetwork, WakeConfig};
use crate::qsearch::{quantum_search, SearchConfig, SearchSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultInjection {
    /// Actor whose search is sabotaged.
    pub actor: NodeIndex,
    /// Index of the sabotaged search among that actor's invocations.
    pub invocation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub search: SearchConfig,
    pub c_tau: f64,
    /// Defaults to `n + 1`.
    pub max_epochs: Option<usize>,
    /// Abort when an actor needs more than `tau` rounds.
    pub strict_tau: bool,
    /// Forces one search to see no marked ports.
    pub fault: Option<FaultInjection>,
}

impl Default for RunParams {
    fn default() -> Self {
        Self { search: SearchConfig::default(), c_tau: 8.0, max_epochs: None, strict_tau: false, fault: None }
    }
}

impl RunParams {
    pub fn phase_length(&self, n: usize) -> u64 {
        ((self.c_tau * n as f64 * log_factor(n)).ceil() as u64).max(1)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("run stopped with {} sleeping nodes", .0.sleeping().len())]
    Incomplete(Box<RunTranscript>),
    #[error("actor {actor}: {reason}")]
    Inconsistent { actor: u32, reason: String },
    #[error("actor {actor} needed {rounds} rounds, phase length is {tau}")]
    PhaseOverrun { actor: u32, rounds: u64, tau: u64 },
    #[error("advice table covers {advice} nodes, network has {nodes}")]
    AdviceMismatch { advice: usize, nodes: usize },
}

/// Constant per-round traffic over `len` consecutive rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerSpan {
    pub start: u64,
    pub len: u64,
    pub classical: u64,
    pub quantum: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLedger {
    spans: Vec<LedgerSpan>,
    classical: u64,
    quantum: u64,
}

impl MessageLedger {
    pub fn record(&mut self, start: u64, len: u64, classical: u64, quantum: u64) {
        if len == 0 || (classical == 0 && quantum == 0) {
            return;
        }
        self.classical += classical * len;
        self.quantum += quantum * len;
        if let Some(last) = self.spans.last_mut() {
            if last.start + last.len == start && last.classical == classical && last.quantum == quantum {
                last.len += len;
                return;
            }
        }
        self.spans.push(LedgerSpan { start, len, classical, quantum });
    }

    pub fn classical_total(&self) -> u64 {
        self.classical
    }

    pub fn quantum_total(&self) -> u64 {
        self.quantum
    }

    pub fn total(&self) -> u64 {
        self.classical + self.quantum
    }

    pub fn spans(&self) -> &[LedgerSpan] {
        &self.spans
    }

    /// `(classical, quantum)` sent in `round`.
    pub fn at_round(&self, round: u64) -> (u64, u64) {
        self.spans
            .iter()
            .filter(|s| (s.start..s.start + s.len).contains(&round))
            .fold((0, 0), |(c, q), s| (c + s.classical, q + s.quantum))
    }

    /// Recomputes both totals from the spans.
    pub fn span_totals(&self) -> (u64, u64) {
        self.spans
            .iter()
            .fold((0, 0), |(c, q), s| (c + s.classical * s.len, q + s.quantum * s.len))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorMode {
    /// No advice or `g = 1`: search all ports.
    Full,
    /// `g = 0` and no range: nothing to do.
    Skip,
    /// `g = 0` with a range: follow the proxy chain.
    Ranged,
}

impl fmt::Display for ActorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Skip => "skip",
            Self::Ranged => "ranged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvocationRecord {
    pub start_round: u64,
    pub range_len: usize,
    pub marked: usize,
    pub oracle_calls: u64,
    pub quantum_messages: u64,
    pub iterations: Vec<u32>,
    pub result: Option<Port>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseRecord {
    pub epoch: usize,
    pub actor: NodeIndex,
    pub mode: ActorMode,
    pub start_round: u64,
    pub end_round: u64,
    pub sleeping_at_start: BTreeSet<NodeIndex>,
    pub asleep_at_end: BTreeSet<NodeIndex>,
    /// Ranges searched in `Ranged` mode, in order; the chain length is their count.
    pub ranges: Vec<PortRange>,
    pub invocations: Vec<InvocationRecord>,
    pub woken: Vec<NodeIndex>,
    pub proxy_replies: u64,
    pub classical: u64,
    pub quantum: u64,
}

impl PhaseRecord {
    pub fn rounds(&self) -> u64 {
        self.end_round - self.start_round
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendKind {
    Wake,
    ProxyReply,
    Flood,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunEvent {
    EpochStart { round: u64, epoch: usize },
    PhaseStart { round: u64, epoch: usize, phase: u32 },
    ActorBegin { round: u64, actor: u32, mode: ActorMode },
    QuantumSearch { round: u64, actor: u32, range_len: usize, marked: usize, calls: u64, result: Option<Port> },
    ClassicalSend { round: u64, from: u32, to: u32, kind: SendKind },
    Wake { round: u64, node: u32 },
    ActorEnd { round: u64, actor: u32, classical: u64, quantum: u64 },
}

impl fmt::Display for RunEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EpochStart { round, epoch } => write!(f, "{round} epoch-start epoch={epoch}"),
            Self::PhaseStart { round, epoch, phase } => {
                write!(f, "{round} phase-start epoch={epoch} phase={phase}")
            }
            Self::ActorBegin { round, actor, mode } => write!(f, "{round} actor-begin id={actor} mode={mode}"),
            Self::QuantumSearch { round, actor, range_len, marked, calls, result } => {
                let r = result.map_or("null".to_string(), |p| p.to_string());
                write!(f, "{round} quantum-query id={actor} range={range_len} marked={marked} calls={calls} result={r}")
            }
            Self::ClassicalSend { round, from, to, kind } => {
                let k = match kind {
                    SendKind::Wake => "wake",
                    SendKind::ProxyReply => "proxy",
                    SendKind::Flood => "flood",
                };
                write!(f, "{round} classical-send from={from} to={to} kind={k}")
            }
            Self::Wake { round, node } => write!(f, "{round} wake id={node}"),
            Self::ActorEnd { round, actor, classical, quantum } => {
                write!(f, "{round} actor-end id={actor} classical={classical} quantum={quantum}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTranscript {
    pub n: usize,
    pub alpha: u32,
    pub beta: u32,
    pub seed: u64,
    pub tau: u64,
    pub ledger: MessageLedger,
    /// Round each node woke up in; initially awake nodes have round 0.
    pub wake_round: Vec<Option<u64>>,
    pub phases: Vec<PhaseRecord>,
    pub events: Vec<RunEvent>,
    pub all_awake: bool,
    pub epochs_executed: usize,
    pub total_rounds: u64,
    /// Actors whose phase work exceeded `tau`.
    pub overruns: Vec<NodeIndex>,
}

impl RunTranscript {
    pub fn sleeping(&self) -> Vec<NodeIndex> {
        (0..self.n).filter(|&v| self.wake_round[v].is_none()).collect()
    }

    pub fn classical_total(&self) -> u64 {
        self.ledger.classical_total()
    }

    pub fn quantum_total(&self) -> u64 {
        self.ledger.quantum_total()
    }

    pub fn total_messages(&self) -> u64 {
        self.ledger.total()
    }

    pub fn summary(&self) -> String {
        format!(
            "n={} alpha={} beta={} seed={} classical={} quantum={} rounds={} epochs={} all_awake={}",
            self.n,
            self.alpha,
            self.beta,
            self.seed,
            self.classical_total(),
            self.quantum_total(),
            self.total_rounds,
            self.epochs_executed,
            self.all_awake as u8
        )
    }

    /// Summary line followed by one line per event.
    pub fn render_log(&self) -> String {
        let mut out = self.summary();
        out.push('\n');
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

struct Engine<'a, R: Rng> {
    network: &'a PortNetwork,
    advice: &'a AdviceTable,
    params: &'a RunParams,
    rng: &'a mut R,
    awake: Vec<bool>,
    wake_round: Vec<Option<u64>>,
    ledger: MessageLedger,
    events: Vec<RunEvent>,
    /// Some earlier actor left a neighbour asleep; later anomalies are
    /// consequences of that failure, not bugs.
    degraded: bool,
}

struct PhaseState {
    record: PhaseRecord,
    cursor: u64,
}

impl<'a, R: Rng> Engine<'a, R> {
    fn id(&self, v: NodeIndex) -> u32 {
        self.network.id(v)
    }

    fn sleeping_neighbors(&self, v: NodeIndex) -> BTreeSet<NodeIndex> {
        self.network.neighbors(v).filter(|&w| !self.awake[w]).collect()
    }

    fn search(&mut self, st: &mut PhaseState, ports: &[Port]) -> Option<Port> {
        let v = st.record.actor;
        let invocation = st.record.invocations.len();
        let sabotaged = self.params.fault.is_some_and(|f| f.actor == v && f.invocation == invocation);
        let marked: BTreeSet<Port> = if sabotaged {
            BTreeSet::new()
        } else {
            ports.iter().copied().filter(|&p| !self.awake[self.network.neighbor(v, p)]).collect()
        };
        let spec = SearchSpec {
            range: ports.to_vec(),
            marked,
            n_global: self.network.node_count(),
            repetitions: None,
        };
        let t = quantum_search(&spec, &self.params.search, self.rng);
        let per_round = self.params.search.convention.messages_per_call();
        self.ledger.record(st.cursor, t.oracle_calls, 0, per_round);
        self.events.push(RunEvent::QuantumSearch {
            round: st.cursor,
            actor: self.id(v),
            range_len: ports.len(),
            marked: spec.marked.len(),
            calls: t.oracle_calls,
            result: t.result,
        });
        st.record.invocations.push(InvocationRecord {
            start_round: st.cursor,
            range_len: ports.len(),
            marked: spec.marked.len(),
            oracle_calls: t.oracle_calls,
            quantum_messages: t.quantum_messages,
            iterations: t.iterations,
            result: t.result,
        });
        st.record.quantum += t.quantum_messages;
        st.cursor += t.rounds;
        t.result
    }

    /// Sends the wake-up message through `port`; returns the woken node and
    /// the round its proxy reply (if any) arrives.
    fn wake(&mut self, st: &mut PhaseState, port: Port) -> (NodeIndex, Option<(u64, PortRange)>) {
        let v = st.record.actor;
        let w = self.network.neighbor(v, port);
        let send = st.cursor;
        self.ledger.record(send, 1, 1, 0);
        self.events.push(RunEvent::ClassicalSend { round: send, from: self.id(v), to: self.id(w), kind: SendKind::Wake });
        st.record.classical += 1;
        st.cursor += 1;
        debug_assert!(!self.awake[w], "search only reports sleeping neighbours");
        self.awake[w] = true;
        self.wake_round[w] = Some(send + 1);
        self.events.push(RunEvent::Wake { round: send + 1, node: self.id(w) });
        st.record.woken.push(w);

        let pi = &self.advice.get(w).pi;
        if pi.is_empty() {
            return (w, None);
        }
        self.ledger.record(send + 1, 1, 1, 0);
        self.events.push(RunEvent::ClassicalSend {
            round: send + 1,
            from: self.id(w),
            to: self.id(v),
            kind: SendKind::ProxyReply,
        });
        st.record.classical += 1;
        st.record.proxy_replies += 1;
        let degree = self.network.degree(v);
        let bits = pi.truncated(tree_depth(degree) as usize);
        let range = port_range(degree, &bits).expect("truncated to tree depth");
        (w, Some((send + 2, range)))
    }

    /// Repeated search over `ports` until nothing more is found. Returns the
    /// proxy ranges received.
    fn sweep(&mut self, st: &mut PhaseState, mut ports: Vec<Port>) -> Vec<PortRange> {
        let mut replies = Vec::new();
        let mut last_arrival = 0;
        while !ports.is_empty() {
            let Some(p) = self.search(st, &ports) else { break };
            ports.retain(|&x| x != p);
            let (_, reply) = self.wake(st, p);
            if let Some((arrival, range)) = reply {
                last_arrival = last_arrival.max(arrival);
                replies.push(range);
            }
        }
        st.cursor = st.cursor.max(last_arrival);
        replies
    }

    fn act(&mut self, epoch: usize, v: NodeIndex, start: u64) -> Result<PhaseRecord, RunError> {
        let advice = self.advice.get(v);
        let mode = match advice.g {
            None | Some(true) => ActorMode::Full,
            Some(false) if advice.lambda.is_empty() => ActorMode::Skip,
            Some(false) => ActorMode::Ranged,
        };
        let mut st = PhaseState {
            record: PhaseRecord {
                epoch,
                actor: v,
                mode,
                start_round: start,
                end_round: start,
                sleeping_at_start: self.sleeping_neighbors(v),
                asleep_at_end: BTreeSet::new(),
                ranges: Vec::new(),
                invocations: Vec::new(),
                woken: Vec::new(),
                proxy_replies: 0,
                classical: 0,
                quantum: 0,
            },
            cursor: start,
        };
        self.events.push(RunEvent::ActorBegin { round: start, actor: self.id(v), mode });
        let degree = self.network.degree(v);
        match mode {
            ActorMode::Skip => {}
            ActorMode::Full => {
                let replies = self.sweep(&mut st, (1..=degree as Port).collect());
                if !replies.is_empty() && !self.degraded {
                    return Err(self.inconsistent(v, "proxy advice reached an actor without a range"));
                }
            }
            ActorMode::Ranged => {
                let bits = advice.lambda.truncated(tree_depth(degree) as usize);
                let mut next = Some(port_range(degree, &bits).expect("truncated to tree depth"));
                while let Some(range) = next.take() {
                    if st.record.ranges.iter().any(|r| r.intersects(&range)) {
                        if self.degraded {
                            break;
                        }
                        return Err(self.inconsistent(v, &format!("proxy range {range} overlaps an earlier range")));
                    }
                    st.record.ranges.push(range);
                    let replies = self.sweep(&mut st, range.ports().collect());
                    if replies.len() > 1 && !self.degraded {
                        return Err(self.inconsistent(v, "several proxy replies in one batch"));
                    }
                    next = replies.into_iter().next();
                }
            }
        }
        st.record.end_round = st.cursor;
        st.record.asleep_at_end = self.sleeping_neighbors(v);
        if !st.record.asleep_at_end.is_empty() {
            self.degraded = true;
        }
        self.events.push(RunEvent::ActorEnd {
            round: st.cursor,
            actor: self.id(v),
            classical: st.record.classical,
            quantum: st.record.quantum,
        });
        Ok(st.record)
    }

    fn inconsistent(&self, v: NodeIndex, reason: &str) -> RunError {
        RunError::Inconsistent { actor: self.id(v), reason: reason.to_string() }
    }
}

/// Runs the wake-up algorithm; `Err(Incomplete)` carries the transcript of a
/// run that ended with sleeping nodes.
pub fn run_wakeup(
    network: &PortNetwork,
    wake: &WakeConfig,
    advice: &AdviceTable,
    params: &RunParams,
    rng: &mut impl Rng,
) -> Result<RunTranscript, RunError> {
    let n = network.node_count();
    if advice.advice.len() != n {
        return Err(RunError::AdviceMismatch { advice: advice.advice.len(), nodes: n });
    }
    let tau = params.phase_length(n);
    let epoch_len = tau * n as u64;
    let max_epochs = params.max_epochs.unwrap_or(n + 1);

    let mut awake = vec![false; n];
    let mut wake_round = vec![None; n];
    for v in wake.nodes() {
        awake[v] = true;
        wake_round[v] = Some(0);
    }
    let mut engine = Engine {
        network,
        advice,
        params,
        rng,
        awake,
        wake_round,
        ledger: MessageLedger::default(),
        events: Vec::new(),
        degraded: false,
    };
    let mut acted = vec![false; n];
    let mut phases = Vec::new();
    let mut overruns = Vec::new();
    let mut epochs_executed = 0;
    for epoch in 1..=max_epochs {
        let epoch_start = (epoch as u64 - 1) * epoch_len;
        let actors: Vec<NodeIndex> = (0..n)
            .filter(|&v| !acted[v] && engine.wake_round[v].is_some_and(|r| r <= epoch_start))
            .collect();
        if actors.is_empty() {
            break;
        }
        epochs_executed = epoch;
        engine.events.push(RunEvent::EpochStart { round: epoch_start, epoch });
        for v in actors {
            let start = epoch_start + v as u64 * tau;
            engine.events.push(RunEvent::PhaseStart { round: start, epoch, phase: network.id(v) });
            let record = engine.act(epoch, v, start)?;
            acted[v] = true;
            if record.rounds() > tau {
                if params.strict_tau {
                    return Err(RunError::PhaseOverrun { actor: network.id(v), rounds: record.rounds(), tau });
                }
                overruns.push(v);
            }
            phases.push(record);
        }
    }
    let all_awake = engine.awake.iter().all(|&a| a);
    let transcript = RunTranscript {
        n,
        alpha: advice.alpha,
        beta: beta(advice.alpha),
        seed: 0,
        tau,
        ledger: engine.ledger,
        wake_round: engine.wake_round,
        phases,
        events: engine.events,
        all_awake,
        epochs_executed,
        total_rounds: epochs_executed as u64 * epoch_len,
        overruns,
    };
    if all_awake {
        Ok(transcript)
    } else {
        Err(RunError::Incomplete(Box::new(transcript)))
    }
}

/// [`run_wakeup`] with a fresh ChaCha stream from `seed`, recorded in the transcript.
pub fn run_wakeup_seeded(
    network: &PortNetwork,
    wake: &WakeConfig,
    advice: &AdviceTable,
    params: &RunParams,
    seed: u64,
) -> Result<RunTranscript, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match run_wakeup(network, wake, advice, params, &mut rng) {
        Ok(mut t) => {
            t.seed = seed;
            Ok(t)
        }
        Err(RunError::Incomplete(mut t)) => {
            t.seed = seed;
            Err(RunError::Incomplete(t))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhaseViolation {
    MissingActor { actor: u32, epoch: usize },
    EpochMismatch { actor: u32, planned: Option<usize>, actual: usize },
    StartSetMismatch { actor: u32, expected: Vec<u32>, actual: Vec<u32> },
    NeighborsAsleepAtEnd { actor: u32, asleep: Vec<u32> },
}

impl fmt::Display for PhaseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingActor { actor, epoch } => write!(f, "actor {actor} never acted (planned epoch {epoch})"),
            Self::EpochMismatch { actor, planned, actual } => {
                write!(f, "actor {actor} acted in epoch {actual}, planned {planned:?}")
            }
            Self::StartSetMismatch { actor, expected, actual } => {
                write!(f, "actor {actor} saw sleepers {actual:?} at phase start, oracle assigned {expected:?}")
            }
            Self::NeighborsAsleepAtEnd { actor, asleep } => {
                write!(f, "actor {actor} left neighbours {asleep:?} asleep")
            }
        }
    }
}

/// Compares every actor phase with the oracle's plan: same epoch, the
/// sleeping neighbours at phase start are exactly the assigned set, and no
/// neighbour is still asleep at phase end.
pub fn verify_phase_lemma(transcript: &RunTranscript, plan: &EpochPlan) -> Vec<PhaseViolation> {
    let ids = |s: &BTreeSet<NodeIndex>| s.iter().map(|&v| v as u32 + 1).collect::<Vec<_>>();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &transcript.phases {
        let actor = p.actor as u32 + 1;
        seen.insert(p.actor);
        match plan.actor_epoch(p.actor) {
            Some((epoch, assigned)) if epoch == p.epoch => {
                if *assigned != p.sleeping_at_start {
                    out.push(PhaseViolation::StartSetMismatch {
                        actor,
                        expected: ids(assigned),
                        actual: ids(&p.sleeping_at_start),
                    });
                }
            }
            planned => out.push(PhaseViolation::EpochMismatch {
                actor,
                planned: planned.map(|(e, _)| e),
                actual: p.epoch,
            }),
        }
        if !p.asleep_at_end.is_empty() {
            out.push(PhaseViolation::NeighborsAsleepAtEnd { actor, asleep: ids(&p.asleep_at_end) });
        }
    }
    for (i, epoch) in plan.epochs.iter().enumerate() {
        for &v in &epoch.actors {
            if !seen.contains(&v) {
                out.push(PhaseViolation::MissingActor { actor: v as u32 + 1, epoch: i + 1 });
            }
        }
    }
    out
}

/// Classical flooding: every node sends once on every port in the round it
/// wakes up.
pub fn baseline_flood(network: &PortNetwork, wake: &WakeConfig) -> RunTranscript {
    let n = network.node_count();
    let dist = distances_from(network, wake);
    let arad = awake_distance(network, wake);
    let mut ledger = MessageLedger::default();
    let mut events = Vec::new();
    for d in 0..=arad {
        let layer: Vec<NodeIndex> = (0..n).filter(|&v| dist[v] == Some(d)).collect();
        let sent: u64 = layer.iter().map(|&v| network.degree(v) as u64).sum();
        ledger.record(d as u64, 1, sent, 0);
        for &v in &layer {
            if d > 0 {
                events.push(RunEvent::Wake { round: d as u64, node: network.id(v) });
            }
            for w in network.neighbors(v) {
                events.push(RunEvent::ClassicalSend {
                    round: d as u64,
                    from: network.id(v),
                    to: network.id(w),
                    kind: SendKind::Flood,
                });
            }
        }
    }
    let wake_round: Vec<Option<u64>> = dist.iter().map(|d| d.map(|d| d as u64)).collect();
    RunTranscript {
        n,
        alpha: 0,
        beta: 0,
        seed: 0,
        tau: 0,
        ledger,
        all_awake: wake_round.iter().all(Option::is_some),
        wake_round,
        phases: Vec::new(),
        events,
        epochs_executed: 0,
        total_rounds: arad as u64,
        overruns: Vec::new(),
    }
}
