//! Distributed Grover search over a node's ports.
//!
//! The state of a search restricted to a port range of size `N` with `C`
//! marked ports never leaves the plane spanned by the uniform superpositions
//! over marked and unmarked ports, so two real amplitudes describe it
//! exactly. An oracle call is one round trip to the probed neighbours: a
//! sleeping neighbour reflects phase `-1`, an awake one `+1`.
//!
//! Searching with an unknown number of marked ports follows the randomized
//! schedule of Boyer, Brassard, Høyer and Tapp: draw `j` uniformly from
//! `[0, m)`, run `j` iterations, measure, verify the outcome with one more
//! oracle call, and grow `m` by `6/5` on failure. A run stops after
//! `ceil(run_cap * sqrt(N))` calls; up to `ceil((c + 2) log2 n)` runs are
//! made before reporting nothing.

use std::collections::BTreeSet;

use rand::Rng;

use crate::log_factor;
use crate::network::Port;

/// Quantum messages charged per oracle call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MessageConvention {
    /// Query and reflected response are two messages.
    #[default]
    RoundTrip2,
    /// The round trip counts once.
    Single1,
}

impl MessageConvention {
    pub fn messages_per_call(self) -> u64 {
        match self {
            Self::RoundTrip2 => 2,
            Self::Single1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RoundTrip2 => "roundtrip2",
            Self::Single1 => "single1",
        }
    }
}

impl std::str::FromStr for MessageConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "roundtrip2" => Ok(Self::RoundTrip2),
            "single1" => Ok(Self::Single1),
            other => Err(format!("unknown message convention {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Oracle calls per run, as a multiple of `sqrt(N)`.
    pub run_cap: f64,
    /// Growth factor of the iteration bound after a failed attempt.
    pub growth: f64,
    /// Target failure exponent `c`: runs are repeated `ceil((c + 2) log2 n)` times.
    pub confidence: f64,
    /// Constant of the per-search call bound `c sqrt(N / max(C, 1)) log2 n`.
    pub budget_constant: f64,
    /// Constant of the iterated-search bound `c' sqrt(N max(C, 1)) log2 n`.
    pub iterated_constant: f64,
    pub convention: MessageConvention,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            run_cap: 2.0,
            growth: 1.2,
            confidence: 1.0,
            budget_constant: 16.0,
            iterated_constant: 16.0,
            convention: MessageConvention::RoundTrip2,
        }
    }
}

impl SearchConfig {
    pub fn repetitions(&self, n_global: usize) -> u32 {
        ((self.confidence + 2.0) * log_factor(n_global)).ceil() as u32
    }

    pub fn calls_per_run(&self, range_len: usize) -> u64 {
        ((self.run_cap * (range_len as f64).sqrt()).ceil() as u64).max(1)
    }

    pub fn search_budget(&self, range_len: usize, marked: usize, n_global: usize) -> u64 {
        let ratio = range_len as f64 / marked.max(1) as f64;
        (self.budget_constant * ratio.sqrt() * log_factor(n_global)).ceil() as u64
    }

    pub fn iterated_budget(&self, range_len: usize, marked: usize, n_global: usize) -> u64 {
        let area = range_len as f64 * marked.max(1) as f64;
        (self.iterated_constant * area.sqrt() * log_factor(n_global)).ceil() as u64
    }
}

/// One invocation: the range, the frozen set of marked ports, and the
/// network size driving the repetition count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchSpec {
    pub range: Vec<Port>,
    pub marked: BTreeSet<Port>,
    pub n_global: usize,
    /// Overrides the configured repetition count when set.
    pub repetitions: Option<u32>,
}

impl SearchSpec {
    pub fn new(range: Vec<Port>, predicate: impl Fn(Port) -> bool, n_global: usize) -> Self {
        let marked = range.iter().copied().filter(|&p| predicate(p)).collect();
        Self { range, marked, n_global, repetitions: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchTranscript {
    pub result: Option<Port>,
    pub oracle_calls: u64,
    pub quantum_messages: u64,
    pub rounds: u64,
    /// Grover iterations used by each measured attempt.
    pub iterations: Vec<u32>,
}

/// Probability of measuring a marked element after `k` iterations, computed
/// by iterating the two-amplitude recursion (oracle flip, then reflection
/// about the mean).
pub fn success_probability(n: usize, c: usize, k: u32) -> f64 {
    if n == 0 || c == 0 {
        return 0.0;
    }
    let s_marked = (c as f64 / n as f64).sqrt();
    let s_unmarked = ((n - c) as f64 / n as f64).sqrt();
    let (mut a, mut b) = (s_marked, s_unmarked);
    for _ in 0..k {
        a = -a;
        let overlap = a * s_marked + b * s_unmarked;
        a = 2.0 * overlap * s_marked - a;
        b = 2.0 * overlap * s_unmarked - b;
    }
    a * a
}

/// Closed form `sin^2((2k + 1) asin(sqrt(C / N)))`.
pub fn success_probability_closed_form(n: usize, c: usize, k: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let theta = (c as f64 / n as f64).sqrt().asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}

pub fn quantum_search(spec: &SearchSpec, config: &SearchConfig, rng: &mut impl Rng) -> SearchTranscript {
    let n = spec.range.len();
    let mut t = SearchTranscript::default();
    if n == 0 {
        return t;
    }
    let marked: Vec<Port> = spec.marked.iter().copied().filter(|p| spec.range.contains(p)).collect();
    let c = marked.len();
    let cap = config.calls_per_run(n);
    let sqrt_n = (n as f64).sqrt();
    let runs = spec.repetitions.unwrap_or_else(|| config.repetitions(spec.n_global));
    'runs: for _ in 0..runs {
        let mut m = 1.0f64;
        let mut spent = 0u64;
        while spent < cap {
            let mut j = rng.gen_range(0..m.ceil() as u64);
            // the verification call must fit as well
            j = j.min(cap - spent - 1);
            spent += j + 1;
            t.oracle_calls += j + 1;
            t.iterations.push(j as u32);
            let p = success_probability(n, c, j as u32);
            if c > 0 && rng.gen_bool(p.clamp(0.0, 1.0)) {
                t.result = Some(marked[rng.gen_range(0..c)]);
                break 'runs;
            }
            m = (m * config.growth).min(sqrt_n.max(1.0));
        }
    }
    t.rounds = t.oracle_calls;
    t.quantum_messages = t.oracle_calls * config.convention.messages_per_call();
    t
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IteratedTranscript {
    pub found: BTreeSet<Port>,
    pub searches: Vec<SearchTranscript>,
    pub oracle_calls: u64,
    pub quantum_messages: u64,
    pub rounds: u64,
}

/// Repeats [`quantum_search`], dropping each found port from the range, until
/// a search comes back empty.
pub fn iterated_quantum_search(
    spec: &SearchSpec,
    config: &SearchConfig,
    rng: &mut impl Rng,
) -> IteratedTranscript {
    let mut out = IteratedTranscript::default();
    let mut current = spec.clone();
    loop {
        let t = quantum_search(&current, config, rng);
        out.oracle_calls += t.oracle_calls;
        out.quantum_messages += t.quantum_messages;
        out.rounds += t.rounds;
        let result = t.result;
        out.searches.push(t);
        match result {
            Some(p) => {
                out.found.insert(p);
                current.range.retain(|&x| x != p);
                current.marked.remove(&p);
                if current.range.is_empty() {
                    break;
                }
            }
            None => break,
        }
    }
    out
}
