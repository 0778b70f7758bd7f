//! The four-port, two-branch routing round used by `qwake routing-demo`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use qwake_core::lowerbound::{
    simulate_routing_round, tgt, Configuration, HNode, Message, PermutationOracle, QueryOracle, RoutingContext,
    SparseQuantumState,
};
use qwake_core::network::CliquePorts;

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDemo {
    pub queries: u64,
    pub oracle_calls: u64,
    /// Per branch: `(amplitude, [(receiver, message token)])`.
    pub branches: Vec<(Complex64, Vec<(HNode, u32)>)>,
    /// Workspace answer bit is zero and no message is left in the outbox.
    pub clean: bool,
    pub report: String,
}

/// Centre `v_1` of a five-centre clique sends `m_1, m_2` on ports 1, 2 in
/// one branch and `m_3, m_4` on ports 3, 4 in the other, with two outbox
/// entries. The hidden permutation maps 1 to 4.
pub fn four_port_example() -> RoutingDemo {
    let ports = CliquePorts::canonical(5);
    let mut oracle = PermutationOracle::new(vec![4, 3, 5, 1, 2]).expect("valid permutation");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let send = |a: u32, b: u32| Configuration::with_sends([(1, a, Message::quantum(a)), (1, b, Message::quantum(b))]);
    let state = SparseQuantumState::from_branches([(send(1, 2), Complex64::new(h, 0.0)), (send(3, 4), Complex64::new(h, 0.0))]);
    let ctx = RoutingContext { clique_ports: &ports, asleep: BTreeSet::new() };
    let (out, queries) = simulate_routing_round(state, 2, &mut oracle, &ctx).expect("round routes");

    let mut report = String::new();
    let _ = writeln!(report, "centre v1, 4 ports, 2 outbox entries, 2 branches");
    for j in 1..=4 {
        let k = ports.partner(1, j);
        let b = oracle.reveal()[0] == k;
        let _ = writeln!(report, "  port {j}: clique partner v{k}, matched={}, tgt={}", b as u8, tgt(1, j, b, &ports).expect("valid port"));
    }
    let mut branches = Vec::new();
    let mut clean = true;
    for (c, a) in out.iter() {
        clean &= !c.answer && c.outbox.iter().all(|e| e.message.is_none()) && c.send.is_empty();
        let delivered: Vec<(HNode, u32)> = c.receive.iter().map(|(&(to, _), m)| (to, m.token)).collect();
        let text: Vec<String> = delivered.iter().map(|(to, m)| format!("m{m}->{to}")).collect();
        let _ = writeln!(report, "  branch amplitude {:+.6}{:+.6}i: {}", a.re, a.im, text.join(" "));
        branches.push((*a, delivered));
    }
    let _ = writeln!(report, "queries={} B=|0> {}", queries, if clean { "yes" } else { "no" });
    RoutingDemo { queries, oracle_calls: oracle.query_count(), branches, clean, report }
}
