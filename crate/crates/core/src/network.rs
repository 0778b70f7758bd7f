//! Port-numbered networks.
//!
//! Nodes are addressed internally by a dense index `0..n`; the node at index
//! `v` carries the ID `v + 1`, so IDs always form the permutation `1..=n`.
//! Each node reaches its neighbours only through local ports `1..=deg(v)`,
//! and the port table pairs every `(node, port)` with exactly one
//! `(neighbour, port)` on the other side of the edge.

use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub mod hidden;

pub use hidden::{
    build_hidden_matching_graph, hidden_matching_with_random_ports, random_perfect_matching,
    random_perfect_matching_with, CliquePorts, HiddenMatchingInstance, PerfectMatching,
};

/// Dense 0-based node index.
pub type NodeIndex = usize;
/// 1-based local port number.
pub type Port = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("network must have at least one node")]
    Empty,
    #[error("node {0} is out of range")]
    UnknownNode(u32),
    #[error("self-loop at node {0}")]
    SelfLoop(u32),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(u32, u32),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("invalid port assignment at node {node}: {reason}")]
    InvalidPorts { node: u32, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed graph text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One undirected edge together with the port it occupies at each endpoint.
/// Endpoints are node IDs (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeRecord {
    pub u: u32,
    pub v: u32,
    pub pu: Port,
    pub pv: Port,
}

/// How ports are laid out when building a network from a plain edge list.
#[derive(Debug, Clone)]
pub enum PortAssignment {
    /// Ports follow increasing neighbour ID.
    Canonical,
    /// Each node's ports are a uniform shuffle drawn from the seed.
    Seeded(u64),
    /// Ports given per edge; must cover every edge of the list exactly once.
    Explicit(Vec<EdgeRecord>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortNetwork {
    /// `ports[v][j - 1]` is the far end of port `j` of node `v`.
    ports: Vec<Vec<(NodeIndex, Port)>>,
}

impl PortNetwork {
    /// Builds a network from an explicit port table and validates it fully,
    /// including connectivity.
    pub fn from_port_map(ports: Vec<Vec<(NodeIndex, Port)>>) -> Result<Self, NetworkError> {
        let net = Self { ports };
        net.validate(true)?;
        Ok(net)
    }

    /// Like [`PortNetwork::from_port_map`] but accepts disconnected graphs.
    /// Used for the degenerate two-center hidden-matching instance, where
    /// every component still holds an initially awake node.
    pub(crate) fn from_port_map_allow_disconnected(
        ports: Vec<Vec<(NodeIndex, Port)>>,
    ) -> Result<Self, NetworkError> {
        let net = Self { ports };
        net.validate(false)?;
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.ports.len()
    }

    pub fn id(&self, v: NodeIndex) -> u32 {
        v as u32 + 1
    }

    pub fn node_with_id(&self, id: u32) -> Option<NodeIndex> {
        let v = (id as usize).checked_sub(1)?;
        (v < self.node_count()).then_some(v)
    }

    pub fn degree(&self, v: NodeIndex) -> usize {
        self.ports[v].len()
    }

    /// Far end of port `port` at node `v`. Panics on an invalid port.
    pub fn port_target(&self, v: NodeIndex, port: Port) -> (NodeIndex, Port) {
        self.ports[v][port as usize - 1]
    }

    pub fn neighbor(&self, v: NodeIndex, port: Port) -> NodeIndex {
        self.port_target(v, port).0
    }

    pub fn neighbors(&self, v: NodeIndex) -> impl Iterator<Item = NodeIndex> + '_ {
        self.ports[v].iter().map(|&(w, _)| w)
    }

    /// Port of `v` leading to `w`, if they are adjacent.
    pub fn port_to(&self, v: NodeIndex, w: NodeIndex) -> Option<Port> {
        self.ports[v]
            .iter()
            .position(|&(x, _)| x == w)
            .map(|i| i as Port + 1)
    }

    pub fn edge_count(&self) -> usize {
        self.ports.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// All edges in canonical order: `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> Vec<EdgeRecord> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (v, row) in self.ports.iter().enumerate() {
            for (j, &(w, pw)) in row.iter().enumerate() {
                if v < w {
                    out.push(EdgeRecord {
                        u: self.id(v),
                        v: self.id(w),
                        pu: j as Port + 1,
                        pv: pw,
                    });
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.ports.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.node_count()
    }

    fn validate(&self, require_connected: bool) -> Result<(), NetworkError> {
        let n = self.node_count();
        if n == 0 {
            return Err(NetworkError::Empty);
        }
        for (v, row) in self.ports.iter().enumerate() {
            let mut seen_neighbors = BTreeSet::new();
            for (j, &(w, pw)) in row.iter().enumerate() {
                let id = v as u32 + 1;
                if w >= n {
                    return Err(NetworkError::UnknownNode(w as u32 + 1));
                }
                if w == v {
                    return Err(NetworkError::SelfLoop(id));
                }
                if !seen_neighbors.insert(w) {
                    return Err(NetworkError::DuplicateEdge(id.min(w as u32 + 1), id.max(w as u32 + 1)));
                }
                let back = self.ports[w].get((pw as usize).wrapping_sub(1));
                if pw == 0 || back != Some(&(v, j as Port + 1)) {
                    return Err(NetworkError::InvalidPorts {
                        node: id,
                        reason: format!(
                            "port {} leads to ({}, {}) which does not lead back",
                            j + 1,
                            w + 1,
                            pw
                        ),
                    });
                }
            }
        }
        if require_connected && !self.is_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(())
    }

    /// Text form: header `n m`, then one `u v pu pv` line per edge in
    /// canonical order.
    pub fn to_text(&self) -> String {
        let edges = self.edges();
        let mut out = format!("{} {}\n", self.node_count(), edges.len());
        for e in edges {
            let _ = writeln!(out, "{} {} {} {}", e.u, e.v, e.pu, e.pv);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NetworkError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(NetworkError::Parse {
            line: 1,
            reason: "missing header".into(),
        })?;
        let nums = parse_fields(hline, header, 2)?;
        let (n, m) = (nums[0] as usize, nums[1] as usize);
        let mut records = Vec::with_capacity(m);
        for (line, l) in lines {
            let f = parse_fields(line, l, 4)?;
            records.push(EdgeRecord { u: f[0], v: f[1], pu: f[2], pv: f[3] });
        }
        if records.len() != m {
            return Err(NetworkError::Parse {
                line: 1,
                reason: format!("header declares {m} edges, found {}", records.len()),
            });
        }
        let edges: Vec<(u32, u32)> = records.iter().map(|e| (e.u, e.v)).collect();
        build_network(n, &edges, PortAssignment::Explicit(records))
    }
}

fn parse_fields(line: usize, text: &str, expect: usize) -> Result<Vec<u32>, NetworkError> {
    let fields: Result<Vec<u32>, _> = text.split_whitespace().map(str::parse).collect();
    match fields {
        Ok(f) if f.len() == expect => Ok(f),
        Ok(f) => Err(NetworkError::Parse {
            line,
            reason: format!("expected {expect} fields, found {}", f.len()),
        }),
        Err(e) => Err(NetworkError::Parse { line, reason: e.to_string() }),
    }
}

/// Builds a validated network on nodes with IDs `1..=n` from an edge list.
pub fn build_network(
    n: usize,
    edges: &[(u32, u32)],
    assignment: PortAssignment,
) -> Result<PortNetwork, NetworkError> {
    if n == 0 {
        return Err(NetworkError::Empty);
    }
    let mut adjacency: Vec<Vec<NodeIndex>> = vec![Vec::new(); n];
    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        for id in [a, b] {
            if id == 0 || id as usize > n {
                return Err(NetworkError::UnknownNode(id));
            }
        }
        if a == b {
            return Err(NetworkError::SelfLoop(a));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(NetworkError::DuplicateEdge(a.min(b), a.max(b)));
        }
        adjacency[a as usize - 1].push(b as usize - 1);
        adjacency[b as usize - 1].push(a as usize - 1);
    }

    let ports = match assignment {
        PortAssignment::Canonical => {
            for row in &mut adjacency {
                row.sort_unstable();
            }
            pair_ports(&adjacency)
        }
        PortAssignment::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for row in &mut adjacency {
                row.sort_unstable();
                row.shuffle(&mut rng);
            }
            pair_ports(&adjacency)
        }
        PortAssignment::Explicit(records) => explicit_ports(n, &seen, &records)?,
    };
    PortNetwork::from_port_map(ports)
}

/// Given each node's neighbours in port order, fills in the far-side port.
fn pair_ports(adjacency: &[Vec<NodeIndex>]) -> Vec<Vec<(NodeIndex, Port)>> {
    // position of v in w's list, looked up through a per-node sorted index
    let sorted: Vec<Vec<(NodeIndex, Port)>> = adjacency
        .iter()
        .map(|row| {
            let mut s: Vec<_> = row.iter().enumerate().map(|(j, &w)| (w, j as Port + 1)).collect();
            s.sort_unstable();
            s
        })
        .collect();
    adjacency
        .iter()
        .enumerate()
        .map(|(v, row)| {
            row.iter()
                .map(|&w| {
                    let idx = sorted[w]
                        .binary_search_by_key(&v, |&(x, _)| x)
                        .expect("adjacency is symmetric");
                    (w, sorted[w][idx].1)
                })
                .collect()
        })
        .collect()
}

fn explicit_ports(
    n: usize,
    edge_set: &BTreeSet<(u32, u32)>,
    records: &[EdgeRecord],
) -> Result<Vec<Vec<(NodeIndex, Port)>>, NetworkError> {
    let mut degree = vec![0usize; n];
    for &(a, b) in edge_set {
        degree[a as usize - 1] += 1;
        degree[b as usize - 1] += 1;
    }
    let mut slots: Vec<Vec<Option<(NodeIndex, Port)>>> =
        degree.iter().map(|&d| vec![None; d]).collect();
    let mut covered = BTreeSet::new();
    for e in records {
        let key = (e.u.min(e.v), e.u.max(e.v));
        if !edge_set.contains(&key) || !covered.insert(key) {
            return Err(NetworkError::InvalidPorts {
                node: e.u,
                reason: format!("port record for edge {{{}, {}}} is unknown or repeated", e.u, e.v),
            });
        }
        for (x, px, y, py) in [(e.u, e.pu, e.v, e.pv), (e.v, e.pv, e.u, e.pu)] {
            let row = &mut slots[x as usize - 1];
            let slot = (px as usize)
                .checked_sub(1)
                .and_then(|i| row.get_mut(i))
                .ok_or_else(|| NetworkError::InvalidPorts {
                    node: x,
                    reason: format!("port {px} outside 1..={}", degree[x as usize - 1]),
                })?;
            if slot.is_some() {
                return Err(NetworkError::InvalidPorts {
                    node: x,
                    reason: format!("port {px} assigned twice"),
                });
            }
            *slot = Some((y as usize - 1, py));
        }
    }
    if covered.len() != edge_set.len() {
        return Err(NetworkError::InvalidPorts {
            node: 0,
            reason: "some edges have no port record".into(),
        });
    }
    Ok(slots
        .into_iter()
        .map(|row| row.into_iter().map(|s| s.expect("all slots filled")).collect())
        .collect())
}

/// Uniform random labelled spanning tree (Prüfer decoding) plus every other
/// pair independently with probability `edge_probability`; ports shuffled
/// from the same stream.
pub fn random_connected_graph(
    n: usize,
    edge_probability: f64,
    seed: u64,
) -> Result<PortNetwork, NetworkError> {
    if n < 2 {
        return Err(NetworkError::InvalidParameter(format!("n = {n} must be at least 2")));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(NetworkError::InvalidParameter(format!(
            "edge probability {edge_probability} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_tree_edges(n, &mut rng);
    let mut present = vec![false; n * n];
    for &(a, b) in &tree {
        present[a * n + b] = true;
        present[b * n + a] = true;
    }
    let mut edges: Vec<(u32, u32)> = tree.iter().map(|&(a, b)| (a as u32 + 1, b as u32 + 1)).collect();
    for a in 0..n {
        for b in a + 1..n {
            if !present[a * n + b] && rng.gen_bool(edge_probability) {
                edges.push((a as u32 + 1, b as u32 + 1));
            }
        }
    }
    let port_seed = rng.gen();
    build_network(n, &edges, PortAssignment::Seeded(port_seed))
}

fn random_tree_edges(n: usize, rng: &mut impl Rng) -> Vec<(NodeIndex, NodeIndex)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let code: Vec<NodeIndex> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &c in &code {
        degree[c] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<NodeIndex>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in &code {
        let Reverse(leaf) = leaves.pop().expect("a Prüfer code always leaves a leaf");
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.push(Reverse(c));
        }
    }
    let Reverse(a) = leaves.pop().expect("two leaves remain");
    let Reverse(b) = leaves.pop().expect("two leaves remain");
    edges.push((a, b));
    edges
}

pub fn complete_graph(n: usize, seed: u64) -> Result<PortNetwork, NetworkError> {
    random_connected_graph(n, 1.0, seed)
}

/// Path `1 - 2 - ... - n` with canonical ports.
pub fn path_graph(n: usize) -> Result<PortNetwork, NetworkError> {
    let edges: Vec<(u32, u32)> = (1..n as u32).map(|i| (i, i + 1)).collect();
    build_network(n, &edges, PortAssignment::Canonical)
}

/// The set of initially awake nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WakeConfig {
    awake: BTreeSet<NodeIndex>,
}

impl WakeConfig {
    pub fn new(
        network: &PortNetwork,
        awake: impl IntoIterator<Item = NodeIndex>,
    ) -> Result<Self, NetworkError> {
        let awake: BTreeSet<_> = awake.into_iter().collect();
        if awake.is_empty() {
            return Err(NetworkError::InvalidParameter("wake set is empty".into()));
        }
        if let Some(&v) = awake.iter().find(|&&v| v >= network.node_count()) {
            return Err(NetworkError::UnknownNode(v as u32 + 1));
        }
        Ok(Self { awake })
    }

    pub fn all(network: &PortNetwork) -> Self {
        Self { awake: (0..network.node_count()).collect() }
    }

    /// `k` distinct nodes drawn uniformly.
    pub fn random(network: &PortNetwork, k: usize, rng: &mut impl Rng) -> Result<Self, NetworkError> {
        let n = network.node_count();
        if k == 0 || k > n {
            return Err(NetworkError::InvalidParameter(format!("cannot wake {k} of {n} nodes")));
        }
        let picked = rand::seq::index::sample(rng, n, k);
        Self::new(network, picked)
    }

    pub fn contains(&self, v: NodeIndex) -> bool {
        self.awake.contains(&v)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        self.awake.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.awake.len()
    }

    pub fn is_empty(&self) -> bool {
        self.awake.is_empty()
    }
}

/// Multi-source BFS distances from the wake set (`None` if unreachable).
pub fn distances_from(network: &PortNetwork, wake: &WakeConfig) -> Vec<Option<usize>> {
    let mut dist = vec![None; network.node_count()];
    let mut queue = VecDeque::new();
    for v in wake.nodes() {
        dist[v] = Some(0);
        queue.push_back(v);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued nodes have a distance");
        for w in network.neighbors(v) {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Largest distance from any node to its nearest initially awake node.
/// Nodes unreachable from the wake set are ignored.
pub fn awake_distance(network: &PortNetwork, wake: &WakeConfig) -> usize {
    distances_from(network, wake).into_iter().flatten().max().unwrap_or(0)
}
