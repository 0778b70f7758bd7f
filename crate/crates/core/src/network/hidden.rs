//! The hidden-matching graph family.
//!
//! Start from a clique on the center nodes `v_1..v_n` with a fixed port
//! assignment. A perfect matching `M` picks `n/2` clique edges; each picked
//! edge `{v_i, v_k}` is removed and the two freed ports are rewired to fresh
//! pendant nodes `w_i` and `w_k`. Centers keep degree `n - 1` and see exactly
//! the same local port layout as in the plain clique.
//!
//! Indexing: `v_i` is node index `i - 1` (ID `i`), `w_i` is node index
//! `n + i - 1` (ID `n + i`).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{complete_graph, NetworkError, NodeIndex, Port, PortNetwork};

/// Fixed-point-free involution on `1..=n`, stored as `partner[i - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PerfectMatching {
    partner: Vec<u32>,
}

impl PerfectMatching {
    pub fn new(partner: Vec<u32>) -> Result<Self, NetworkError> {
        let n = partner.len();
        if n % 2 == 1 {
            return Err(NetworkError::InvalidParameter(format!("matching on odd n = {n}")));
        }
        for (idx, &p) in partner.iter().enumerate() {
            let i = idx as u32 + 1;
            if p == 0 || p as usize > n {
                return Err(NetworkError::InvalidParameter(format!("partner {p} of {i} out of range")));
            }
            if p == i {
                return Err(NetworkError::InvalidParameter(format!("{i} is a fixed point")));
            }
            if partner[p as usize - 1] != i {
                return Err(NetworkError::InvalidParameter(format!(
                    "not an involution: {i} -> {p} -> {}",
                    partner[p as usize - 1]
                )));
            }
        }
        Ok(Self { partner })
    }

    /// Builds the matching from its list of pairs.
    pub fn from_pairs(n: usize, pairs: &[(u32, u32)]) -> Result<Self, NetworkError> {
        let mut partner = vec![0u32; n];
        for &(a, b) in pairs {
            for (x, y) in [(a, b), (b, a)] {
                let slot = (x as usize)
                    .checked_sub(1)
                    .and_then(|i| partner.get_mut(i))
                    .ok_or_else(|| NetworkError::InvalidParameter(format!("{x} out of range")))?;
                *slot = y;
            }
        }
        Self::new(partner)
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    pub fn partner(&self, i: u32) -> u32 {
        self.partner[i as usize - 1]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.partner
    }

    /// Pairs `(i, k)` with `i < k`, increasing in `i`.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.partner
            .iter()
            .enumerate()
            .filter_map(|(idx, &p)| {
                let i = idx as u32 + 1;
                (i < p).then_some((i, p))
            })
            .collect()
    }
}

/// Sequential random pairing: the smallest unpaired element is matched with a
/// uniformly chosen unpaired element. Uniform over all `(n - 1)!!` matchings.
pub fn random_perfect_matching(n: usize, seed: u64) -> Result<PerfectMatching, NetworkError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_perfect_matching_with(n, &mut rng)
}

pub fn random_perfect_matching_with(
    n: usize,
    rng: &mut impl Rng,
) -> Result<PerfectMatching, NetworkError> {
    if n % 2 == 1 {
        return Err(NetworkError::InvalidParameter(format!("matching on odd n = {n}")));
    }
    let mut free: Vec<u32> = (1..=n as u32).collect();
    let mut partner = vec![0u32; n];
    while !free.is_empty() {
        let a = free.remove(0);
        let b = free.swap_remove(rng.gen_range(0..free.len()));
        // keep `free` sorted so "smallest unpaired" stays well defined
        free.sort_unstable();
        partner[a as usize - 1] = b;
        partner[b as usize - 1] = a;
    }
    PerfectMatching::new(partner)
}

/// Port layout of the center clique: `partner(i, j)` is the center reached
/// from `v_i` through port `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliquePorts {
    n: usize,
    table: Vec<Vec<u32>>,
}

impl CliquePorts {
    pub fn from_network(clique: &PortNetwork) -> Result<Self, NetworkError> {
        let n = clique.node_count();
        if (0..n).any(|v| clique.degree(v) != n - 1) {
            return Err(NetworkError::InvalidParameter("port table is not a clique".into()));
        }
        let table = (0..n)
            .map(|v| (1..n as Port).map(|j| clique.neighbor(v, j) as u32 + 1).collect())
            .collect();
        Ok(Self { n, table })
    }

    /// Ports follow increasing partner ID.
    pub fn canonical(n: usize) -> Self {
        let table = (1..=n as u32)
            .map(|i| (1..=n as u32).filter(|&k| k != i).collect())
            .collect();
        Self { n, table }
    }

    pub fn random(n: usize, seed: u64) -> Result<Self, NetworkError> {
        if n == 2 {
            return Ok(Self::canonical(2));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Self::canonical(n).table;
        for row in &mut table {
            row.shuffle(&mut rng);
        }
        Ok(Self { n, table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn partner(&self, i: u32, port: Port) -> u32 {
        self.table[i as usize - 1][port as usize - 1]
    }

    pub fn port_to(&self, i: u32, k: u32) -> Option<Port> {
        self.table[i as usize - 1]
            .iter()
            .position(|&x| x == k)
            .map(|p| p as Port + 1)
    }

    pub fn is_valid_port(&self, i: u32, port: Port) -> bool {
        (1..=self.n as u32).contains(&i) && (1..self.n as Port).contains(&port)
    }
}

#[derive(Debug, Clone)]
pub struct HiddenMatchingInstance {
    pub n: usize,
    pub matching: PerfectMatching,
    pub clique_ports: CliquePorts,
    pub network: PortNetwork,
}

impl HiddenMatchingInstance {
    pub fn center(&self, i: u32) -> NodeIndex {
        i as usize - 1
    }

    pub fn pendant(&self, i: u32) -> NodeIndex {
        self.n + i as usize - 1
    }

    pub fn centers(&self) -> impl Iterator<Item = NodeIndex> {
        0..self.n
    }

    pub fn is_pendant(&self, v: NodeIndex) -> bool {
        v >= self.n
    }
}

/// Rewires the clique along the hidden matching. Accepts any even `n >= 2`;
/// for `n = 2` the result has two components `v_1 - w_1` and `v_2 - w_2`.
pub fn build_hidden_matching_graph(
    n: usize,
    matching: &PerfectMatching,
    clique_ports: &CliquePorts,
) -> Result<HiddenMatchingInstance, NetworkError> {
    if n < 2 || n % 2 == 1 {
        return Err(NetworkError::InvalidParameter(format!("hidden matching needs even n >= 2, got {n}")));
    }
    if matching.len() != n || clique_ports.n() != n {
        return Err(NetworkError::InvalidParameter("matching or port table size mismatch".into()));
    }
    let mut ports: Vec<Vec<(NodeIndex, Port)>> = Vec::with_capacity(2 * n);
    for i in 1..=n as u32 {
        let row = (1..n as Port)
            .map(|j| {
                let k = clique_ports.partner(i, j);
                if matching.partner(i) == k {
                    (n + i as usize - 1, 1)
                } else {
                    let back = clique_ports.port_to(k, i).expect("clique ports are symmetric");
                    (k as usize - 1, back)
                }
            })
            .collect();
        ports.push(row);
    }
    for i in 1..=n as u32 {
        let p = clique_ports
            .port_to(i, matching.partner(i))
            .expect("matched partner is a clique neighbour");
        ports.push(vec![(i as usize - 1, p)]);
    }
    let network = if n == 2 {
        PortNetwork::from_port_map_allow_disconnected(ports)?
    } else {
        PortNetwork::from_port_map(ports)?
    };
    Ok(HiddenMatchingInstance {
        n,
        matching: matching.clone(),
        clique_ports: clique_ports.clone(),
        network,
    })
}

/// Convenience: random clique ports from `seed` and the given matching.
pub fn hidden_matching_with_random_ports(
    matching: &PerfectMatching,
    port_seed: u64,
) -> Result<HiddenMatchingInstance, NetworkError> {
    let n = matching.len();
    let ports = if n > 2 {
        CliquePorts::from_network(&complete_graph(n, port_seed)?)?
    } else {
        CliquePorts::canonical(n)
    };
    build_hidden_matching_graph(n, matching, &ports)
}
