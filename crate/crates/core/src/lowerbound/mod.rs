//! Lower-bound toolkit: query oracles for hidden permutations, the lift of
//! an arbitrary permutation to a fixed-point-free involution, the single-bit
//! descriptor, and the register-level routing simulation on the
//! hidden-matching family.

use thiserror::Error;

use crate::network::hidden::CliquePorts;
use crate::network::{NetworkError, Port};

pub mod reduction;
pub mod routing;

pub use reduction::{end_to_end_reduction_check, matching_to_descriptor, uncovered_edges, ReductionReport};
pub use routing::{
    simulate_routing_round, Channel, Configuration, HNode, Message, OutboxEntry, RoutingContext,
    RoutingError, SparseQuantumState,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowerBoundError {
    #[error("index ({i}, {j}) outside [1, {size}]")]
    OutOfRange { i: u32, j: u32, size: usize },
    #[error("not a permutation of [1, {0}]")]
    NotAPermutation(usize),
    #[error("expected length {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("port {port} is not a port of centre {i}")]
    InvalidPort { i: u32, port: Port },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("{0}")]
    Run(String),
}

/// Access to the 0/1 matrix `P[i][j] = [sigma(i) = j]` of a hidden permutation.
pub trait QueryOracle {
    /// Side length of the matrix.
    fn size(&self) -> usize;

    /// One application of the oracle, possibly in superposition over all
    /// `points`; counts as a single query whatever the number of points.
    fn apply(&mut self, points: &[(u32, u32)]) -> Result<Vec<bool>, LowerBoundError>;

    fn query_count(&self) -> u64;

    fn query(&mut self, i: u32, j: u32) -> Result<bool, LowerBoundError> {
        Ok(self.apply(&[(i, j)])?[0])
    }
}

fn check_point(size: usize, i: u32, j: u32) -> Result<(), LowerBoundError> {
    if i == 0 || j == 0 || i as usize > size || j as usize > size {
        return Err(LowerBoundError::OutOfRange { i, j, size });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationOracle {
    sigma: Vec<u32>,
    count: u64,
}

impl PermutationOracle {
    /// `sigma[i - 1]` is the image of `i`.
    pub fn new(sigma: Vec<u32>) -> Result<Self, LowerBoundError> {
        let n = sigma.len();
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s == 0 || s as usize > n || std::mem::replace(&mut seen[s as usize - 1], true) {
                return Err(LowerBoundError::NotAPermutation(n));
            }
        }
        Ok(Self { sigma, count: 0 })
    }

    /// The hidden permutation itself, for test oracles and reports. Reading
    /// it is not a query.
    pub fn reveal(&self) -> &[u32] {
        &self.sigma
    }
}

impl QueryOracle for PermutationOracle {
    fn size(&self) -> usize {
        self.sigma.len()
    }

    fn apply(&mut self, points: &[(u32, u32)]) -> Result<Vec<bool>, LowerBoundError> {
        for &(i, j) in points {
            check_point(self.size(), i, j)?;
        }
        self.count += 1;
        Ok(points.iter().map(|&(i, j)| self.sigma[i as usize - 1] == j).collect())
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}

/// Oracle for `sigma'` on `[2n]` with `sigma'(i) = n + sigma(i)` and
/// `sigma'(n + i) = sigma^-1(i)`, answered through the base oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvolutionOracle {
    base: PermutationOracle,
    count: u64,
}

pub fn involution_from_permutation(base: PermutationOracle) -> Result<InvolutionOracle, LowerBoundError> {
    if base.size() == 0 {
        return Err(LowerBoundError::NotAPermutation(0));
    }
    Ok(InvolutionOracle { base, count: 0 })
}

impl InvolutionOracle {
    pub fn base(&self) -> &PermutationOracle {
        &self.base
    }

    pub fn base_query_count(&self) -> u64 {
        self.base.query_count()
    }

    /// The base point an entry of `P'` reads, if any. Same-side entries are
    /// identically zero.
    fn base_point(&self, i: u32, j: u32) -> Option<(u32, u32)> {
        let n = self.base.size() as u32;
        match (i <= n, j <= n) {
            (true, false) => Some((i, j - n)),
            (false, true) => Some((j, i - n)),
            _ => None,
        }
    }

    /// `sigma'` computed directly from the revealed base permutation.
    pub fn reveal(&self) -> Vec<u32> {
        let sigma = self.base.reveal();
        let n = sigma.len();
        let mut out = vec![0u32; 2 * n];
        for i in 0..n {
            out[i] = n as u32 + sigma[i];
            out[n + sigma[i] as usize - 1] = i as u32 + 1;
        }
        out
    }
}

impl QueryOracle for InvolutionOracle {
    fn size(&self) -> usize {
        2 * self.base.size()
    }

    fn apply(&mut self, points: &[(u32, u32)]) -> Result<Vec<bool>, LowerBoundError> {
        for &(i, j) in points {
            check_point(self.size(), i, j)?;
        }
        self.count += 1;
        let mapped: Vec<Option<(u32, u32)>> = points.iter().map(|&(i, j)| self.base_point(i, j)).collect();
        let needed: Vec<(u32, u32)> = mapped.iter().flatten().copied().collect();
        if needed.is_empty() {
            return Ok(vec![false; points.len()]);
        }
        let answers = self.base.apply(&needed)?;
        let mut it = answers.into_iter();
        Ok(mapped.iter().map(|m| m.is_some() && it.next().expect("one answer per base point")).collect())
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}

/// `z_i = sigma(i) mod 2`.
pub fn direct_descriptor(sigma: &[u32]) -> Vec<u8> {
    sigma.iter().map(|&s| (s % 2) as u8).collect()
}

/// Recovers the base descriptor from the lifted one: `z_i = z'_i xor (n mod 2)`.
pub fn descriptor_from_lifted(z_prime: &[u8], n: usize) -> Result<Vec<u8>, LowerBoundError> {
    if z_prime.len() != 2 * n {
        return Err(LowerBoundError::LengthMismatch { expected: 2 * n, actual: z_prime.len() });
    }
    Ok(z_prime[..n].iter().map(|&b| (b ^ (n % 2) as u8) & 1).collect())
}

/// Endpoint of port `j` of centre `v_i` when the matched-edge answer is `b`.
pub fn tgt(i: u32, j: Port, b: bool, ports: &CliquePorts) -> Result<HNode, LowerBoundError> {
    if !ports.is_valid_port(i, j) {
        return Err(LowerBoundError::InvalidPort { i, port: j });
    }
    Ok(if b { HNode::Pendant(i) } else { HNode::Center(ports.partner(i, j)) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_lift() {
        let mut o = involution_from_permutation(PermutationOracle::new(vec![1]).unwrap()).unwrap();
        assert_eq!(o.reveal(), vec![2, 1]);
        assert!(o.query(1, 2).unwrap());
        assert_eq!(o.base_query_count(), 1);
    }

    #[test]
    fn same_side_queries_are_free() {
        let mut o = involution_from_permutation(PermutationOracle::new(vec![2, 3, 1]).unwrap()).unwrap();
        assert!(!o.query(1, 2).unwrap());
        assert!(!o.query(4, 6).unwrap());
        assert_eq!(o.base_query_count(), 0);
        assert_eq!(o.query_count(), 2);
        assert_eq!(o.reveal()[0], 5);
        assert_eq!(o.reveal()[4], 1);
        assert!(o.query(5, 1).unwrap());
        assert_eq!(o.base_query_count(), 1);
        assert!(o.query(7, 1).is_err());
    }

    #[test]
    fn lifted_descriptor_examples() {
        assert_eq!(descriptor_from_lifted(&[1, 0, 1, 0], 2).unwrap(), vec![1, 0]);
        assert_eq!(descriptor_from_lifted(&[0, 1], 1).unwrap(), vec![1]);
        assert!(descriptor_from_lifted(&[0, 1, 1], 2).is_err());
    }

    #[test]
    fn tgt_cases() {
        let ports = CliquePorts::canonical(4);
        assert_eq!(tgt(1, 2, true, &ports).unwrap(), HNode::Pendant(1));
        assert_eq!(tgt(1, 2, false, &ports).unwrap(), HNode::Center(3));
        assert!(tgt(1, 4, false, &ports).is_err());
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(PermutationOracle::new(vec![1, 1]).is_err());
        assert!(PermutationOracle::new(vec![0]).is_err());
    }
}
