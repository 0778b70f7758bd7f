//! From wake-up runs on hidden-matching instances to the single-bit
//! descriptor of the hidden matching.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::LowerBoundError;
use crate::advice::{assign_advice, compute_epoch_plan};
use crate::network::hidden::{build_hidden_matching_graph, CliquePorts, PerfectMatching};
use crate::network::{complete_graph, WakeConfig};
use crate::scheduler::{run_wakeup_seeded, RunError, RunParams, RunTranscript};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("centre {node} claims partner {claim}, which is not a centre")]
    InvalidClaim { node: u32, claim: u32 },
    #[error("centre {node} claims {claim} but {claim} claims {other}")]
    Inconsistent { node: u32, claim: u32, other: u32 },
    #[error("no claim covers centres {0:?}")]
    Uncovered(Vec<u32>),
}

/// Turns per-centre partner claims into the descriptor `z_i = X_i mod 2`.
/// A matched edge counts as reported when either endpoint claims it.
pub fn matching_to_descriptor(outputs: &[Option<u32>]) -> Result<Vec<u8>, DescriptorError> {
    let n = outputs.len() as u32;
    let mut partner: Vec<Option<u32>> = vec![None; outputs.len()];
    for (idx, claim) in outputs.iter().enumerate() {
        let i = idx as u32 + 1;
        let Some(k) = *claim else { continue };
        if k == 0 || k > n || k == i {
            return Err(DescriptorError::InvalidClaim { node: i, claim: k });
        }
        if let Some(other) = outputs[k as usize - 1] {
            if other != i {
                return Err(DescriptorError::Inconsistent { node: i, claim: k, other });
            }
        }
        for (a, b) in [(i, k), (k, i)] {
            match partner[a as usize - 1] {
                Some(existing) if existing != b => {
                    return Err(DescriptorError::Inconsistent { node: a, claim: existing, other: b })
                }
                _ => partner[a as usize - 1] = Some(b),
            }
        }
    }
    let missing: Vec<u32> = (1..=n).filter(|&i| partner[i as usize - 1].is_none()).collect();
    if !missing.is_empty() {
        return Err(DescriptorError::Uncovered(missing));
    }
    Ok(partner.into_iter().map(|p| (p.expect("all covered") % 2) as u8).collect())
}

/// Matched pairs neither endpoint of which reported its partner.
pub fn uncovered_edges(outputs: &[Option<u32>], matching: &PerfectMatching) -> Vec<(u32, u32)> {
    matching
        .pairs()
        .into_iter()
        .filter(|&(a, b)| outputs[a as usize - 1] != Some(b) && outputs[b as usize - 1] != Some(a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionReport {
    pub n: usize,
    pub matching: Vec<(u32, u32)>,
    /// The wake-up run ended with every node awake.
    pub success: bool,
    pub descriptor: Option<Vec<u8>>,
    pub descriptor_correct: bool,
    pub classical: u64,
    pub quantum: u64,
    pub quantum_from_centers: u64,
    pub classical_from_centers: u64,
    /// Two oracle applications per quantum message sent by a centre.
    pub charged_queries: u64,
    pub failure: Option<String>,
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs: Vec<String> = self.matching.iter().map(|(a, b)| format!("{a}-{b}")).collect();
        let z = self
            .descriptor
            .as_ref()
            .map_or("-".to_string(), |z| z.iter().map(|b| b.to_string()).collect());
        let mut s = String::new();
        let _ = write!(
            s,
            "n={} matching={} success={} classical={} quantum={} quantum_from_v={} charged_queries={} descriptor={} correct={}",
            self.n,
            pairs.join(","),
            self.success as u8,
            self.classical,
            self.quantum,
            self.quantum_from_centers,
            self.charged_queries,
            z,
            self.descriptor_correct as u8
        );
        if let Some(reason) = &self.failure {
            let _ = write!(s, " failure=\"{reason}\"");
        }
        f.write_str(&s)
    }
}

/// Builds the hidden-matching instance for `matching` (clique ports drawn
/// from `seed`), wakes all centres, runs the algorithm with `alpha` bits of
/// advice, and reads each centre's partner off the port through which it
/// woke its pendant. Each woken pendant answers once, which is what tells
/// the centre that the port was the rewired one.
pub fn end_to_end_reduction_check(
    matching: &PerfectMatching,
    alpha: u32,
    params: &RunParams,
    seed: u64,
) -> Result<ReductionReport, LowerBoundError> {
    let n = matching.len();
    let ports = if n > 2 {
        CliquePorts::from_network(&complete_graph(n, seed ^ 0x9e37_79b9_7f4a_7c15)?)?
    } else {
        CliquePorts::canonical(n)
    };
    let inst = build_hidden_matching_graph(n, matching, &ports)?;
    let wake = WakeConfig::new(&inst.network, inst.centers())?;
    let plan = compute_epoch_plan(&inst.network, &wake);
    let advice = assign_advice(&inst.network, &plan, alpha).map_err(|e| LowerBoundError::Run(e.to_string()))?;
    let (transcript, failure) = match run_wakeup_seeded(&inst.network, &wake, &advice, params, seed) {
        Ok(t) => (t, None),
        Err(RunError::Incomplete(t)) => {
            let reason = format!("{} pendants still asleep", t.sleeping().len());
            (*t, Some(reason))
        }
        Err(e) => return Err(LowerBoundError::Run(e.to_string())),
    };

    let mut outputs = vec![None; n];
    let mut answers = 0u64;
    for p in transcript.phases.iter().filter(|p| !inst.is_pendant(p.actor)) {
        for &w in p.woken.iter().filter(|&&w| inst.is_pendant(w)) {
            let j = inst.network.port_to(p.actor, w).expect("woken through an edge");
            outputs[p.actor] = Some(ports.partner(p.actor as u32 + 1, j));
            answers += 1;
        }
    }
    let (quantum_v, classical_v) = center_traffic(&transcript, n);
    let success = failure.is_none();
    let descriptor = matching_to_descriptor(&outputs).ok();
    let expected: Vec<u8> = (1..=n as u32).map(|i| (matching.partner(i) % 2) as u8).collect();
    let descriptor_correct = descriptor.as_ref() == Some(&expected);
    let failure = failure.or_else(|| {
        let gaps = uncovered_edges(&outputs, matching);
        (!gaps.is_empty()).then(|| format!("uncovered edges {gaps:?}"))
    });
    Ok(ReductionReport {
        n,
        matching: matching.pairs(),
        success,
        descriptor,
        descriptor_correct,
        classical: transcript.classical_total() + answers,
        quantum: transcript.quantum_total(),
        quantum_from_centers: quantum_v,
        classical_from_centers: classical_v,
        charged_queries: 2 * quantum_v,
        failure,
    })
}

/// Quantum and classical messages sent during the phases of centre actors.
fn center_traffic(t: &RunTranscript, n: usize) -> (u64, u64) {
    let centers: BTreeSet<usize> = (0..n).collect();
    t.phases
        .iter()
        .filter(|p| centers.contains(&p.actor))
        .fold((0, 0), |(q, c), p| (q + p.quantum, c + p.classical - p.proxy_replies))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_from_one_sided_claims() {
        let z = matching_to_descriptor(&[Some(3), Some(4), None, None]).unwrap();
        assert_eq!(z, vec![1, 0, 1, 0]);
        let z = matching_to_descriptor(&[Some(3), Some(4), Some(1), None]).unwrap();
        assert_eq!(z, vec![1, 0, 1, 0]);
    }

    #[test]
    fn descriptor_failures() {
        assert_eq!(
            matching_to_descriptor(&[None, None, None, None]),
            Err(DescriptorError::Uncovered(vec![1, 2, 3, 4]))
        );
        assert!(matches!(
            matching_to_descriptor(&[Some(3), None, Some(2), None]),
            Err(DescriptorError::Inconsistent { .. })
        ));
        let m = PerfectMatching::from_pairs(4, &[(1, 3), (2, 4)]).unwrap();
        assert_eq!(uncovered_edges(&[None; 4], &m), vec![(1, 3), (2, 4)]);
    }

    #[test]
    fn two_centre_instance() {
        let m = PerfectMatching::from_pairs(2, &[(1, 2)]).unwrap();
        let r = end_to_end_reduction_check(&m, 0, &RunParams::default(), 4).unwrap();
        assert!(r.success);
        assert!(r.descriptor_correct);
        assert_eq!(r.descriptor, Some(vec![0, 1]));
        assert_eq!(r.charged_queries, 2 * r.quantum_from_centers);
    }
}
