//! Simulator for waking up sleeping nodes in a synchronous port-numbered
//! network whose links carry both classical and quantum messages.
//!
//! * [`network`]: port-numbered graphs, generators, and the hidden-matching
//!   family used by the lower-bound toolkit.
//! * [`advice`]: the offline oracle (epoch sets, advice trees, proxy chains).
//! * [`qsearch`]: amplitude-level simulation of distributed Grover search.
//! * [`scheduler`]: the round engine, message ledger, and flooding baseline.
//! * [`lowerbound`]: query oracles, the involution lift, and the register
//!   level routing simulation.

pub mod advice;
pub mod lowerbound;
pub mod network;
pub mod qsearch;
pub mod scheduler;

pub use advice::{assign_advice, beta, compute_epoch_plan, Advice, AdviceTable, EpochPlan};
pub use network::{awake_distance, NodeIndex, Port, PortNetwork, WakeConfig};
pub use qsearch::{MessageConvention, SearchConfig};
pub use scheduler::{run_wakeup, RunParams, RunTranscript};

/// `log2 n` clamped below at 1, the factor used in all cost bounds.
pub fn log_factor(n: usize) -> f64 {
    (n.max(2) as f64).log2().max(1.0)
}
