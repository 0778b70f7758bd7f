//! Browser bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string; the page
//! renders it. The `*_report` functions hold the logic and run natively too.

use qwake_core::advice::{assign_advice, compute_epoch_plan, port_range, BitString};
use qwake_core::network::{complete_graph, path_graph, random_connected_graph, PortNetwork, WakeConfig};
use qwake_core::qsearch::success_probability;
use qwake_core::scheduler::{baseline_flood, run_wakeup_seeded, ActorMode, RunError, RunParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_NODES: usize = 256;

#[derive(Debug, Serialize)]
pub struct PhaseView {
    pub epoch: usize,
    pub actor: u32,
    pub mode: &'static str,
    pub start_round: u64,
    pub ranges: Vec<String>,
    pub woken: Vec<u32>,
    pub classical: u64,
    pub quantum: u64,
}

#[derive(Debug, Serialize)]
pub struct WakeupView {
    pub n: usize,
    pub edges: usize,
    pub alpha: u32,
    pub beta: u32,
    pub all_awake: bool,
    pub classical: u64,
    pub quantum: u64,
    pub rounds: u64,
    pub epochs: usize,
    pub flood_messages: u64,
    pub phases: Vec<PhaseView>,
}

#[derive(Debug, Serialize)]
pub struct ErrorView {
    pub error: String,
}

fn build(family: &str, n: usize, seed: u64) -> Result<PortNetwork, String> {
    if !(2..=MAX_NODES).contains(&n) {
        return Err(format!("n must lie in 2..={MAX_NODES}"));
    }
    match family {
        "clique" => complete_graph(n, seed),
        "path" => path_graph(n),
        "sparse" => random_connected_graph(n, 3.0 / n as f64, seed),
        "dense" => random_connected_graph(n, 0.3, seed),
        _ => return Err(format!("unknown family `{family}`")),
    }
    .map_err(|e| e.to_string())
}

/// Wakes every node from node 1 and lists what each actor did.
pub fn wakeup_report(family: &str, n: usize, alpha: u32, seed: u64) -> Result<WakeupView, String> {
    let net = build(family, n, seed)?;
    let wake = WakeConfig::new(&net, [0]).map_err(|e| e.to_string())?;
    let plan = compute_epoch_plan(&net, &wake);
    let advice = assign_advice(&net, &plan, alpha).map_err(|e| e.to_string())?;
    let t = match run_wakeup_seeded(&net, &wake, &advice, &RunParams::default(), seed) {
        Ok(t) => t,
        Err(RunError::Incomplete(t)) => *t,
        Err(e) => return Err(e.to_string()),
    };
    let phases = t
        .phases
        .iter()
        .filter(|p| p.mode != ActorMode::Skip || !p.woken.is_empty())
        .map(|p| PhaseView {
            epoch: p.epoch,
            actor: p.actor as u32 + 1,
            mode: match p.mode {
                ActorMode::Full => "full",
                ActorMode::Skip => "skip",
                ActorMode::Ranged => "ranged",
            },
            start_round: p.start_round,
            ranges: p.ranges.iter().map(|r| r.to_string()).collect(),
            woken: p.woken.iter().map(|&w| w as u32 + 1).collect(),
            classical: p.classical,
            quantum: p.quantum,
        })
        .collect();
    Ok(WakeupView {
        n,
        edges: net.edge_count(),
        alpha,
        beta: t.beta,
        all_awake: t.all_awake,
        classical: t.classical_total(),
        quantum: t.quantum_total(),
        rounds: t.total_rounds,
        epochs: t.epochs_executed,
        flood_messages: baseline_flood(&net, &wake).classical_total(),
        phases,
    })
}

#[derive(Debug, Serialize)]
pub struct CurveView {
    pub size: usize,
    pub marked: usize,
    /// Success probability after `k` iterations, `k = 0, 1, ...`.
    pub probability: Vec<f64>,
}

pub fn grover_report(size: usize, marked: usize, max_iterations: u32) -> Result<CurveView, String> {
    if size == 0 || marked > size {
        return Err("need 0 <= marked <= size and size >= 1".into());
    }
    let probability = (0..=max_iterations.min(500)).map(|k| success_probability(size, marked, k)).collect();
    Ok(CurveView { size, marked, probability })
}

#[derive(Debug, Serialize)]
pub struct RangeView {
    pub degree: usize,
    pub bits: String,
    pub lo: u32,
    pub hi: u32,
    /// Leaf labels of the advice tree, left to right.
    pub leaves: Vec<u32>,
}

pub fn range_report(degree: usize, bits: &str) -> Result<RangeView, String> {
    if degree == 0 || degree > 1 << 12 {
        return Err("degree must lie in 1..=4096".into());
    }
    let b = bits.trim().parse::<BitString>().map_err(|e| e.to_string())?;
    let r = port_range(degree, &b).map_err(|e| e.to_string())?;
    let leaves = (1..=degree.next_power_of_two() as u32).map(|l| l.min(degree as u32)).collect();
    Ok(RangeView { degree, bits: b.to_string(), lo: r.lo, hi: r.hi, leaves })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(error) => serde_json::to_string(&ErrorView { error }),
    }
    .expect("views serialize")
}

#[wasm_bindgen]
pub fn simulate_wakeup(family: &str, n: u32, alpha: u32, seed: u32) -> String {
    to_json(wakeup_report(family, n as usize, alpha, seed as u64))
}

#[wasm_bindgen]
pub fn grover_curve(size: u32, marked: u32, max_iterations: u32) -> String {
    to_json(grover_report(size as usize, marked as usize, max_iterations))
}

#[wasm_bindgen]
pub fn advice_range(degree: u32, bits: &str) -> String {
    to_json(range_report(degree as usize, bits))
}
