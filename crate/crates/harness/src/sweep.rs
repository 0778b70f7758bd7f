//! Cells, per-cell runs and the resumable CSV sweep.
//!
//! A cell is `(family, n, alpha, seed index)`. The run seed depends on the
//! family, `n` and the seed index but not on `alpha`, so rows that differ
//! only in `alpha` share graph, wake set and random stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use qwake_core::advice::{assign_advice, beta, compute_epoch_plan};
use qwake_core::network::{
    awake_distance, complete_graph, hidden_matching_with_random_ports, path_graph, random_connected_graph,
    random_perfect_matching, PortNetwork, WakeConfig,
};
use qwake_core::scheduler::{run_wakeup_seeded, RunError, RunTranscript};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Family, WakeRule};

pub const CSV_HEADER: &str = "family,n,alpha,beta,seed,classical,quantum,total,rounds,epochs,arad,success";

/// One CSV row. `seed` is the run seed of the cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub n: usize,
    pub alpha: u32,
    pub beta: u32,
    pub seed: u64,
    pub classical: u64,
    pub quantum: u64,
    pub total: u64,
    pub rounds: u64,
    pub epochs: usize,
    pub arad: usize,
    pub success: u8,
}

impl SweepRow {
    pub fn succeeded(&self) -> bool {
        self.success == 1
    }

    fn key(&self) -> (String, usize, u32, u64) {
        (self.family.clone(), self.n, self.alpha, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub family: Family,
    pub n: usize,
    pub alpha: u32,
    pub seed_index: u32,
    pub seed: u64,
}

impl Cell {
    fn key(&self) -> (String, usize, u32, u64) {
        (self.family.name(), self.n, self.alpha, self.seed)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn cell_seed(base: u64, family: &Family, n: usize, seed_index: u32) -> u64 {
    let mut h = splitmix64(base);
    for b in family.name().bytes() {
        h = splitmix64(h ^ b as u64);
    }
    h = splitmix64(h ^ n as u64);
    splitmix64(h ^ seed_index as u64)
}

/// Cells in canonical order: family, n, alpha, seed index. Duplicate
/// budgets (e.g. `log` resolving to a listed value) collapse.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for family in &cfg.families {
        for &n in &cfg.n {
            let mut alphas: Vec<u32> = Vec::new();
            for a in &cfg.alpha {
                let a = a.resolve(n);
                if !alphas.contains(&a) {
                    alphas.push(a);
                }
            }
            for alpha in alphas {
                for seed_index in 0..cfg.seeds {
                    let seed = cell_seed(cfg.seed, family, n, seed_index);
                    out.push(Cell { family: *family, n, alpha, seed_index, seed });
                }
            }
        }
    }
    out
}

/// Graph and initially awake set of a cell. For hidden-matching instances
/// `n` counts centres and every centre starts awake.
pub fn build_instance(family: Family, n: usize, wake: WakeRule, seed: u64) -> Result<(PortNetwork, WakeConfig), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph_seed: u64 = rng.gen();
    let net = match family {
        Family::Clique => complete_graph(n, graph_seed),
        Family::Random(p) => random_connected_graph(n, p, graph_seed),
        Family::Path => path_graph(n),
        Family::HiddenMatching => {
            let m = random_perfect_matching(n, graph_seed).map_err(|e| e.to_string())?;
            let inst = hidden_matching_with_random_ports(&m, rng.gen()).map_err(|e| e.to_string())?;
            let wake = WakeConfig::new(&inst.network, inst.centers()).map_err(|e| e.to_string())?;
            return Ok((inst.network, wake));
        }
    }
    .map_err(|e| e.to_string())?;
    let wake = match wake {
        WakeRule::Single => {
            let v = rng.gen_range(0..net.node_count());
            WakeConfig::new(&net, [v])
        }
        WakeRule::RandomK(k) => WakeConfig::random(&net, k, &mut rng),
        WakeRule::All => Ok(WakeConfig::all(&net)),
    }
    .map_err(|e| e.to_string())?;
    Ok((net, wake))
}

/// Runs one cell end to end, returning its transcript when the run got far
/// enough to produce one.
pub fn run_cell_transcript(cfg: &ExperimentConfig, cell: &Cell) -> Result<RunTranscript, String> {
    let (net, wake) = build_instance(cell.family, cell.n, cfg.wake, cell.seed)?;
    let plan = compute_epoch_plan(&net, &wake);
    let advice = assign_advice(&net, &plan, cell.alpha).map_err(|e| e.to_string())?;
    match run_wakeup_seeded(&net, &wake, &advice, &cfg.run_params(), cell.seed) {
        Ok(t) => Ok(t),
        Err(RunError::Incomplete(t)) => Ok(*t),
        Err(e) => Err(e.to_string()),
    }
}

pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> SweepRow {
    let mut row = SweepRow {
        family: cell.family.name(),
        n: cell.n,
        alpha: cell.alpha,
        beta: beta(cell.alpha),
        seed: cell.seed,
        classical: 0,
        quantum: 0,
        total: 0,
        rounds: 0,
        epochs: 0,
        arad: 0,
        success: 0,
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        let (net, wake) = build_instance(cell.family, cell.n, cfg.wake, cell.seed)?;
        let arad = awake_distance(&net, &wake);
        run_cell_transcript(cfg, cell).map(|t| (t, arad))
    }));
    if let Ok(Ok((t, arad))) = outcome {
        row.classical = t.classical_total();
        row.quantum = t.quantum_total();
        row.total = t.total_messages();
        row.rounds = t.total_rounds;
        row.epochs = t.epochs_executed;
        row.arad = arad;
        row.success = t.all_awake as u8;
    }
    row
}

pub fn row_to_line(row: &SweepRow) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.serialize(row).expect("rows always serialize");
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// Parses CSV text. Malformed records (a torn final line after a crash) are
/// skipped.
pub fn parse_rows(text: &str) -> Vec<SweepRow> {
    csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes())
        .deserialize()
        .filter_map(Result::ok)
        .collect()
}

pub fn read_rows(path: &Path) -> io::Result<Vec<SweepRow>> {
    Ok(parse_rows(&fs::read_to_string(path)?))
}

fn write_rows(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut f = File::create(&tmp)?;
        writeln!(f, "{CSV_HEADER}")?;
        for r in rows {
            f.write_all(row_to_line(r).as_bytes())?;
        }
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub cells: usize,
    pub resumed: usize,
    pub executed: usize,
    pub failures: usize,
}

/// Runs every cell of `cfg` not already present in `output`, appending rows
/// as they finish, then rewrites the file in canonical cell order.
pub fn run_sweep(cfg: &ExperimentConfig, output: &Path) -> io::Result<SweepSummary> {
    let all = cells(cfg);
    let existing = if output.exists() { read_rows(output)? } else { Vec::new() };
    let done: BTreeSet<_> = existing.iter().map(SweepRow::key).collect();
    let todo: Vec<Cell> = all.iter().copied().filter(|c| !done.contains(&c.key())).collect();
    // drop torn records before appending
    write_rows(output, &existing)?;

    let mut file = OpenOptions::new().append(true).open(output)?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<SweepRow>();
    let mut failures = 0;
    let mut fresh = Vec::with_capacity(todo.len());
    std::thread::scope(|s| -> io::Result<()> {
        for _ in 0..cfg.jobs.min(todo.len()).max(1) {
            let tx = tx.clone();
            let (todo, next) = (&todo, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = todo.get(i) else { break };
                if tx.send(run_cell(cfg, cell)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            file.write_all(row_to_line(&row).as_bytes())?;
            file.flush()?;
            failures += (!row.succeeded()) as usize;
            fresh.push(row);
        }
        Ok(())
    })?;
    drop(file);

    let order: BTreeMap<_, usize> = all.iter().enumerate().map(|(i, c)| (c.key(), i)).collect();
    let mut rows = existing;
    rows.extend(fresh);
    rows.sort_by_key(|r| (order.get(&r.key()).copied().unwrap_or(usize::MAX), r.key()));
    write_rows(output, &rows)?;
    Ok(SweepSummary { cells: all.len(), resumed: all.len() - todo.len(), executed: todo.len(), failures })
}

/// Runs a sweep in memory, in canonical order.
pub fn sweep_rows(cfg: &ExperimentConfig) -> Vec<SweepRow> {
    let all = cells(cfg);
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<SweepRow>> = vec![None; all.len()];
    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(all.len()).max(1) {
            let tx = tx.clone();
            let (all, next) = (&all, &next);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = all.get(i) else { break };
                if tx.send((i, run_cell(cfg, cell))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, row) in rx {
            slots[i] = Some(row);
        }
    });
    slots.into_iter().map(|r| r.expect("every cell reports")).collect()
}
