use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qwake_core::lowerbound::end_to_end_reduction_check;
use qwake_core::network::{random_perfect_matching, PerfectMatching};
use qwake_core::scheduler::baseline_flood;
use qwake_core::MessageConvention;
use qwake_harness::sweep::{build_instance, cell_seed, read_rows, run_cell_transcript, run_sweep};
use qwake_harness::{compare_advice_levels, fit_exponent, AlphaSpec, Cell, ExperimentConfig, Family, WakeRule};

#[derive(Parser)]
#[command(name = "qwake", version, about = "Quantum wake-up simulator with advice")]
struct Cli {
    /// Base seed for runs and bootstrap resampling.
    #[arg(long, global = true, env = "QWAKE_SEED", default_value_t = 1)]
    seed: u64,
    /// How many messages one distributed oracle call costs.
    #[arg(long, global = true, value_name = "CONVENTION")]
    msg_convention: Option<MessageConvention>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one instance and print its summary.
    Run {
        #[arg(long, default_value = "clique")]
        family: Family,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value = "0")]
        alpha: AlphaSpec,
        #[arg(long, default_value = "single")]
        wake: WakeRule,
        /// Print the round-by-round event log.
        #[arg(long)]
        log: bool,
        /// Also run classical flooding on the same instance.
        #[arg(long)]
        baseline: bool,
    },
    /// Run every cell of a config file and write CSV.
    Sweep {
        config: PathBuf,
        /// Overrides the `output` key.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the `jobs` key.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit message-count exponents from a sweep CSV.
    Fit {
        csv: PathBuf,
        /// Also print advice ratios at this n.
        #[arg(long)]
        compare_at: Option<usize>,
        /// Allowed factor between measured and predicted ratios.
        #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
        band: f64,
    },
    /// Recover hidden matchings from wake-up runs on the lower-bound family.
    Reduce {
        /// Number of centres (even).
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Random matchings to try; at n = 4 all three are used.
        #[arg(long, default_value_t = 3)]
        matchings: usize,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        alpha: u32,
        /// Print one line per run.
        #[arg(long)]
        verbose: bool,
    },
    /// Route a two-branch superposition of sends through the query oracle.
    RoutingDemo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn all_matchings(n: usize) -> Vec<PerfectMatching> {
    fn rec(free: &[u32], acc: &mut Vec<(u32, u32)>, n: usize, out: &mut Vec<PerfectMatching>) {
        let Some((&a, rest)) = free.split_first() else {
            out.push(PerfectMatching::from_pairs(n, acc).expect("pairs cover all"));
            return;
        };
        for (k, &b) in rest.iter().enumerate() {
            let remaining: Vec<u32> = rest.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &x)| x).collect();
            acc.push((a, b));
            rec(&remaining, acc, n, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    rec(&(1..=n as u32).collect::<Vec<_>>(), &mut Vec::new(), n, &mut out);
    out
}

fn execute(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { family, n, alpha, wake, log, baseline } => {
            let mut cfg = ExperimentConfig { families: vec![family], n: vec![n], alpha: vec![alpha], wake, seed: cli.seed, ..Default::default() };
            if let Some(c) = cli.msg_convention {
                cfg.convention = c;
            }
            cfg.validate()?;
            let cell = Cell { family, n, alpha: alpha.resolve(n), seed_index: 0, seed: cell_seed(cli.seed, &family, n, 0) };
            let t = run_cell_transcript(&cfg, &cell)?;
            if log {
                print!("{}", t.render_log());
            } else {
                println!("{}", t.summary());
            }
            if baseline {
                let (net, wake) = build_instance(family, n, cfg.wake, cell.seed)?;
                let f = baseline_flood(&net, &wake);
                println!("flood classical={} rounds={}", f.classical_total(), f.total_rounds);
            }
            Ok(if t.all_awake { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep { config, output, jobs } => {
            let mut cfg = ExperimentConfig::parse(&std::fs::read_to_string(&config)?)?;
            if let Some(c) = cli.msg_convention {
                cfg.convention = c;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            cfg.validate()?;
            let out = output.unwrap_or_else(|| cfg.output.clone());
            let s = run_sweep(&cfg, &out)?;
            println!(
                "cells={} resumed={} executed={} failures={} -> {}",
                s.cells,
                s.resumed,
                s.executed,
                s.failures,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { csv, compare_at, band } => {
            let rows = read_rows(&csv)?;
            let groups: BTreeSet<(String, u32)> = rows.iter().map(|r| (r.family.clone(), r.alpha)).collect();
            for (family, alpha) in &groups {
                match fit_exponent(&rows, family, *alpha, cli.seed) {
                    Ok(report) => print!("{report}"),
                    Err(e) => println!("family={family} alpha={alpha} skipped: {e}"),
                }
            }
            if let Some(n) = compare_at {
                let families: BTreeSet<&String> = groups.iter().map(|(f, _)| f).collect();
                for family in families {
                    println!("advice ratios family={family} n={n}");
                    match compare_advice_levels(&rows, family, n, band) {
                        Ok(table) => table.iter().for_each(|r| println!("  {r}")),
                        Err(e) => println!("  skipped: {e}"),
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Reduce { n, matchings, seeds, alpha, verbose } => {
            if n < 2 || n % 2 == 1 {
                return Err(format!("need an even number of centres, got {n}").into());
            }
            let instances = if n == 4 {
                all_matchings(4)
            } else {
                (0..matchings as u64).map(|k| random_perfect_matching(n, cli.seed ^ (k << 32))).collect::<Result<_, _>>()?
            };
            let mut params = ExperimentConfig::default().run_params();
            if let Some(c) = cli.msg_convention {
                params.search.convention = c;
            }
            let (mut runs, mut ok, mut correct, mut charged_ok) = (0, 0, 0, 0);
            for m in &instances {
                for s in 0..seeds {
                    let r = end_to_end_reduction_check(m, alpha, &params, cli.seed.wrapping_add(s))?;
                    runs += 1;
                    if r.success {
                        ok += 1;
                        correct += r.descriptor_correct as u32;
                        charged_ok += (r.charged_queries <= 2 * r.quantum_from_centers) as u32;
                    }
                    if verbose {
                        println!("{r}");
                    }
                }
            }
            println!("runs={runs} successful={ok} descriptor_correct={correct} charged_within_bound={charged_ok}");
            Ok(if correct == ok && charged_ok == ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::RoutingDemo => {
            let d = qwake_harness::demo::four_port_example();
            print!("{}", d.report);
            Ok(if d.queries == 4 && d.clean { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
