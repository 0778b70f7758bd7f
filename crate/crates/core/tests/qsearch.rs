use proptest::prelude::*;
use qwake_core::qsearch::{
    iterated_quantum_search, quantum_search, success_probability, SearchConfig, SearchSpec,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn completeness_over_many_trials() {
    let cfg = SearchConfig::default();
    for n in [16usize, 64, 256] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let trials = 10_000;
        let mut misses = 0;
        for t in 0..trials {
            let size = 1 + t % n;
            let stride = 1 + t % 5;
            let spec = SearchSpec::new((1..=size as u32).collect(), |p| (p as usize).is_multiple_of(stride), n);
            let want = spec.marked.clone();
            let got = iterated_quantum_search(&spec, &cfg, &mut rng);
            if got.found != want {
                misses += 1;
            }
        }
        let bound = 2.0 / (n as f64).powf(cfg.confidence);
        assert!((misses as f64 / trials as f64) <= bound, "n={n}: {misses} misses");
    }
}

#[test]
fn two_of_four_marked() {
    let cfg = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..10_000 {
        let spec = SearchSpec::new(vec![1, 2, 3, 4], |p| p == 2 || p == 3, 64);
        let t = iterated_quantum_search(&spec, &cfg, &mut rng);
        if t.found.len() != 2 {
            failures += 1;
        }
        assert!(t.found.iter().all(|p| [2, 3].contains(p)));
    }
    assert!(failures as f64 / 10_000.0 <= 1.0 / 64.0);
}

#[test]
fn empirical_single_run_frequency_tracks_formula() {
    // one attempt with j = 0 on N = 4, C = 1 measures a marked port w.p. 1/4
    let cfg = SearchConfig { run_cap: 0.5, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut hits = 0;
    let trials = 20_000;
    for _ in 0..trials {
        let mut spec = SearchSpec::new(vec![1, 2, 3, 4], |p| p == 4, 2);
        spec.repetitions = Some(1);
        let t = quantum_search(&spec, &cfg, &mut rng);
        assert_eq!(t.oracle_calls, 1);
        if t.result.is_some() {
            hits += 1;
        }
    }
    let p = success_probability(4, 1, 0);
    let freq = hits as f64 / trials as f64;
    assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / trials as f64).sqrt(), "{freq} vs {p}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn search_contracts(size in 1usize..=128, marks in proptest::collection::btree_set(1u32..=128, 0..20),
                        n_exp in 2u32..10, seed: u64) {
        let cfg = SearchConfig::default();
        let n = 1usize << n_exp;
        let spec = SearchSpec::new((1..=size as u32).collect(), |p| marks.contains(&p), n);
        let c = spec.marked.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = quantum_search(&spec, &cfg, &mut rng);
        prop_assert_eq!(t.quantum_messages, 2 * t.oracle_calls);
        prop_assert_eq!(t.rounds, t.oracle_calls);
        prop_assert!(t.oracle_calls <= cfg.search_budget(size, c, n));
        if let Some(p) = t.result {
            prop_assert!(spec.marked.contains(&p));
        }
        if c == 0 {
            prop_assert!(t.result.is_none());
        }

        let it = iterated_quantum_search(&spec, &cfg, &mut rng);
        prop_assert!(it.found.is_subset(&spec.marked));
        prop_assert!(it.oracle_calls <= cfg.iterated_budget(size, c, n));
        prop_assert_eq!(it.quantum_messages, 2 * it.oracle_calls);
    }
}
