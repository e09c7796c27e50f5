mod common;

use beamtree::beam::{beam_search, retrieve_topm};
use beamtree::metrics::regret_p_at_m;
use beamtree::toy::{
    fit, fit_direst, fit_hierest, fit_optest, gen_toy, oracle_table, run_toy_experiment,
    run_toy_grid, sample_node_counts, Estimator, SampleSize, ToyConfig, ToyGrid, ToySource,
};
use beamtree::{rng, tree::Tree};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_direct_and_hierarchical_tables_agree(m in 1usize..400, b in 2usize..5, seed in any::<u64>()) {
        let tree = Tree::random(m, b, seed).unwrap();
        let eta = gen_toy(m, seed);
        let dir = fit_direst(&tree, ToySource::Exact(&eta)).unwrap();
        let hier = fit_hierest(&tree, ToySource::Exact(&eta)).unwrap();
        for n in 0..tree.num_nodes() {
            prop_assert!((dir[n] - hier[n]).abs() <= 1e-12);
            if let Some(p) = tree.parent(n) {
                prop_assert!(dir[p] >= dir[n]);
                prop_assert!(hier[p] >= hier[n] - 1e-12);
            }
        }
    }

    /// The closed-form direct estimate matches `1 − ∏(1 − η)` computed
    /// directly from each subtree.
    #[test]
    fn exact_direct_table_is_union_probability(m in 1usize..100, b in 2usize..5, seed in any::<u64>()) {
        let tree = Tree::random(m, b, seed).unwrap();
        let eta = gen_toy(m, seed);
        let dir = fit_direst(&tree, ToySource::Exact(&eta)).unwrap();
        for n in 0..tree.num_nodes() {
            let none: f64 = tree
                .subtree_leaves(n)
                .unwrap()
                .map(|l| 1.0 - eta[tree.target_of_leaf(l).unwrap()])
                .product();
            prop_assert!((dir[n] - (1.0 - none)).abs() <= 1e-12);
        }
    }

    #[test]
    fn exact_optimal_table_has_zero_regret(m in 1usize..300, b in 2usize..4, seed in any::<u64>(), kfrac in 0.0f64..1.0) {
        let tree = Tree::random(m, b, seed).unwrap();
        let eta = gen_toy(m, seed);
        let table = fit_optest(&tree, ToySource::Exact(&eta)).unwrap();
        prop_assert_eq!(&table, &oracle_table(&tree, &eta).unwrap());
        prop_assert_eq!(&table, &max_eta_table(&tree, &eta));
        let k = 1 + ((m - 1) as f64 * kfrac) as usize;
        let beam = beam_search(&tree, &table, k).unwrap();
        for mm in 1..=k {
            let got = retrieve_topm(&tree, &beam, mm).unwrap();
            prop_assert_eq!(regret_p_at_m(&eta, &got, mm).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampled_tables_are_frequencies(m in 1usize..60, b in 2usize..4, seed in any::<u64>(), n in 1usize..50) {
        let tree = Tree::random(m, b, seed).unwrap();
        let eta = gen_toy(m, seed);
        let counts = sample_node_counts(&tree, &eta, n, &mut rng::stream(seed, "s"));
        for est in [Estimator::DirEst, Estimator::HierEst, Estimator::OptEst] {
            let table = fit(&tree, est, ToySource::Sample(&counts)).unwrap();
            for &p in &table {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
            }
        }
        let dir = fit_direst(&tree, ToySource::Sample(&counts)).unwrap();
        let hier = fit_hierest(&tree, ToySource::Sample(&counts)).unwrap();
        for i in 0..tree.num_nodes() {
            prop_assert!((dir[i] - hier[i]).abs() <= 1e-12);
        }
    }
}

#[test]
fn direct_estimator_has_positive_regret_without_sampling_noise() {
    let report = run_toy_experiment(&ToyConfig {
        num_targets: 1000,
        arity: 2,
        estimator: Estimator::DirEst,
        sample_size: SampleSize::Infinite,
        beam_size: 5,
        m_values: vec![1, 5],
        runs: 20,
        seed: 1,
    })
    .unwrap();
    assert!(report.rows.iter().all(|r| r.mean_regret > 0.0));
}

#[test]
fn regret_shrinks_as_the_beam_widens() {
    let ks = [1, 5, 10, 20, 50];
    let rows = run_toy_grid(&ToyGrid {
        num_targets: 1000,
        arity: 2,
        estimators: vec![Estimator::DirEst],
        sample_sizes: vec![SampleSize::Infinite],
        cells: ks.iter().map(|&k| (k, 1)).collect(),
        runs: 100,
        seed: 5,
    })
    .unwrap();
    for w in rows.windows(2) {
        assert!(
            w[1].mean_regret <= w[0].mean_regret + w[0].std_err,
            "k={} {} then k={} {}",
            w[0].k,
            w[0].mean_regret,
            w[1].k,
            w[1].mean_regret
        );
    }
}

#[test]
fn one_run_smoke() {
    let report = run_toy_experiment(&ToyConfig {
        num_targets: 100,
        arity: 3,
        estimator: Estimator::HierEst,
        sample_size: SampleSize::Finite(100),
        beam_size: 10,
        m_values: vec![1, 10],
        runs: 1,
        seed: 0,
    })
    .unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].count, 1);
    assert_eq!(report.rows[0].std_err, 0.0);
}
