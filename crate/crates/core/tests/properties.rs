use proptest::prelude::*;

use nope_core::graph::validate_partition;
use nope_core::oracle::{exhaustive_argmin, oracle_nope, Scorer};
use nope_core::synth::{gen_cluster_features, gen_erdos_renyi};
use nope_core::{run, stop_target, Algorithm, EngineConfig, FeatureMatrix, RunStatus, StaticGraph};

fn instance(n: usize, p: f64, d: usize, seed: u64) -> (StaticGraph, FeatureMatrix) {
    let g = gen_erdos_renyi(n, p, seed);
    let labels: Vec<u32> = (0..n as u32).map(|i| i % 4).collect();
    (
        g,
        gen_cluster_features(&labels, d, 1.0, 0.7, seed.wrapping_add(1)),
    )
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop::sample::select(Algorithm::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn doubling_features_preserves_merge_order(
        seed in any::<u64>(),
        n in 6usize..60,
        alg in prop::sample::select(vec![Algorithm::Nope, Algorithm::NopeStar]),
    ) {
        let (g, x) = instance(n, 0.15, 5, seed);
        let cfg = EngineConfig::new(alg, 0.5).unwrap().with_trace(true);
        let base = run(&g, &x, cfg).unwrap();
        let scaled = run(&g, &x.scaled(2.0), cfg).unwrap();
        // Exact index is quartic in features, the surrogate quadratic.
        let factor = if alg == Algorithm::Nope { 16.0 } else { 4.0 };
        prop_assert_eq!(base.trace.len(), scaled.trace.len());
        for (a, b) in base.trace.records.iter().zip(&scaled.trace.records) {
            prop_assert_eq!((a.u, a.v), (b.u, b.v));
            prop_assert_eq!(a.score * factor, b.score);
        }
        prop_assert_eq!(base.coarse.partition, scaled.coarse.partition);
    }

    #[test]
    fn engine_matches_oracle(seed in any::<u64>(), n in 4usize..40, ratio in 0.05..0.95f64) {
        let (g, x) = instance(n, 0.2, 3, seed);
        let cfg = EngineConfig::new(Algorithm::Nope, ratio).unwrap().with_trace(true);
        let e = run(&g, &x, cfg).unwrap();
        let o = oracle_nope(&g, &x, cfg).unwrap();
        prop_assert_eq!(e.trace.pairs().collect::<Vec<_>>(), o.trace.pairs().collect::<Vec<_>>());
        prop_assert_eq!(e.status, o.status);
        prop_assert_eq!(e.coarse.partition, o.coarse.partition);
    }

    #[test]
    fn first_merge_is_global_argmin(seed in any::<u64>(), n in 3usize..40) {
        let (g, x) = instance(n, 0.25, 4, seed);
        prop_assume!(g.num_edges() > 0);
        for (alg, scorer) in [(Algorithm::Nope, Scorer::Exact), (Algorithm::NopeStar, Scorer::Surrogate)] {
            let cfg = EngineConfig::new(alg, 0.5).unwrap().with_trace(true);
            let out = run(&g, &x, cfg).unwrap();
            let (pair, score) = exhaustive_argmin(&g, &x, scorer).unwrap();
            let first = out.trace.records[0];
            prop_assert_eq!((first.u, first.v), pair);
            prop_assert!((first.score - score).abs() <= 1e-12 * score.abs().max(1.0));
        }
    }

    #[test]
    fn runs_yield_valid_partitions_with_mean_features(
        seed in any::<u64>(),
        n in 1usize..80,
        p in 0.0..0.2f64,
        ratio in 0.01..0.99f64,
        alg in algorithm(),
    ) {
        let (g, x) = instance(n, p, 3, seed);
        let out = run(&g, &x, EngineConfig::new(alg, ratio).unwrap()).unwrap();
        let part = &out.coarse.partition;
        prop_assert!(validate_partition(part, n).passed());
        let n_c = part.num_supernodes();
        match out.status {
            RunStatus::Complete => prop_assert_eq!(n_c, stop_target(n, ratio)),
            RunStatus::TargetNotReached => prop_assert!(n_c > stop_target(n, ratio)),
        }
        prop_assert!(out.coarse.ratio_achieved <= ratio + 1.0 / n as f64 + 1e-12);
        for k in 0..n_c {
            let m = part.members(k);
            for j in 0..x.dim() {
                let mean = m.iter().map(|&i| x.row(i as usize)[j]).sum::<f64>() / m.len() as f64;
                prop_assert!((out.coarse.features.row(k)[j] - mean).abs() <= 1e-9);
            }
        }
        // Coarse edges are exactly the images of original cross-supernode edges.
        let a = part.assignment();
        for (u, v) in g.edges() {
            let (cu, cv) = (a[u as usize], a[v as usize]);
            if cu != cv {
                prop_assert!(out.coarse.graph.has_edge(cu, cv));
            }
        }
        let images = g.edges().filter(|&(u, v)| a[u as usize] != a[v as usize]).count();
        prop_assert!(out.coarse.graph.num_edges() <= images);
    }

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), alg in algorithm()) {
        let (g, x) = instance(50, 0.1, 4, seed);
        let cfg = EngineConfig::new(alg, 0.6).unwrap().with_exact_trace(true);
        let a = run(&g, &x, cfg).unwrap();
        let b = run(&g, &x, cfg).unwrap();
        prop_assert_eq!(a.trace, b.trace);
        prop_assert_eq!(a.coarse, b.coarse);
    }
}

#[test]
fn components_never_merge_across() {
    // Two disjoint triangles: a full run stops with one supernode per component.
    let (g, _) =
        StaticGraph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let x = FeatureMatrix::from_flat(6, 2, (0..12).map(|v| v as f64).collect()).unwrap();
    for alg in Algorithm::ALL {
        let out = run(&g, &x, EngineConfig::new(alg, 0.99).unwrap()).unwrap();
        assert_eq!(out.status, RunStatus::TargetNotReached);
        assert_eq!(out.coarse.partition.assignment(), &[0, 0, 0, 1, 1, 1]);
        assert_eq!(out.coarse.graph.num_edges(), 0);
    }
}
