//! Diagnostics for coarse graphs and merge trajectories.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::coarsen::EngineRun;
use crate::error::{Error, Result};
use crate::graph::{
    extract_coarse_graph, squared_distance, CoarseningState, FeatureMatrix, NodeId, StaticGraph,
};
use crate::io::json_floats;

/// Largest graph [`avg_edge_betweenness`] accepts by default.
pub const EBC_DEFAULT_CAP: usize = 5000;

/// Default EWMA smoothing constant for interference trajectories.
pub const EWMA_DEFAULT_ALPHA: f64 = 0.01;

/// Mean squared feature difference across edges, each edge counted once.
pub fn dirichlet_energy(graph: &StaticGraph, features: &FeatureMatrix) -> Result<f64> {
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::Domain(
            "Dirichlet energy of an edgeless graph".into(),
        ));
    }
    let total: f64 = graph
        .edges()
        .map(|(a, b)| squared_distance(features.row(a as usize), features.row(b as usize)))
        .sum();
    Ok(total / m as f64)
}

/// Exact edge betweenness by shortest-path counting from every source.
///
/// Entry `e` corresponds to the `e`-th edge of [`StaticGraph::edges`] and holds
/// `Σ_{s<t} σ_st(e) / σ_st`, with unreachable pairs contributing nothing.
pub fn edge_betweenness(graph: &StaticGraph) -> Vec<f64> {
    let n = graph.num_nodes();
    // Edge id for every directed adjacency slot.
    let mut slot_edge = Vec::with_capacity(2 * graph.num_edges());
    let mut base = vec![0usize; n + 1];
    for a in 0..n {
        base[a + 1] = base[a] + graph.degree(a as NodeId);
    }
    let mut edge_ids = std::collections::HashMap::with_capacity(graph.num_edges());
    for (e, pair) in graph.edges().enumerate() {
        edge_ids.insert(pair, e);
    }
    for a in 0..n as NodeId {
        for &b in graph.neighbors(a) {
            slot_edge.push(edge_ids[&(a.min(b), a.max(b))]);
        }
    }

    let mut bc = vec![0.0; graph.num_edges()];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in graph.neighbors(v as NodeId) {
                let w = w as usize;
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }
        for &w in order.iter().rev() {
            // Predecessors of w are the neighbors one level closer to s.
            for (slot, &v) in graph.neighbors(w as NodeId).iter().enumerate() {
                let v = v as usize;
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                    bc[slot_edge[base[w] + slot]] += c;
                    delta[v] += c;
                }
            }
        }
    }
    // Each unordered pair was counted from both ends.
    for b in &mut bc {
        *b /= 2.0;
    }
    bc
}

/// Mean edge betweenness with the default size cap.
pub fn avg_edge_betweenness(graph: &StaticGraph) -> Result<f64> {
    avg_edge_betweenness_capped(graph, EBC_DEFAULT_CAP)
}

pub fn avg_edge_betweenness_capped(graph: &StaticGraph, cap: usize) -> Result<f64> {
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::Domain(
            "edge betweenness of an edgeless graph".into(),
        ));
    }
    if graph.num_nodes() > cap {
        return Err(Error::TooLarge {
            n: graph.num_nodes(),
            cap,
        });
    }
    Ok(edge_betweenness(graph).iter().sum::<f64>() / m as f64)
}

/// `y_0 = x_0`, `y_t = α x_t + (1 − α) y_{t−1}`.
pub fn ewma(series: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "EWMA alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if series.is_empty() {
        return Err(Error::Domain("EWMA of an empty series".into()));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut y = series[0];
    out.push(y);
    for &x in &series[1..] {
        y = alpha * x + (1.0 - alpha) * y;
        out.push(y);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub merges: usize,
    pub active_count: usize,
    /// `None` when the metric is undefined (no edges) or skipped (over cap).
    #[serde(serialize_with = "json_floats::opt")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub rounds: Vec<usize>,
    #[serde(serialize_with = "json_floats::vec")]
    pub raw_interference: Vec<f64>,
    #[serde(serialize_with = "json_floats::vec")]
    pub smoothed: Vec<f64>,
    pub dirichlet_checkpoints: Vec<Checkpoint>,
    pub ebc_checkpoints: Vec<Checkpoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub checkpoint_stride: usize,
    pub alpha: f64,
    /// Compute average edge betweenness at checkpoints (skipped above `ebc_cap`).
    pub betweenness: bool,
    pub ebc_cap: usize,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            checkpoint_stride: 1,
            alpha: EWMA_DEFAULT_ALPHA,
            betweenness: true,
            ebc_cap: EBC_DEFAULT_CAP,
        }
    }
}

/// Least-squares slope of `ln y` against `ln x`. `None` with fewer than two
/// distinct sizes or any non-positive value.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Merge counts at which checkpoints are taken: every `stride` merges, plus
/// the final state.
pub fn checkpoint_positions(total_merges: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut at: Vec<usize> = (0..=total_merges).step_by(stride).collect();
    if at.last() != Some(&total_merges) {
        at.push(total_merges);
    }
    at
}

/// Replays a recorded run on the original inputs and samples structural and
/// semantic metrics along the way.
pub fn trajectory_report(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    run: &EngineRun,
    options: TrajectoryOptions,
) -> Result<TrajectoryReport> {
    if run.trace.len() != run.stats.merges {
        return Err(Error::Invalid(format!(
            "trace holds {} of {} merges; rerun with tracing enabled",
            run.trace.len(),
            run.stats.merges
        )));
    }
    let raw = run.trace.exact_series().ok_or_else(|| {
        Error::Invalid("trace lacks exact interference values; enable exact tracing".into())
    })?;
    if !(options.alpha > 0.0 && options.alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "EWMA alpha must lie in (0, 1], got {}",
            options.alpha
        )));
    }
    let smoothed = if raw.is_empty() {
        Vec::new()
    } else {
        ewma(&raw, options.alpha)?
    };

    let positions = checkpoint_positions(raw.len(), options.checkpoint_stride);
    let mut state = CoarseningState::new(graph, features)?;
    let mut dirichlet = Vec::with_capacity(positions.len());
    let mut ebc = Vec::with_capacity(positions.len());
    let mut applied = 0;
    for &at in &positions {
        while applied < at {
            let rec = &run.trace.records[applied];
            let w = state.merge_pair(rec.u, rec.v)?;
            if w != rec.w {
                return Err(Error::Invalid(format!(
                    "replay diverged at round {applied}: expected id {}, got {w}",
                    rec.w
                )));
            }
            state.release_retired(rec.u, rec.v);
            applied += 1;
        }
        let coarse = extract_coarse_graph(&state, graph);
        let active_count = coarse.graph.num_nodes();
        dirichlet.push(Checkpoint {
            merges: at,
            active_count,
            value: dirichlet_energy(&coarse.graph, &coarse.features).ok(),
        });
        if options.betweenness {
            ebc.push(Checkpoint {
                merges: at,
                active_count,
                value: avg_edge_betweenness_capped(&coarse.graph, options.ebc_cap).ok(),
            });
        }
    }
    Ok(TrajectoryReport {
        rounds: (0..raw.len()).collect(),
        raw_interference: raw,
        smoothed,
        dirichlet_checkpoints: dirichlet,
        ebc_checkpoints: ebc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarsen::{run, Algorithm, EngineConfig};
    use crate::graph::fixtures::path3;
    use proptest::prelude::*;

    /// Enumerates every simple path from s to t, keeps the shortest ones, and
    /// counts how many use each edge.
    fn brute_force_ebc(graph: &StaticGraph) -> Vec<f64> {
        fn dfs(
            g: &StaticGraph,
            at: NodeId,
            t: NodeId,
            path: &mut Vec<NodeId>,
            seen: &mut Vec<bool>,
            out: &mut Vec<Vec<NodeId>>,
        ) {
            if at == t {
                out.push(path.clone());
                return;
            }
            for &nb in g.neighbors(at) {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    path.push(nb);
                    dfs(g, nb, t, path, seen, out);
                    path.pop();
                    seen[nb as usize] = false;
                }
            }
        }
        let edges: Vec<_> = graph.edges().collect();
        let mut bc = vec![0.0; edges.len()];
        let n = graph.num_nodes() as NodeId;
        for s in 0..n {
            for t in s + 1..n {
                let mut paths = Vec::new();
                let mut seen = vec![false; n as usize];
                seen[s as usize] = true;
                dfs(graph, s, t, &mut vec![s], &mut seen, &mut paths);
                let Some(shortest) = paths.iter().map(Vec::len).min() else {
                    continue;
                };
                let best: Vec<_> = paths.into_iter().filter(|p| p.len() == shortest).collect();
                for p in &best {
                    for hop in p.windows(2) {
                        let key = (hop[0].min(hop[1]), hop[0].max(hop[1]));
                        let e = edges.iter().position(|&x| x == key).unwrap();
                        bc[e] += 1.0 / best.len() as f64;
                    }
                }
            }
        }
        bc
    }

    #[test]
    fn dirichlet_examples() {
        let (g, x) = path3();
        assert_eq!(dirichlet_energy(&g, &x).unwrap(), 1.0);
        let same = FeatureMatrix::from_flat(3, 2, vec![0.25; 6]).unwrap();
        assert_eq!(dirichlet_energy(&g, &same).unwrap(), 0.0);
        let (g1, _) = StaticGraph::from_edges(2, [(0, 1)]).unwrap();
        let x1 = FeatureMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(dirichlet_energy(&g1, &x1).unwrap(), 25.0);
        assert!(dirichlet_energy(&StaticGraph::empty(3), &x).is_err());
    }

    #[test]
    fn ebc_examples() {
        let (path, _) = StaticGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(avg_edge_betweenness(&path).unwrap(), 2.0);
        let (tri, _) = StaticGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(avg_edge_betweenness(&tri).unwrap(), 1.0);
        let (single, _) = StaticGraph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(avg_edge_betweenness(&single).unwrap(), 1.0);
        assert!(avg_edge_betweenness(&StaticGraph::empty(3)).is_err());
        assert!(matches!(
            avg_edge_betweenness_capped(&path, 2),
            Err(Error::TooLarge { n: 3, cap: 2 })
        ));
    }

    #[test]
    fn loglog_slope_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [1e3, 2e3, 4e3, 8e3]
            .iter()
            .map(|&n| (n, 3.0 * n * n))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
        assert_eq!(loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]), None);
        assert_eq!(loglog_slope(&[(1.0, 0.0), (2.0, 2.0)]), None);
    }

    #[test]
    fn ewma_examples() {
        let s = [3.0, -1.0, 4.0, 1.5];
        assert_eq!(ewma(&s, 1.0).unwrap(), s.to_vec());
        assert_eq!(ewma(&[1.0, 3.0], 0.5).unwrap(), vec![1.0, 2.0]);
        assert_eq!(ewma(&[2.5; 6], 0.3).unwrap(), vec![2.5; 6]);
        assert!(ewma(&s, 0.0).is_err());
        assert!(ewma(&s, 1.5).is_err());
    }

    #[test]
    fn checkpoint_positions_cover_ends() {
        assert_eq!(checkpoint_positions(10, 10), vec![0, 10]);
        assert_eq!(checkpoint_positions(10, 50), vec![0, 10]);
        assert_eq!(checkpoint_positions(7, 3), vec![0, 3, 6, 7]);
    }

    #[test]
    fn path_trajectory() {
        let (g, x) = path3();
        let cfg = EngineConfig::new(Algorithm::Nope, 0.4)
            .unwrap()
            .with_trace(true);
        let out = run(&g, &x, cfg).unwrap();
        let opts = TrajectoryOptions {
            checkpoint_stride: 1,
            alpha: 1.0,
            ..Default::default()
        };
        let rep = trajectory_report(&g, &x, &out, opts).unwrap();
        assert_eq!(rep.raw_interference, vec![0.0]);
        assert_eq!(rep.smoothed, rep.raw_interference);
        assert_eq!(rep.dirichlet_checkpoints.len(), 2);
        assert_eq!(rep.dirichlet_checkpoints[0].active_count, 3);
        assert_eq!(rep.dirichlet_checkpoints[1].active_count, 2);
        assert_eq!(rep.ebc_checkpoints[0].value, Some(2.0));
    }

    #[test]
    fn trajectory_requires_exact_values() {
        let (g, x) = path3();
        let cfg = EngineConfig::new(Algorithm::NopeStar, 0.4)
            .unwrap()
            .with_trace(true);
        let out = run(&g, &x, cfg).unwrap();
        assert!(trajectory_report(&g, &x, &out, TrajectoryOptions::default()).is_err());
        let untraced = run(&g, &x, EngineConfig::new(Algorithm::Nope, 0.4).unwrap()).unwrap();
        assert!(trajectory_report(&g, &x, &untraced, TrajectoryOptions::default()).is_err());
    }

    #[test]
    fn merging_twins_does_not_raise_total_dirichlet() {
        // 0 and 1 share features and neighborhoods {2, 3}. The per-edge mean
        // may rise (a zero-length edge disappears) but the total cannot.
        let (g, _) =
            StaticGraph::from_edges(4, [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)]).unwrap();
        let x = FeatureMatrix::from_rows(&[
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![-2.0, 0.5],
            vec![0.0, 3.0],
        ])
        .unwrap();
        let before = dirichlet_energy(&g, &x).unwrap();
        let mut st = CoarseningState::new(&g, &x).unwrap();
        st.merge_pair(0, 1).unwrap();
        let cg = extract_coarse_graph(&st, &g);
        let after = dirichlet_energy(&cg.graph, &cg.features).unwrap();
        assert!(after * cg.graph.num_edges() as f64 <= before * g.num_edges() as f64);
    }

    fn small_graph(seed: u64, max_n: usize) -> StaticGraph {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=max_n);
        let mut edges = Vec::new();
        for a in 0..n as NodeId {
            for b in a + 1..n as NodeId {
                if rng.random_bool(0.35) {
                    edges.push((a, b));
                }
            }
        }
        StaticGraph::from_edges(n, edges).unwrap().0
    }

    proptest! {
        #[test]
        fn brandes_matches_path_enumeration(seed in any::<u64>()) {
            let g = small_graph(seed, 9);
            let fast = edge_betweenness(&g);
            let slow = brute_force_ebc(&g);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            }
        }

        #[test]
        fn total_betweenness_is_sum_of_distances(seed in any::<u64>()) {
            // Every shortest s–t path has dist(s, t) edges, so the per-pair
            // loads sum to the distance.
            let g = small_graph(seed, 30);
            let n = g.num_nodes();
            let mut total_dist = 0usize;
            for s in 0..n {
                let mut dist = vec![usize::MAX; n];
                dist[s] = 0;
                let mut q = VecDeque::from([s]);
                while let Some(v) = q.pop_front() {
                    for &w in g.neighbors(v as NodeId) {
                        if dist[w as usize] == usize::MAX {
                            dist[w as usize] = dist[v] + 1;
                            q.push_back(w as usize);
                        }
                    }
                }
                total_dist += dist[s + 1..].iter().filter(|&&d| d != usize::MAX).sum::<usize>();
            }
            let total: f64 = edge_betweenness(&g).iter().sum();
            prop_assert!((total - total_dist as f64).abs() <= 1e-9 * total.max(1.0));
        }

        #[test]
        fn dirichlet_invariant_under_shift_and_relabel(seed in any::<u64>(), shift in -5.0..5.0f64) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let g = small_graph(seed, 20);
            prop_assume!(g.num_edges() > 0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = g.num_nodes();
            let x = FeatureMatrix::from_flat(n, 3, (0..3 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let base = dirichlet_energy(&g, &x).unwrap();

            let shifted = FeatureMatrix::from_flat(n, 3, x.as_slice().iter().map(|v| v + shift).collect()).unwrap();
            prop_assert!((dirichlet_energy(&g, &shifted).unwrap() - base).abs() <= 1e-9 * base.max(1.0));

            let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
            perm.shuffle(&mut rng);
            let (pg, _) = StaticGraph::from_edges(n, g.edges().map(|(a, b)| (perm[a as usize], perm[b as usize]))).unwrap();
            let mut rows = vec![Vec::new(); n];
            for i in 0..n { rows[perm[i] as usize] = x.row(i).to_vec(); }
            let px = FeatureMatrix::from_rows(&rows).unwrap();
            prop_assert!((dirichlet_energy(&pg, &px).unwrap() - base).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn ewma_stays_within_range(series in proptest::collection::vec(-1e3..1e3f64, 1..50), alpha in 0.001..=1.0f64) {
            let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for y in ewma(&series, alpha).unwrap() {
                prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
            }
        }
    }
}
