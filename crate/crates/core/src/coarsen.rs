//! Greedy contraction engines.
//!
//! All three engines share one loop: pop the cheapest candidate from a
//! min-heap, skip it if either endpoint has already been merged away, merge,
//! then push fresh candidates for every edge incident to the new supernode.
//! Entries between nodes the merge did not touch keep their push-time keys.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::mem::size_of;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    extract_coarse_graph, CoarsenedGraph, CoarseningState, FeatureMatrix, MergeRecord, MergeTrace,
    NodeId, StaticGraph,
};
use crate::interference::{
    cache_update_after_merge, cosine_similarity, exact_unchecked, expected_unchecked,
    init_sumsq_cache,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Exact neighborhood interference with a sum-square cache.
    Nope,
    /// Expected interference under local isotropy.
    NopeStar,
    /// Pairwise cosine similarity, highest first.
    SelfishCosine,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Nope,
        Algorithm::NopeStar,
        Algorithm::SelfishCosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nope => "nope",
            Algorithm::NopeStar => "nope-star",
            Algorithm::SelfishCosine => "selfish-cosine",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nope" => Ok(Algorithm::Nope),
            "nope-star" | "nope_star" | "nope*" => Ok(Algorithm::NopeStar),
            "selfish-cosine" | "selfish_cosine" => Ok(Algorithm::SelfishCosine),
            other => Err(Error::Invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub algorithm: Algorithm,
    /// Target coarsening rate, strictly between 0 and 1.
    pub ratio: f64,
    /// Recorded for provenance; the engines themselves are deterministic.
    pub seed: u64,
    pub record_trace: bool,
    /// Re-evaluate the exact index for every merge even when the engine
    /// does not rank by it. Costs one exact evaluation per merge.
    pub recompute_exact_in_trace: bool,
}

impl EngineConfig {
    pub fn new(algorithm: Algorithm, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Domain(format!(
                "coarsening ratio must lie in (0, 1), got {ratio}"
            )));
        }
        Ok(EngineConfig {
            algorithm,
            ratio,
            seed: 0,
            record_trace: false,
            recompute_exact_in_trace: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    /// Turns on exact recomputation (and therefore tracing).
    pub fn with_exact_trace(mut self, on: bool) -> Self {
        self.recompute_exact_in_trace = on;
        self.record_trace |= on;
        self
    }
}

/// Minimum live-node count: the loop runs while `|active| > ⌈n (1 − ratio)⌉`.
pub fn stop_target(n: usize, ratio: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let keep = n as f64 * (1.0 - ratio);
    // 10 * 0.3 evaluates to 3.0000000000000004; snap such values before the ceiling.
    let nearest = keep.round();
    let target = if (keep - nearest).abs() <= 1e-9 * keep.max(1.0) {
        nearest
    } else {
        keep.ceil()
    };
    (target as usize).clamp(1, n)
}

/// Heap entry. Ordered by `(score, u, v, seq)` with `u < v`.
#[derive(Debug, Clone, Copy)]
pub struct ScoredCandidate {
    pub score: f64,
    pub u: NodeId,
    pub v: NodeId,
    pub seq: u64,
}

impl ScoredCandidate {
    pub fn new(score: f64, a: NodeId, b: NodeId, seq: u64) -> Self {
        ScoredCandidate {
            // Folds -0.0 into +0.0 so total_cmp agrees with ==.
            score: score + 0.0,
            u: a.min(b),
            v: a.max(b),
            seq,
        }
    }
}

impl PartialEq for ScoredCandidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScoredCandidate {}

impl PartialOrd for ScoredCandidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScoredCandidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.u.cmp(&other.u))
            .then(self.v.cmp(&other.v))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Complete,
    /// The heap ran dry before the live count reached the target.
    TargetNotReached,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    pub merges: usize,
    pub target: usize,
    /// Popped entries discarded because an endpoint was no longer live.
    pub stale_pops: usize,
    pub pushes: usize,
    pub peak_tracked_bytes: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct EngineRun {
    pub coarse: CoarsenedGraph,
    pub trace: MergeTrace,
    pub status: RunStatus,
    pub stats: RunStats,
}

/// Stepwise driver for one coarsening run.
pub struct Engine<'g> {
    graph: &'g StaticGraph,
    config: EngineConfig,
    state: CoarseningState,
    heap: BinaryHeap<Reverse<ScoredCandidate>>,
    target: usize,
    seq: u64,
    trace: MergeTrace,
    pushed: Vec<ScoredCandidate>,
    scratch: Vec<f64>,
    exhausted: bool,
    stats: RunStats,
    started: Instant,
}

impl<'g> Engine<'g> {
    /// Builds the state, fills the cache (NOPE only) and pushes every edge.
    pub fn new(
        graph: &'g StaticGraph,
        features: &FeatureMatrix,
        config: EngineConfig,
    ) -> Result<Self> {
        let started = Instant::now();
        EngineConfig::new(config.algorithm, config.ratio)?;
        let mut state = CoarseningState::new(graph, features)?;
        if config.algorithm == Algorithm::Nope {
            init_sumsq_cache(&mut state);
        }
        let target = stop_target(graph.num_nodes(), config.ratio);
        let mut engine = Engine {
            graph,
            config,
            state,
            heap: BinaryHeap::with_capacity(graph.num_edges()),
            target,
            seq: 0,
            trace: MergeTrace::default(),
            pushed: Vec::new(),
            scratch: Vec::with_capacity(features.dim()),
            exhausted: false,
            stats: RunStats {
                merges: 0,
                target,
                stale_pops: 0,
                pushes: 0,
                peak_tracked_bytes: 0,
                elapsed: Duration::ZERO,
            },
            started,
        };
        engine.pushed.reserve_exact(graph.num_edges());
        for (u, v) in graph.edges() {
            let score = engine.score(u, v);
            let cand = engine.push(score, u, v);
            engine.pushed.push(cand);
        }
        engine.observe_memory();
        Ok(engine)
    }

    pub fn state(&self) -> &CoarseningState {
        &self.state
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Candidates pushed by the most recent merge, or every initial edge
    /// candidate before the first step.
    pub fn last_pushed(&self) -> &[ScoredCandidate] {
        &self.pushed
    }

    pub fn trace(&self) -> &MergeTrace {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.exhausted || self.state.active_count() <= self.target
    }

    /// Current tracked storage: state buffers, heap, and scratch buffers.
    pub fn tracked_bytes(&self) -> usize {
        self.state.tracked_bytes()
            + self.heap.capacity() * size_of::<Reverse<ScoredCandidate>>()
            + self.pushed.capacity() * size_of::<ScoredCandidate>()
            + self.scratch.capacity() * size_of::<f64>()
    }

    fn observe_memory(&mut self) {
        let now = self.tracked_bytes();
        if now > self.stats.peak_tracked_bytes {
            self.stats.peak_tracked_bytes = now;
        }
    }

    #[inline]
    fn score(&mut self, u: NodeId, v: NodeId) -> f64 {
        match self.config.algorithm {
            Algorithm::Nope => exact_unchecked(&self.state, u, v, &mut self.scratch),
            Algorithm::NopeStar => expected_unchecked(&self.state, u, v),
            Algorithm::SelfishCosine => {
                -cosine_similarity(self.state.features(u), self.state.features(v))
            }
        }
    }

    #[inline]
    fn push(&mut self, score: f64, a: NodeId, b: NodeId) -> ScoredCandidate {
        let cand = ScoredCandidate::new(score, a, b, self.seq);
        self.seq += 1;
        self.stats.pushes += 1;
        self.heap.push(Reverse(cand));
        cand
    }

    /// Executes one merge. Returns `None` once the target is reached or no
    /// live candidate remains.
    pub fn step(&mut self) -> Result<Option<MergeRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let cand = loop {
            match self.heap.pop() {
                None => {
                    self.exhausted = true;
                    return Ok(None);
                }
                Some(Reverse(c)) if self.state.is_active(c.u) && self.state.is_active(c.v) => {
                    break c;
                }
                Some(_) => self.stats.stale_pops += 1,
            }
        };
        let (u, v) = (cand.u, cand.v);

        let exact = if self.config.record_trace
            && (self.config.algorithm == Algorithm::Nope || self.config.recompute_exact_in_trace)
        {
            Some(exact_unchecked(&self.state, u, v, &mut self.scratch))
        } else {
            None
        };

        let w = self.state.merge_pair(u, v)?;
        if self.config.algorithm == Algorithm::Nope {
            cache_update_after_merge(&mut self.state, w, u, v);
        }
        self.state.release_retired(u, v);

        if self.stats.merges == 0 {
            // Drop the initial edge batch rather than keep its capacity.
            self.pushed = Vec::new();
        }
        self.pushed.clear();
        for idx in 0..self.state.neighbors(w).len() {
            let k = self.state.neighbors(w)[idx];
            let score = self.score(w, k);
            let cand = self.push(score, k, w);
            self.pushed.push(cand);
        }
        self.observe_memory();

        let record = MergeRecord {
            round: self.stats.merges,
            u,
            v,
            w,
            score: cand.score,
            exact_interference: exact,
        };
        self.stats.merges += 1;
        if self.config.record_trace {
            self.trace.records.push(record);
        }
        Ok(Some(record))
    }

    /// Runs to completion and materializes the coarse graph.
    pub fn run_to_end(mut self) -> Result<EngineRun> {
        while self.step()?.is_some() {}
        Ok(self.finish())
    }

    /// Stops where the engine currently is and materializes the result.
    pub fn finish(mut self) -> EngineRun {
        let status = if self.state.active_count() <= self.target {
            RunStatus::Complete
        } else {
            RunStatus::TargetNotReached
        };
        let coarse = extract_coarse_graph(&self.state, self.graph);
        self.stats.elapsed = self.started.elapsed();
        if status == RunStatus::TargetNotReached {
            log::warn!(
                "{}: heap exhausted at {} live nodes, target was {}",
                self.config.algorithm,
                self.state.active_count(),
                self.target
            );
        }
        EngineRun {
            coarse,
            trace: self.trace,
            status,
            stats: self.stats,
        }
    }
}

/// Runs whichever engine `config.algorithm` names.
pub fn run(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<EngineRun> {
    Engine::new(graph, features, config)?.run_to_end()
}

fn run_checked(
    expected: Algorithm,
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<EngineRun> {
    if config.algorithm != expected {
        return Err(Error::ContractViolation(format!(
            "config names {}, called the {expected} engine",
            config.algorithm
        )));
    }
    run(graph, features, config)
}

pub fn run_nope(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<EngineRun> {
    run_checked(Algorithm::Nope, graph, features, config)
}

pub fn run_nope_star(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<EngineRun> {
    run_checked(Algorithm::NopeStar, graph, features, config)
}

pub fn run_selfish_cosine(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<EngineRun> {
    run_checked(Algorithm::SelfishCosine, graph, features, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::path3;
    use crate::graph::validate_partition;

    fn cfg(alg: Algorithm, r: f64) -> EngineConfig {
        EngineConfig::new(alg, r).unwrap().with_trace(true)
    }

    #[test]
    fn stop_target_examples() {
        assert_eq!(stop_target(3327, 0.5), 1664);
        assert_eq!(stop_target(10, 0.7), 3);
        assert_eq!(stop_target(10, 0.95), 1);
        assert_eq!(stop_target(100, 1e-9), 100);
        assert_eq!(stop_target(3, 0.4), 2);
    }

    #[test]
    fn config_rejects_bad_ratio() {
        for r in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(EngineConfig::new(Algorithm::Nope, r).is_err());
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("louvain".parse::<Algorithm>().is_err());
    }

    #[test]
    fn candidate_order_is_total() {
        let a = ScoredCandidate::new(0.0, 3, 1, 5);
        let b = ScoredCandidate::new(-0.0, 1, 4, 0);
        assert_eq!((a.u, a.v), (1, 3));
        assert!(a < b);
        assert!(ScoredCandidate::new(0.5, 0, 1, 0) > a);
        assert!(ScoredCandidate::new(0.0, 1, 3, 6) > a);
    }

    #[test]
    fn path_first_merges() {
        let (g, x) = path3();
        for alg in Algorithm::ALL {
            let out = run(&g, &x, cfg(alg, 0.4)).unwrap();
            assert_eq!(out.status, RunStatus::Complete);
            assert_eq!(out.trace.len(), 1);
            let rec = out.trace.records[0];
            assert_eq!((rec.u, rec.v, rec.w), (0, 1, 3), "{alg}");
        }
        let out = run_nope(&g, &x, cfg(Algorithm::Nope, 0.4)).unwrap();
        assert_eq!(out.trace.records[0].score, 0.0);
        assert_eq!(out.trace.records[0].exact_interference, Some(0.0));
        assert_eq!(out.coarse.partition.assignment(), &[0, 0, 1]);
    }

    #[test]
    fn tiny_ratio_is_identity() {
        let (g, x) = path3();
        let out = run(&g, &x, cfg(Algorithm::Nope, 1e-6)).unwrap();
        assert_eq!(out.stats.merges, 0);
        assert_eq!(out.coarse.graph, g);
        assert_eq!(out.coarse.features, x);
        assert_eq!(out.status, RunStatus::Complete);
    }

    #[test]
    fn edgeless_graph_flags_target_not_reached() {
        let g = StaticGraph::empty(5);
        let x = FeatureMatrix::from_flat(5, 1, vec![1.0; 5]).unwrap();
        for alg in Algorithm::ALL {
            let out = run(&g, &x, cfg(alg, 0.5)).unwrap();
            assert_eq!(out.status, RunStatus::TargetNotReached);
            assert!(out.trace.is_empty());
            assert_eq!(out.coarse.graph.num_nodes(), 5);
        }
    }

    #[test]
    fn complete_graph_identical_features_merges_in_id_order() {
        let edges: Vec<_> = (0..4u32)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
            .collect();
        let (g, _) = StaticGraph::from_edges(4, edges).unwrap();
        let x = FeatureMatrix::from_flat(4, 2, vec![0.5; 8]).unwrap();
        for alg in Algorithm::ALL {
            let out = run(&g, &x, cfg(alg, 0.75)).unwrap();
            let pairs: Vec<_> = out.trace.pairs().collect();
            // All keys tie, so the lowest live pair always wins.
            assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5)], "{alg}");
            assert!(out.trace.records.iter().all(|r| r.score <= 0.0));
        }
    }

    #[test]
    fn orthogonal_features_merge_in_id_order_for_cosine() {
        let (g, _) = StaticGraph::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let x = FeatureMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let out = run_selfish_cosine(&g, &x, cfg(Algorithm::SelfishCosine, 0.25)).unwrap();
        assert_eq!(out.trace.records[0].score, 0.0);
        assert_eq!((out.trace.records[0].u, out.trace.records[0].v), (0, 1));
    }

    #[test]
    fn wrong_engine_is_rejected() {
        let (g, x) = path3();
        assert!(run_nope_star(&g, &x, cfg(Algorithm::Nope, 0.4)).is_err());
    }

    #[test]
    fn partition_valid_and_sizes_consistent() {
        let (g, _) =
            StaticGraph::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)])
                .unwrap();
        let x = FeatureMatrix::from_flat(
            6,
            2,
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 1.0, 0.2, 0.8, -1.0, 0.0, 0.5, 0.5],
        )
        .unwrap();
        for alg in Algorithm::ALL {
            let out = run(&g, &x, cfg(alg, 0.5)).unwrap();
            assert_eq!(out.coarse.graph.num_nodes(), 3);
            assert!(validate_partition(&out.coarse.partition, 6).passed());
            assert!((out.coarse.ratio_achieved - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn step_api_exposes_pushed_candidates() {
        let (g, x) = path3();
        let mut e = Engine::new(&g, &x, cfg(Algorithm::NopeStar, 0.4)).unwrap();
        let rec = e.step().unwrap().unwrap();
        assert_eq!(rec.w, 3);
        assert_eq!(e.last_pushed().len(), 1);
        assert_eq!((e.last_pushed()[0].u, e.last_pushed()[0].v), (2, 3));
        assert!(e.step().unwrap().is_none());
        assert!(e.is_done());
    }
}
