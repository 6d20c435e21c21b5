//! Slow reference implementations.
//!
//! Nothing here shares code with the engines beyond the input types and the
//! stop-target arithmetic: neighbor sets are `BTreeSet`s, features are owned
//! rows, scores are scalar loops over the literal formula, and the candidate
//! queue is a flat vector scanned for its minimum.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::coarsen::{stop_target, EngineConfig, RunStatus};
use crate::error::{Error, Result};
use crate::graph::{
    CoarsenedGraph, CoarseningState, FeatureMatrix, MergeRecord, MergeTrace, NodeId, Partition,
    StaticGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    Exact,
    Surrogate,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub coarse: CoarsenedGraph,
    pub trace: MergeTrace,
    pub status: RunStatus,
}

fn scalar_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        s += a[j] * b[j];
    }
    s
}

struct NaiveGraph {
    rows: Vec<Vec<f64>>,
    sizes: Vec<u64>,
    nbrs: Vec<BTreeSet<NodeId>>,
    live: Vec<bool>,
    members: Vec<Vec<NodeId>>,
}

impl NaiveGraph {
    fn new(graph: &StaticGraph, features: &FeatureMatrix) -> Self {
        let n = graph.num_nodes();
        NaiveGraph {
            rows: (0..n).map(|i| features.row(i).to_vec()).collect(),
            sizes: vec![1; n],
            nbrs: (0..n)
                .map(|i| graph.neighbors(i as NodeId).iter().copied().collect())
                .collect(),
            live: vec![true; n],
            members: (0..n).map(|i| vec![i as NodeId]).collect(),
        }
    }

    fn combined(&self, u: NodeId, v: NodeId) -> BTreeSet<NodeId> {
        self.nbrs[u as usize]
            .union(&self.nbrs[v as usize])
            .copied()
            .filter(|&i| i != u && i != v)
            .collect()
    }

    fn weight(&self, u: NodeId, v: NodeId) -> f64 {
        let (a, b) = (self.sizes[u as usize] as f64, self.sizes[v as usize] as f64);
        a * b / (a + b)
    }

    fn exact(&self, u: NodeId, v: NodeId) -> f64 {
        let (xu, xv) = (&self.rows[u as usize], &self.rows[v as usize]);
        let mut total = 0.0;
        for i in self.combined(u, v) {
            let xi = &self.rows[i as usize];
            let diff = scalar_dot(xi, xu) - scalar_dot(xi, xv);
            total += diff * diff;
        }
        self.weight(u, v) * total
    }

    fn surrogate(&self, u: NodeId, v: NodeId) -> f64 {
        let (xu, xv) = (&self.rows[u as usize], &self.rows[v as usize]);
        let mut dist = 0.0;
        for j in 0..xu.len() {
            dist += (xu[j] - xv[j]) * (xu[j] - xv[j]);
        }
        self.weight(u, v) * self.combined(u, v).len() as f64 * dist
    }

    fn merge(&mut self, u: NodeId, v: NodeId) -> NodeId {
        let w = self.rows.len() as NodeId;
        let (su, sv) = (self.sizes[u as usize], self.sizes[v as usize]);
        let sw = su + sv;
        let mut row = vec![0.0; self.rows[u as usize].len()];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (su as f64 * self.rows[u as usize][j] + sv as f64 * self.rows[v as usize][j])
                / sw as f64;
        }
        let nw = self.combined(u, v);
        for &k in &nw {
            let set = &mut self.nbrs[k as usize];
            set.remove(&u);
            set.remove(&v);
            set.insert(w);
        }
        let mut members = std::mem::take(&mut self.members[u as usize]);
        members.append(&mut self.members[v as usize]);
        members.sort_unstable();

        self.rows.push(row);
        self.sizes.push(sw);
        self.nbrs.push(nw);
        self.live[u as usize] = false;
        self.live[v as usize] = false;
        self.live.push(true);
        self.members.push(members);
        w
    }

    fn into_coarse(self, original: &StaticGraph) -> CoarsenedGraph {
        let n = original.num_nodes();
        let mut supers: Vec<usize> = (0..self.live.len()).filter(|&i| self.live[i]).collect();
        supers.sort_by_key(|&i| self.members[i][0]);
        let mut assignment = vec![0u32; n];
        for (k, &id) in supers.iter().enumerate() {
            for &m in &self.members[id] {
                assignment[m as usize] = k as u32;
            }
        }
        let d = self.rows.first().map_or(1, Vec::len);
        let data: Vec<f64> = supers
            .iter()
            .flat_map(|&id| self.rows[id].clone())
            .collect();
        let edges: Vec<_> = original
            .edges()
            .map(|(a, b)| (assignment[a as usize], assignment[b as usize]))
            .filter(|(a, b)| a != b)
            .collect();
        let (graph, _) = StaticGraph::from_edges(supers.len(), edges).expect("labels in range");
        CoarsenedGraph {
            graph,
            features: FeatureMatrix::from_flat(supers.len(), d, data).expect("finite rows"),
            partition: Partition::from_assignment(assignment),
            ratio_achieved: if n == 0 {
                0.0
            } else {
                1.0 - supers.len() as f64 / n as f64
            },
        }
    }
}

/// `(score, low, high, seq)` with the engine's tie-break.
fn entry_cmp(a: &(f64, NodeId, NodeId, u64), b: &(f64, NodeId, NodeId, u64)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .then(a.3.cmp(&b.3))
}

/// Reference NOPE run: same greedy policy, queue discipline, staleness and
/// tie-break as the engine, with every quantity recomputed from scratch.
pub fn oracle_nope(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    config: EngineConfig,
) -> Result<OracleRun> {
    if features.num_rows() != graph.num_nodes() {
        return Err(Error::Invalid(
            "feature rows do not match node count".into(),
        ));
    }
    let n = graph.num_nodes();
    let target = stop_target(n, config.ratio);
    let mut g = NaiveGraph::new(graph, features);
    let mut queue: Vec<(f64, NodeId, NodeId, u64)> = Vec::new();
    let mut seq = 0u64;
    for (u, v) in graph.edges() {
        queue.push((g.exact(u, v) + 0.0, u, v, seq));
        seq += 1;
    }

    let mut live = n;
    let mut trace = MergeTrace::default();
    let mut status = RunStatus::Complete;
    while live > target {
        let Some(best) = (0..queue.len()).min_by(|&a, &b| entry_cmp(&queue[a], &queue[b])) else {
            status = RunStatus::TargetNotReached;
            break;
        };
        let (score, u, v, _) = queue.swap_remove(best);
        if !g.live[u as usize] || !g.live[v as usize] {
            continue;
        }
        let exact = g.exact(u, v);
        let w = g.merge(u, v);
        live -= 1;
        for &k in &g.nbrs[w as usize].clone() {
            queue.push((g.exact(w, k) + 0.0, k.min(w), k.max(w), seq));
            seq += 1;
        }
        trace.records.push(MergeRecord {
            round: trace.records.len(),
            u,
            v,
            w,
            score,
            exact_interference: Some(exact),
        });
    }
    Ok(OracleRun {
        coarse: g.into_coarse(graph),
        trace,
        status,
    })
}

/// Largest relative deviation of the cached sum-squares from a fresh
/// recomputation, over live ids. Denominators are floored at `1e-12`.
pub fn check_sumsq(state: &CoarseningState) -> f64 {
    let mut worst = 0.0f64;
    for i in state.active_ids() {
        let xi = state.features(i);
        let mut fresh = 0.0;
        for &k in state.neighbors(i) {
            let p = scalar_dot(state.features(k), xi);
            fresh += p * p;
        }
        let cached = state.sumsq(i);
        if fresh == 0.0 && cached == 0.0 {
            continue;
        }
        worst = worst.max((cached - fresh).abs() / fresh.abs().max(1e-12));
    }
    worst
}

/// Scans every edge of the input graph and returns the minimum-score pair
/// under the engine tie-break (score, then lower id, then higher id).
pub fn exhaustive_argmin(
    graph: &StaticGraph,
    features: &FeatureMatrix,
    scorer: Scorer,
) -> Result<((NodeId, NodeId), f64)> {
    let g = NaiveGraph::new(graph, features);
    let mut best: Option<(f64, NodeId, NodeId, u64)> = None;
    for (u, v) in graph.edges() {
        let s = match scorer {
            Scorer::Exact => g.exact(u, v),
            Scorer::Surrogate => g.surrogate(u, v),
        } + 0.0;
        let cand = (s, u, v, 0);
        if best.is_none_or(|b| entry_cmp(&cand, &b) == Ordering::Less) {
            best = Some(cand);
        }
    }
    best.map(|(s, u, v, _)| ((u, v), s))
        .ok_or_else(|| Error::Domain("graph has no edges".into()))
}
