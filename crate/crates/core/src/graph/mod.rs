//! Graph and feature containers, the mutable contraction state, and the
//! partition / coarse-graph types produced at the end of a run.

mod partition;
mod state;
mod trace;

pub use partition::{
    coarsening_rate, extract_coarse_graph, validate_partition, CoarsenedGraph, Partition,
    PartitionReport, PartitionViolation,
};
pub(crate) use state::{for_each_union, intersection_count};
pub use state::{CoarseningState, NO_PARENT};
pub use trace::{MergeRecord, MergeTrace};

use crate::error::{Error, Result};

/// Node identifier. Original nodes use `0..n`, supernodes continue from `n`.
pub type NodeId = u32;

/// Immutable simple undirected graph in compressed sparse row form.
///
/// Neighbor lists are sorted ascending and contain neither self-loops nor
/// duplicates; every edge is stored in both endpoint lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticGraph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

/// What was dropped while normalizing a raw edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeNormalization {
    pub self_loops: usize,
    pub duplicates: usize,
}

impl StaticGraph {
    /// Builds a simple graph over `n` nodes. Self-loops are dropped and
    /// repeated edges (in either orientation) collapse to one.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<(Self, EdgeNormalization)>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n > NodeId::MAX as usize / 2 {
            return Err(Error::Invalid(format!("node count {n} exceeds id space")));
        }
        let mut norm = EdgeNormalization::default();
        let mut pairs = Vec::new();
        for (a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::Invalid(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                norm.self_loops += 1;
                continue;
            }
            pairs.push((a.min(b), a.max(b)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        norm.duplicates = before - pairs.len();

        let mut degree = vec![0usize; n];
        for &(a, b) in &pairs {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0 as NodeId; 2 * pairs.len()];
        for &(a, b) in &pairs {
            targets[cursor[a as usize]] = b;
            cursor[a as usize] += 1;
            targets[cursor[b as usize]] = a;
            cursor[b as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok((StaticGraph { offsets, targets }, norm))
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        StaticGraph {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        let i = i as usize;
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.neighbors(i).len()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        (a as usize) < self.num_nodes() && self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Undirected edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.num_nodes() as NodeId).flat_map(move |a| {
            self.neighbors(a)
                .iter()
                .copied()
                .filter(move |&b| b > a)
                .map(move |b| (a, b))
        })
    }
}

/// Dense row-major `n × d` matrix of node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_flat(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Invalid(
                "feature dimension must be at least 1".into(),
            ));
        }
        if data.len() != n * d {
            return Err(Error::Invalid(format!(
                "feature buffer has {} values, expected {n} x {d}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite feature value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(FeatureMatrix { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Invalid(format!(
                "row {i} has {} columns, expected {d}",
                rows[i].len()
            )));
        }
        Self::from_flat(rows.len(), d, rows.concat())
    }

    pub fn num_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        FeatureMatrix {
            n: self.n,
            d: self.d,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Path a–b–c with x_a = x_b = (1,0), x_c = (0,1).
    pub fn path3() -> (StaticGraph, FeatureMatrix) {
        let (g, _) = StaticGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let x =
            FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        (g, x)
    }
}
