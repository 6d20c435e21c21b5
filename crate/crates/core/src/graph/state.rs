use std::mem::size_of;

use super::{FeatureMatrix, NodeId, StaticGraph};
use crate::error::{Error, Result};

/// Marker stored in `parent` for ids that have not been merged away.
pub const NO_PARENT: NodeId = NodeId::MAX;

/// Mutable contraction state shared by all engines.
///
/// Storage for `2n` ids is reserved up front: every merge retires two live
/// ids and allocates one, so at most `2n - 1` ids are ever handed out.
/// Rows of retired ids stay readable for the rest of the run.
#[derive(Debug, Clone)]
pub struct CoarseningState {
    n: usize,
    d: usize,
    n_max: usize,
    x: Vec<f64>,
    size: Vec<u32>,
    active: Vec<bool>,
    active_count: usize,
    nbr: Vec<Vec<NodeId>>,
    deg: Vec<u32>,
    pub(crate) sumsq: Vec<f64>,
    parent: Vec<NodeId>,
    next_id: usize,
    nbr_bytes: usize,
}

impl CoarseningState {
    pub fn new(graph: &StaticGraph, features: &FeatureMatrix) -> Result<Self> {
        let n = graph.num_nodes();
        if features.num_rows() != n {
            return Err(Error::Invalid(format!(
                "feature matrix has {} rows but the graph has {n} nodes",
                features.num_rows()
            )));
        }
        let d = features.dim();
        let n_max = 2 * n.max(1);

        let mut x = vec![0.0; n_max * d];
        x[..n * d].copy_from_slice(features.as_slice());

        let mut size = vec![0; n_max];
        size[..n].fill(1);
        let mut active = vec![false; n_max];
        active[..n].fill(true);

        let mut nbr = vec![Vec::new(); n_max];
        let mut deg = vec![0; n_max];
        let mut nbr_bytes = 0;
        for i in 0..n {
            let list = graph.neighbors(i as NodeId).to_vec();
            deg[i] = list.len() as u32;
            nbr_bytes += list.capacity() * size_of::<NodeId>();
            nbr[i] = list;
        }

        Ok(CoarseningState {
            n,
            d,
            n_max,
            x,
            size,
            active,
            active_count: n,
            nbr,
            deg,
            sumsq: vec![0.0; n_max],
            parent: vec![NO_PARENT; n_max],
            next_id: n,
            nbr_bytes,
        })
    }

    /// Number of original nodes.
    pub fn original_count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn capacity(&self) -> usize {
        self.n_max
    }

    pub fn next_id(&self) -> usize {
        self.next_id
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    pub fn is_active(&self, i: NodeId) -> bool {
        (i as usize) < self.next_id && self.active[i as usize]
    }

    /// Live ids in ascending order.
    pub fn active_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.next_id as NodeId).filter(move |&i| self.active[i as usize])
    }

    pub fn features(&self, i: NodeId) -> &[f64] {
        let i = i as usize;
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn size(&self, i: NodeId) -> u32 {
        self.size[i as usize]
    }

    /// Sorted neighbor list. For retired ids this is the list as it was at
    /// merge time until [`release_retired`](Self::release_retired) drops it.
    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.nbr[i as usize]
    }

    pub fn degree(&self, i: NodeId) -> u32 {
        self.deg[i as usize]
    }

    pub fn sumsq(&self, i: NodeId) -> f64 {
        self.sumsq[i as usize]
    }

    pub fn parent(&self, i: NodeId) -> Option<NodeId> {
        match self.parent[i as usize] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn is_adjacent(&self, u: NodeId, v: NodeId) -> bool {
        self.nbr[u as usize].binary_search(&v).is_ok()
    }

    /// Fails unless `u` and `v` are distinct, live and adjacent.
    pub fn check_live_edge(&self, u: NodeId, v: NodeId) -> Result<()> {
        if u == v {
            return Err(Error::ContractViolation(format!("self pair ({u}, {u})")));
        }
        for id in [u, v] {
            if !self.is_active(id) {
                return Err(Error::ContractViolation(format!("node {id} is not active")));
            }
        }
        if !self.is_adjacent(u, v) {
            return Err(Error::ContractViolation(format!(
                "nodes {u} and {v} are not adjacent"
            )));
        }
        Ok(())
    }

    /// Contracts the edge `(u, v)` into a fresh supernode and returns its id.
    ///
    /// The new row is the size-weighted mean of the two endpoint rows, its
    /// neighbor set is `(N_u ∪ N_v) \ {u, v}`, and every such neighbor is
    /// rewired to point at the new id. The neighbor lists of `u` and `v` are
    /// left in place so cache maintenance can still consult them.
    pub fn merge_pair(&mut self, u: NodeId, v: NodeId) -> Result<NodeId> {
        self.check_live_edge(u, v)?;
        if self.next_id >= self.n_max {
            return Err(Error::Capacity {
                used: self.next_id,
                capacity: self.n_max,
            });
        }
        let w = self.next_id as NodeId;
        let (ui, vi, wi) = (u as usize, v as usize, w as usize);
        let d = self.d;

        let su = self.size[ui] as f64;
        let sv = self.size[vi] as f64;
        let sw = su + sv;
        self.size[wi] = self.size[ui] + self.size[vi];
        for j in 0..d {
            self.x[wi * d + j] = (su * self.x[ui * d + j] + sv * self.x[vi * d + j]) / sw;
        }

        let merged = sorted_union_excluding(&self.nbr[ui], &self.nbr[vi], u, v);
        for &k in &merged {
            let ki = k as usize;
            let before = self.nbr[ki].capacity();
            let list = &mut self.nbr[ki];
            list.retain(|&j| j != u && j != v);
            // w is larger than every id allocated so far, so pushing keeps order.
            list.push(w);
            self.deg[ki] = list.len() as u32;
            let after = list.capacity();
            self.nbr_bytes =
                self.nbr_bytes + after * size_of::<NodeId>() - before * size_of::<NodeId>();
        }
        self.deg[wi] = merged.len() as u32;
        self.nbr_bytes += merged.capacity() * size_of::<NodeId>();
        self.nbr[wi] = merged;

        self.active[ui] = false;
        self.active[vi] = false;
        self.active[wi] = true;
        self.active_count -= 1;
        self.parent[ui] = w;
        self.parent[vi] = w;
        self.next_id += 1;
        Ok(w)
    }

    /// Frees the neighbor lists of two retired ids.
    pub fn release_retired(&mut self, u: NodeId, v: NodeId) {
        for id in [u, v] {
            if !self.is_active(id) {
                let list = std::mem::take(&mut self.nbr[id as usize]);
                self.nbr_bytes -= list.capacity() * size_of::<NodeId>();
            }
        }
    }

    /// Bytes held by the state's own buffers: the pre-allocated feature
    /// block, the per-id arrays, and the current neighbor lists.
    pub fn tracked_bytes(&self) -> usize {
        self.x.capacity() * size_of::<f64>()
            + self.size.capacity() * size_of::<u32>()
            + self.active.capacity() * size_of::<bool>()
            + self.deg.capacity() * size_of::<u32>()
            + self.sumsq.capacity() * size_of::<f64>()
            + self.parent.capacity() * size_of::<NodeId>()
            + self.nbr.capacity() * size_of::<Vec<NodeId>>()
            + self.nbr_bytes
    }

    /// Resolves the live root of every id below `next_id`.
    pub(crate) fn roots(&self) -> Vec<NodeId> {
        // Parents are always allocated after their children, so a descending
        // sweep sees each parent's root before the child asks for it.
        let mut root = vec![NO_PARENT; self.next_id];
        for i in (0..self.next_id).rev() {
            root[i] = match self.parent[i] {
                NO_PARENT => i as NodeId,
                p => root[p as usize],
            };
        }
        root
    }
}

/// Sorted union of two sorted lists with `skip_a` and `skip_b` removed.
pub(crate) fn sorted_union_excluding(
    a: &[NodeId],
    b: &[NodeId],
    skip_a: NodeId,
    skip_b: NodeId,
) -> Vec<NodeId> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    for_each_union(a, b, |k| {
        if k != skip_a && k != skip_b {
            out.push(k);
        }
    });
    out
}

/// Visits the sorted union of two sorted lists once per distinct element.
#[inline]
pub(crate) fn for_each_union(a: &[NodeId], b: &[NodeId], mut f: impl FnMut(NodeId)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                f(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                f(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                f(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    a[i..].iter().for_each(|&k| f(k));
    b[j..].iter().for_each(|&k| f(k));
}

/// Size of the intersection of two sorted lists.
#[inline]
pub(crate) fn intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}
