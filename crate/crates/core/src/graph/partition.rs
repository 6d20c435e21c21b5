use std::fmt;

use super::{CoarseningState, FeatureMatrix, NodeId, StaticGraph};
use crate::error::{Error, Result};

/// Surjective map from original nodes to supernodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<u32>,
    n_c: usize,
    members: Vec<Vec<NodeId>>,
}

impl Partition {
    /// Builds a partition from a raw assignment vector. The supernode count is
    /// taken as `max + 1`; nothing is validated here, see [`validate_partition`].
    pub fn from_assignment(assignment: Vec<u32>) -> Self {
        let n_c = assignment
            .iter()
            .map(|&a| a as usize + 1)
            .max()
            .unwrap_or(0);
        let mut members = vec![Vec::new(); n_c];
        for (node, &k) in assignment.iter().enumerate() {
            members[k as usize].push(node as NodeId);
        }
        Partition {
            assignment,
            n_c,
            members,
        }
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn num_supernodes(&self) -> usize {
        self.n_c
    }

    pub fn members(&self, k: usize) -> &[NodeId] {
        &self.members[k]
    }

    pub fn all_members(&self) -> &[Vec<NodeId>] {
        &self.members
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionViolation {
    /// Assignment length differs from the number of original nodes.
    NodeCount {
        expected: usize,
        got: usize,
    },
    /// A node points past the last supernode.
    OutOfRange {
        node: usize,
        supernode: u32,
    },
    EmptySupernode(usize),
    /// Member list of a supernode is not the exact preimage of the assignment.
    MembersMismatch(usize),
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionViolation::NodeCount { expected, got } if got < expected => {
                write!(f, "{} unassigned node(s)", expected - got)
            }
            PartitionViolation::NodeCount { expected, got } => {
                write!(f, "assignment covers {got} nodes, expected {expected}")
            }
            PartitionViolation::OutOfRange { node, supernode } => {
                write!(f, "node {node} assigned to missing supernode {supernode}")
            }
            PartitionViolation::EmptySupernode(k) => write!(f, "supernode {k} is empty"),
            PartitionViolation::MembersMismatch(k) => {
                write!(f, "member list of supernode {k} disagrees with assignment")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionReport {
    pub num_supernodes: usize,
    pub violations: Vec<PartitionViolation>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the mapping-matrix constraints: every original node in exactly one
/// supernode and every supernode non-empty.
pub fn validate_partition(p: &Partition, n: usize) -> PartitionReport {
    let mut violations = Vec::new();
    if p.assignment.len() != n {
        violations.push(PartitionViolation::NodeCount {
            expected: n,
            got: p.assignment.len(),
        });
    }
    let mut counts = vec![0usize; p.n_c];
    for (node, &k) in p.assignment.iter().enumerate() {
        match counts.get_mut(k as usize) {
            Some(c) => *c += 1,
            None => violations.push(PartitionViolation::OutOfRange { node, supernode: k }),
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            violations.push(PartitionViolation::EmptySupernode(k));
        }
    }
    if p.members.len() != p.n_c {
        violations.push(PartitionViolation::MembersMismatch(p.members.len()));
    }
    for (k, list) in p.members.iter().enumerate() {
        let consistent = list.len() == counts.get(k).copied().unwrap_or(0)
            && list
                .iter()
                .all(|&m| p.assignment.get(m as usize) == Some(&(k as u32)));
        if !consistent {
            violations.push(PartitionViolation::MembersMismatch(k));
        }
    }
    PartitionReport {
        num_supernodes: p.n_c,
        violations,
    }
}

/// `1 - n_c / n`.
pub fn coarsening_rate(n: usize, n_c: usize) -> Result<f64> {
    if n_c == 0 || n_c > n {
        return Err(Error::Domain(format!(
            "supernode count {n_c} outside 1..={n}"
        )));
    }
    Ok(1.0 - n_c as f64 / n as f64)
}

/// Coarse graph over supernodes together with the mapping that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsenedGraph {
    pub graph: StaticGraph,
    pub features: FeatureMatrix,
    pub partition: Partition,
    pub ratio_achieved: f64,
}

/// Materializes the coarse graph from a finished (or paused) state.
///
/// Supernodes are numbered in order of their smallest original member, so
/// labels do not depend on the order merges happened in. Coarse edges are the
/// original edges mapped through the partition, with duplicates and
/// intra-supernode edges dropped.
pub fn extract_coarse_graph(state: &CoarseningState, original: &StaticGraph) -> CoarsenedGraph {
    let n = state.original_count();
    let roots = state.roots();
    let mut dense = vec![u32::MAX; state.next_id()];
    let mut live: Vec<NodeId> = Vec::with_capacity(state.active_count());
    let assignment: Vec<u32> = roots[..n]
        .iter()
        .map(|&root| {
            let slot = &mut dense[root as usize];
            if *slot == u32::MAX {
                *slot = live.len() as u32;
                live.push(root);
            }
            *slot
        })
        .collect();

    let edges = original
        .edges()
        .map(|(a, b)| (assignment[a as usize], assignment[b as usize]))
        .filter(|(a, b)| a != b);
    let (graph, _) = StaticGraph::from_edges(live.len(), edges)
        .expect("coarse ids are in range by construction");

    let d = state.dim();
    let mut data = Vec::with_capacity(live.len() * d);
    for &id in &live {
        data.extend_from_slice(state.features(id));
    }
    let features = FeatureMatrix::from_flat(live.len(), d, data)
        .expect("state rows are finite averages of finite inputs");

    let ratio_achieved = if n == 0 {
        0.0
    } else {
        1.0 - live.len() as f64 / n as f64
    };
    CoarsenedGraph {
        graph,
        features,
        partition: Partition::from_assignment(assignment),
        ratio_achieved,
    }
}
