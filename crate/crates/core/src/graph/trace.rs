use serde::{Deserialize, Serialize};

use super::NodeId;

/// One executed merge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub round: usize,
    pub u: NodeId,
    pub v: NodeId,
    pub w: NodeId,
    /// Heap key at pop time. May be stale relative to the graph at merge time.
    #[serde(serialize_with = "crate::io::json_floats::f64")]
    pub score: f64,
    /// Exact interference of `(u, v)` evaluated on the state right before the merge.
    #[serde(serialize_with = "crate::io::json_floats::opt")]
    pub exact_interference: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub records: Vec<MergeRecord>,
}

impl MergeTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Exact interference per round, or `None` if any round lacks it.
    pub fn exact_series(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.exact_interference).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.records.iter().map(|r| (r.u, r.v))
    }
}
