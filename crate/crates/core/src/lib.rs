//! Interference-aware greedy graph coarsening.
//!
//! Nodes are contracted pairwise, cheapest first, where the cost of merging
//! two nodes is how much their combined neighborhood's similarity to them
//! shifts. Three engines share the same loop ([`coarsen`]): the exact index
//! with an incrementally maintained sum-square cache, an expected-value
//! surrogate that needs only degrees and one feature distance per candidate,
//! and a cosine-similarity baseline. [`oracle`] holds slow reference
//! implementations used by the test suites.

pub mod coarsen;
pub mod error;
pub mod graph;
pub mod interference;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod synth;

pub use coarsen::{
    run, run_nope, run_nope_star, run_selfish_cosine, stop_target, Algorithm, Engine, EngineConfig,
    EngineRun, RunStatus,
};
pub use error::{Error, Result};
pub use graph::{
    CoarsenedGraph, CoarseningState, FeatureMatrix, MergeRecord, MergeTrace, NodeId, Partition,
    StaticGraph,
};
