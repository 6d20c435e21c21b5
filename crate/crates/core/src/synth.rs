//! Seeded synthetic graphs and features.
//!
//! Every generator draws from a `ChaCha8Rng` created with `seed_from_u64`, so
//! outputs depend only on the parameters and the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::graph::{FeatureMatrix, NodeId, StaticGraph};

/// Generator identity recorded in run manifests.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng::seed_from_u64 (rand_chacha 0.9)";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Calls `emit(k)` for each index `k < len` kept independently with
/// probability `p`, by drawing geometric gaps between kept indices.
fn bernoulli_indices(len: u64, p: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(u64)) {
    if len == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..len).for_each(emit);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut k: u64 = 0;
    loop {
        // u in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if !gap.is_finite() || gap >= (len - k) as f64 {
            return;
        }
        k += gap as u64;
        emit(k);
        k += 1;
        if k >= len {
            return;
        }
    }
}

/// Pairs `(i, j)`, `i < j`, inside one block `[start, start + size)`.
fn sample_within(
    start: usize,
    size: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
    edges: &mut Vec<(NodeId, NodeId)>,
) {
    let len = (size as u64) * (size as u64).saturating_sub(1) / 2;
    // Pair index k enumerates (1,0), (2,0), (2,1), (3,0), ... row by row.
    let mut row: u64 = 1;
    let mut row_start: u64 = 0;
    bernoulli_indices(len, p, rng, |k| {
        while k >= row_start + row {
            row_start += row;
            row += 1;
        }
        let col = k - row_start;
        edges.push((
            (start as u64 + col) as NodeId,
            (start as u64 + row) as NodeId,
        ));
    });
}

/// Pairs between two disjoint blocks.
fn sample_across(
    a: (usize, usize),
    b: (usize, usize),
    p: f64,
    rng: &mut ChaCha8Rng,
    edges: &mut Vec<(NodeId, NodeId)>,
) {
    let len = a.1 as u64 * b.1 as u64;
    bernoulli_indices(len, p, rng, |k| {
        let i = a.0 as u64 + k / b.1 as u64;
        let j = b.0 as u64 + k % b.1 as u64;
        edges.push((i as NodeId, j as NodeId));
    });
}

/// G(n, p): each unordered pair present independently with probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> StaticGraph {
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    sample_within(0, n, p, &mut rng, &mut edges);
    StaticGraph::from_edges(n, edges).expect("ids below n").0
}

/// Cluster label of node `i` when `n` nodes are split into `k` contiguous,
/// near-equal blocks.
fn block_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .map(|c| {
            let lo = c * n / k;
            let hi = (c + 1) * n / k;
            (lo, hi - lo)
        })
        .collect()
}

/// Planted partition: `k` contiguous blocks wired internally with `p_in` and
/// across blocks with `p_out`. Returns the graph and per-node block labels.
pub fn gen_planted_partition(
    n: usize,
    k: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> (StaticGraph, Vec<u32>) {
    let k = k.clamp(1, n.max(1));
    let blocks = block_bounds(n, k);
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    for a in 0..k {
        sample_within(blocks[a].0, blocks[a].1, p_in, &mut rng, &mut edges);
        for b in a + 1..k {
            sample_across(blocks[a], blocks[b], p_out, &mut rng, &mut edges);
        }
    }
    let mut labels = vec![0u32; n];
    for (c, &(lo, size)) in blocks.iter().enumerate() {
        labels[lo..lo + size].fill(c as u32);
    }
    (
        StaticGraph::from_edges(n, edges).expect("ids below n").0,
        labels,
    )
}

/// Features drawn as `center[label] + noise_sigma · N(0, I)`, with each center
/// drawn as `center_scale · N(0, I)`.
pub fn gen_cluster_features(
    labels: &[u32],
    d: usize,
    center_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> FeatureMatrix {
    let d = d.max(1);
    let mut rng = rng(seed);
    let k = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let centers: Vec<f64> = (0..k * d)
        .map(|_| center_scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut data = Vec::with_capacity(labels.len() * d);
    for &l in labels {
        let c = &centers[l as usize * d..(l as usize + 1) * d];
        for &cj in c {
            data.push(cj + noise_sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    FeatureMatrix::from_flat(labels.len(), d, data).expect("finite Gaussian draws")
}
