//! Scoring math for candidate merges.
//!
//! The exact index of a pair `(u, v)` sums, over the combined neighborhood
//! `U = (N_u ∪ N_v) \ {u, v}`, the size-weighted squared change in dot-product
//! similarity each neighbor sees when `u` and `v` are replaced by their
//! weighted mean. It reduces to
//!
//! ```text
//! I(u, v) = s_u s_v / (s_u + s_v) · Σ_{i ∈ U} (⟨x_i, x_u⟩ − ⟨x_i, x_v⟩)²
//! ```
//!
//! The surrogate replaces the neighbor sum by its expectation under an
//! isotropic, zero-mean neighborhood with unit variance:
//!
//! ```text
//! I*(u, v) = s_u s_v / (s_u + s_v) · |U| · ‖x_u − x_v‖²
//! ```

use crate::error::Result;
use crate::graph::{dot, squared_distance, CoarseningState, NodeId};
use crate::graph::{for_each_union, intersection_count};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Exact,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceScore {
    pub value: f64,
    pub kind: ScoreKind,
}

/// `s_u s_v / (s_u + s_v)`.
#[inline]
pub fn edge_weight_factor(s_u: u32, s_v: u32) -> f64 {
    let (a, b) = (s_u as f64, s_v as f64);
    a * b / (a + b)
}

/// Exact interference of merging the live edge `(u, v)`.
pub fn interference_exact(
    state: &CoarseningState,
    u: NodeId,
    v: NodeId,
) -> Result<InterferenceScore> {
    state.check_live_edge(u, v)?;
    let mut scratch = Vec::new();
    Ok(InterferenceScore {
        value: exact_unchecked(state, u, v, &mut scratch),
        kind: ScoreKind::Exact,
    })
}

/// Evaluates the index through the feature difference `δ = x_u − x_v`, so each
/// neighbor costs one dot product: `⟨x_i, x_u⟩ − ⟨x_i, x_v⟩ = ⟨x_i, δ⟩`.
pub(crate) fn exact_unchecked(
    state: &CoarseningState,
    u: NodeId,
    v: NodeId,
    delta: &mut Vec<f64>,
) -> f64 {
    delta.clear();
    delta.extend(
        state
            .features(u)
            .iter()
            .zip(state.features(v))
            .map(|(a, b)| a - b),
    );
    let mut total = 0.0;
    for_each_union(state.neighbors(u), state.neighbors(v), |i| {
        if i != u && i != v {
            let p = dot(state.features(i), delta);
            total += p * p;
        }
    });
    edge_weight_factor(state.size(u), state.size(v)) * total
}

/// The index before simplification: builds the merged row explicitly and sums
/// `s_u (s_iu − s_iw)² + s_v (s_iv − s_iw)²` over the combined neighborhood.
/// Kept as an independent route to cross-check [`interference_exact`].
pub fn interference_unsimplified(
    state: &CoarseningState,
    u: NodeId,
    v: NodeId,
) -> Result<InterferenceScore> {
    state.check_live_edge(u, v)?;
    let (su, sv) = (state.size(u) as f64, state.size(v) as f64);
    let merged: Vec<f64> = state
        .features(u)
        .iter()
        .zip(state.features(v))
        .map(|(a, b)| (su * a + sv * b) / (su + sv))
        .collect();
    let mut total = 0.0;
    for_each_union(state.neighbors(u), state.neighbors(v), |i| {
        if i != u && i != v {
            let xi = state.features(i);
            let s_iu = dot(xi, state.features(u));
            let s_iv = dot(xi, state.features(v));
            let s_iw = dot(xi, &merged);
            total += su * (s_iu - s_iw).powi(2) + sv * (s_iv - s_iw).powi(2);
        }
    });
    Ok(InterferenceScore {
        value: total,
        kind: ScoreKind::Exact,
    })
}

/// Expected interference of merging the live edge `(u, v)`.
pub fn expected_interference(
    state: &CoarseningState,
    u: NodeId,
    v: NodeId,
) -> Result<InterferenceScore> {
    state.check_live_edge(u, v)?;
    Ok(InterferenceScore {
        value: expected_unchecked(state, u, v),
        kind: ScoreKind::Surrogate,
    })
}

/// `deg u + deg v − |N_u ∩ N_v| − 2`, which is `|(N_u ∪ N_v) \ {u, v}|` when
/// `u` and `v` are adjacent. Clamped at zero.
#[inline]
pub(crate) fn structural_count(state: &CoarseningState, u: NodeId, v: NodeId) -> f64 {
    let shared = intersection_count(state.neighbors(u), state.neighbors(v));
    let raw = state.degree(u) as i64 + state.degree(v) as i64 - shared as i64 - 2;
    raw.max(0) as f64
}

#[inline]
pub(crate) fn expected_unchecked(state: &CoarseningState, u: NodeId, v: NodeId) -> f64 {
    let feat = squared_distance(state.features(u), state.features(v));
    if feat == 0.0 {
        return 0.0;
    }
    edge_weight_factor(state.size(u), state.size(v)) * structural_count(state, u, v) * feat
}

/// Cosine similarity, with zero-norm vectors scoring 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Fills the sum-square cache: `Σ[i] = Σ_{k ∈ N_i} ⟨x_k, x_i⟩²` for every live id.
pub fn init_sumsq_cache(state: &mut CoarseningState) {
    let ids: Vec<NodeId> = state.active_ids().collect();
    for i in ids {
        state.sumsq[i as usize] = sumsq_from_scratch(state, i);
    }
}

/// `Σ_{k ∈ N_i} ⟨x_k, x_i⟩²` over the current neighbor list of `i`.
pub fn sumsq_from_scratch(state: &CoarseningState, i: NodeId) -> f64 {
    let xi = state.features(i);
    state
        .neighbors(i)
        .iter()
        .map(|&k| dot(state.features(k), xi).powi(2))
        .sum()
}

/// Incremental cache maintenance after `merge_pair(u, v) -> w`.
///
/// Sets `Σ[w]` from its new neighborhood and corrects each neighbor `k` by
/// `⟨x_k, x_w⟩² − [k ∈ N_u]⟨x_k, x_u⟩² − [k ∈ N_v]⟨x_k, x_v⟩²`. Requires the
/// retired lists of `u` and `v` to still be present.
pub fn cache_update_after_merge(state: &mut CoarseningState, w: NodeId, u: NodeId, v: NodeId) {
    let mut own = 0.0;
    for idx in 0..state.neighbors(w).len() {
        let k = state.neighbors(w)[idx];
        let xk = state.features(k);
        let pw = dot(xk, state.features(w));
        let pw2 = pw * pw;
        own += pw2;
        let mut eps = pw2;
        if state.is_adjacent(u, k) {
            eps -= dot(xk, state.features(u)).powi(2);
        }
        if state.is_adjacent(v, k) {
            eps -= dot(xk, state.features(v)).powi(2);
        }
        state.sumsq[k as usize] += eps;
    }
    state.sumsq[w as usize] = own;
}
