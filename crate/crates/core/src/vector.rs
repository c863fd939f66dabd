//! Dense vector kernels shared by every module.
//!
//! All similarity computations in the crate go through [`dot`] and
//! [`cosine_with_norms`], so two code paths scoring the same pair always
//! produce bit-identical values.

use std::cmp::Ordering;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity from precomputed norms. A zero norm gives 0.
#[inline]
pub fn cosine_with_norms(a: &[f64], norm_a: f64, b: &[f64], norm_b: f64) -> f64 {
    let denom = norm_a * norm_b;
    if denom == 0.0 {
        0.0
    } else {
        dot(a, b) / denom
    }
}

#[inline]
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, norm(a), b, norm(b))
}

const PAIRWISE_BLOCK: usize = 8;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        values.iter().sum()
    } else {
        let (lo, hi) = values.split_at(values.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Ordering for ranked results: higher score first, then lower id.
#[inline]
pub fn by_score_then_id(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Keeps the `k` best `(score, id)` entries, sorted by [`by_score_then_id`].
pub fn top_k(mut scored: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k == 0 {
        return Vec::new();
    }
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, |a, b| by_score_then_id(*a, *b));
        scored.truncate(k);
    }
    scored.sort_unstable_by(|a, b| by_score_then_id(*a, *b));
    scored
}
