//! Deterministic data-parallel reductions.
//!
//! Work is split into fixed-size chunks, each chunk is folded sequentially,
//! and the per-chunk results are combined with a balanced binary tree whose
//! shape depends only on the number of chunks. The floating-point result is
//! therefore identical for any rayon worker count.

use rayon::prelude::*;

/// Number of quadrature points folded sequentially per task.
pub const CHUNK_LEN: usize = 512;

/// Maps every chunk of `items` in parallel and returns the results in chunk order.
pub fn map_chunks<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    items.par_chunks(CHUNK_LEN).map(f).collect()
}

/// Combines `parts` pairwise: ((p0 p1) (p2 p3)) ... , left to right at each level.
pub fn tree_reduce<R, F>(mut parts: Vec<R>, combine: F) -> Option<R>
where
    F: Fn(R, R) -> R,
{
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop()
}

/// Deterministic sum of `f` over `items`.
pub fn sum_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    let parts = map_chunks(items, |chunk| chunk.iter().map(&f).sum::<f64>());
    tree_reduce(parts, |a, b| a + b).unwrap_or(0.0)
}

/// Elementwise `acc += other`.
pub fn add_into(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}
