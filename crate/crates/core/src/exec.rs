//! Execution helpers: rayon when the `parallel` feature is on, plain loops
//! otherwise. Reductions are chunked with a fixed block size in both modes so
//! the result is independent of the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub(crate) const CHUNK: usize = 2048;

/// Map `f` over `0..len` into a Vec.
#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).map(f).collect()
}

fn chunk_ranges(len: usize) -> Vec<(usize, usize)> {
    (0..len)
        .step_by(CHUNK.max(1))
        .map(|lo| (lo, (lo + CHUNK).min(len)))
        .collect()
}

/// Sum `f(i)` over `0..len`. Partial sums are taken per fixed chunk and
/// combined in chunk order, so the rounding pattern matches the sequential
/// build exactly.
pub(crate) fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partial = |(lo, hi): (usize, usize)| -> f64 { (lo..hi).map(&f).sum() };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = chunk_ranges(len).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = chunk_ranges(len).into_iter().map(partial).collect();
    parts.iter().sum()
}

/// Minimise `f(i)` over `0..len`, returning the value and its index.
/// Ties go to the smaller index.
pub(crate) fn min_indexed<F>(len: usize, f: F) -> Option<(f64, usize)>
where
    F: Fn(usize) -> f64 + Sync,
{
    if len == 0 {
        return None;
    }
    let partial = |(lo, hi): (usize, usize)| -> (f64, usize) {
        let mut best = (f(lo), lo);
        for i in lo + 1..hi {
            let v = f(i);
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, usize)> = chunk_ranges(len).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, usize)> = chunk_ranges(len).into_iter().map(partial).collect();
    parts
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
}

/// Chunked minimisation with per-chunk scratch state (for samplers that reuse
/// buffers). Deterministic: chunks are fixed and combined in order.
pub(crate) fn min_indexed_with<S, I, F>(len: usize, init: I, f: F) -> Option<(f64, usize)>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize) -> f64 + Sync,
{
    if len == 0 {
        return None;
    }
    let partial = |(lo, hi): (usize, usize)| -> (f64, usize) {
        let mut state = init();
        let mut best = (f(&mut state, lo), lo);
        for i in lo + 1..hi {
            let v = f(&mut state, i);
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<(f64, usize)> = chunk_ranges(len).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(f64, usize)> = chunk_ranges(len).into_iter().map(partial).collect();
    parts
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
}
