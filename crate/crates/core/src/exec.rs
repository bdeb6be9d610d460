//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the loops run on rayon; without it
//! they run sequentially with identical results. Reductions over floats are
//! chunked with a fixed chunk size and summed in canonical order, so the
//! outcome is bit-identical at any worker count.

/// Map `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sequential version, kept unconditionally for benchmarking against the
/// parallel path.
pub fn indexed_map_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Fixed chunk size for deterministic float reductions.
pub const SUM_CHUNK: usize = 4096;

/// Sum `f(range)` over `0..n` split into fixed-size chunks.
///
/// Partial sums are produced per chunk and added left to right, so the
/// floating-point result does not depend on the number of workers.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(SUM_CHUNK);
    let partials = indexed_map(chunks, |c| {
        let lo = c * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(n);
        f(lo..hi)
    });
    partials.iter().sum()
}
