//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! on the calling thread. Output order and reduction order are identical in
//! both modes, so results are bit-identical regardless of thread count.

/// Rows per block for chunked reductions. Fixed so partial sums never depend
/// on how many threads are available.
pub const REDUCTION_CHUNK: usize = 256;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Splits `0..n` into fixed [`REDUCTION_CHUNK`] blocks, maps each block to a
/// partial result and returns the partials in block order.
pub fn map_chunks<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(std::ops::Range<usize>) -> R + Send + Sync,
{
    let blocks = n.div_ceil(REDUCTION_CHUNK);
    map_range(blocks, |b| {
        let start = b * REDUCTION_CHUNK;
        f(start..(start + REDUCTION_CHUNK).min(n))
    })
}

/// Order-preserving flat map over `0..n`.
pub fn flat_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> Vec<R> + Send + Sync,
{
    map_range(n, f).into_iter().flatten().collect()
}
