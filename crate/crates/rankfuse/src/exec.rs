//! Chunked execution helpers behind the `parallel` feature.
//!
//! Every data-parallel loop in this crate maps over fixed-size chunks and
//! folds the per-chunk results in chunk order. The summation tree therefore
//! depends only on the chunk size, never on thread count or work stealing,
//! so the parallel and sequential builds produce bit-identical floats.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Default chunk length for per-instance loops.
pub(crate) const CHUNK: usize = 1024;

/// Map `f` over fixed-size chunks of `items`, preserving chunk order.
pub(crate) fn map_chunks<T, R, F>(items: &[T], chunk_len: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    {
        items.par_chunks(chunk_len).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.chunks(chunk_len).map(f).collect()
    }
}

/// Map `f` over `0..n`, collecting results in index order.
pub(crate) fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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
