//! Map helpers that run on rayon when the `parallel` feature is enabled and
//! fall back to plain iterators otherwise.
//!
//! Every helper returns results in input order, so callers can reduce them
//! sequentially and stay deterministic regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `true` when the crate was built with the `parallel` feature.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Applies `f` to every index in `0..n` and collects the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Applies `f` to every element of `items` and collects the results in order.
pub fn map_slice<'a, S, T, F>(items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
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

/// Fallible variant of [`map_range`]; the first error in index order wins.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Splits `0..n` into `chunks` contiguous ranges of near-equal size.
///
/// The split depends only on `n` and `chunks`, never on the thread pool, so
/// per-chunk partial sums are reproducible.
pub fn fixed_chunks(n: usize, chunks: usize) -> Vec<std::ops::Range<usize>> {
    let chunks = chunks.max(1).min(n.max(1));
    let base = n / chunks;
    let extra = n % chunks;
    let mut out = Vec::with_capacity(chunks);
    let mut start = 0;
    for c in 0..chunks {
        let len = base + usize::from(c < extra);
        out.push(start..start + len);
        start += len;
    }
    out
}
