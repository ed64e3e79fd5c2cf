//! Data-parallel map helpers used by the hot loops (ensemble stepping, kernel
//! density sums, per-point field maps).
//!
//! With the `parallel` feature (default) the maps run on the rayon global pool;
//! without it they compile to plain sequential loops. A runtime switch lets a
//! single build (e.g. the criterion benches) compare both paths. All helpers
//! are order-preserving indexed maps, so results are bit-identical regardless
//! of the execution mode.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL_ENABLED: AtomicBool = AtomicBool::new(true);

/// Enable or disable the rayon path at runtime. No effect without the
/// `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL_ENABLED.store(enabled, Ordering::Relaxed);
}

/// True when the rayon path is compiled in and currently enabled.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL_ENABLED.load(Ordering::Relaxed)
}

/// `(0..len).map(f)` collected in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    (0..len).map(f).collect()
}

/// Apply `f(i, &mut items[i])` to every element.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Apply `f(i, chunk)` to every contiguous chunk of `width` elements.
/// The slice length must be a multiple of `width`.
pub fn for_each_chunk_mut<T, F>(items: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    debug_assert_eq!(items.len() % width.max(1), 0);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        items
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    items.chunks_mut(width).enumerate().for_each(|(i, c)| f(i, c));
}

/// Scoped sequential section: disables the rayon path inside `f`, restoring
/// the previous mode afterwards. Used by the benches.
pub fn run_sequential<R>(f: impl FnOnce() -> R) -> R {
    let before = PARALLEL_ENABLED.swap(false, Ordering::Relaxed);
    let out = f();
    PARALLEL_ENABLED.store(before, Ordering::Relaxed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(1000, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }

    #[test]
    fn sequential_scope_matches_parallel() {
        let a = map_indexed(257, |i| (i as f64).sin());
        let b = run_sequential(|| map_indexed(257, |i| (i as f64).sin()));
        assert_eq!(a, b);
    }

    #[test]
    fn chunked_map_visits_every_chunk() {
        let mut buf = vec![0usize; 12];
        for_each_chunk_mut(&mut buf, 3, |i, c| c.iter_mut().for_each(|x| *x = i));
        assert_eq!(buf, [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]);
    }
}
