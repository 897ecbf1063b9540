//! Parallel/sequential execution switch.
//!
//! Every helper returns results in input order so that reductions are
//! deterministic regardless of the execution path.

use std::sync::atomic::{AtomicBool, Ordering};

static SERIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential code path for all subsequent calls.
pub fn set_serial(serial: bool) {
    SERIAL.store(serial, Ordering::SeqCst);
}

/// True when work is dispatched to rayon.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !SERIAL.load(Ordering::SeqCst)
}

/// Map `f` over `0..n`, returning results in index order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Map `f` over a slice, returning results in input order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Run `f` under a fixed execution mode, restoring the previous
/// mode afterwards. Used by benches and tests that compare both paths.
pub fn with_mode<R>(serial: bool, f: impl FnOnce() -> R) -> R {
    let prev = SERIAL.swap(serial, Ordering::SeqCst);
    let out = f();
    SERIAL.store(prev, Ordering::SeqCst);
    out
}
