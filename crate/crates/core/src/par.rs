//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan work out over the
//! rayon pool. Without it, or inside [`with_execution`] with
//! [`Execution::Sequential`], they run on the calling thread. Every helper
//! returns results in index order, so output never depends on scheduling.

use std::cell::Cell;

/// Execution strategy for the data-parallel inner loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

thread_local! {
    static MODE: Cell<Execution> = const { Cell::new(Execution::Parallel) };
}

/// Strategy in effect on the current thread.
pub fn current() -> Execution {
    if cfg!(feature = "parallel") {
        MODE.with(Cell::get)
    } else {
        Execution::Sequential
    }
}

/// Run `f` with `mode` as the strategy for the calling thread.
///
/// Sequential mode keeps every nested helper on this thread, so the whole
/// call tree below `f` runs single-threaded.
pub fn with_execution<R>(mode: Execution, f: impl FnOnce() -> R) -> R {
    struct Restore(Execution);
    impl Drop for Restore {
        fn drop(&mut self) {
            MODE.with(|m| m.set(self.0));
        }
    }
    let _restore = Restore(MODE.with(|m| m.replace(mode)));
    f()
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if current() == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if current() == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Fill `out` row by row; `f(row_index, row)` writes one row of `width` items.
pub fn for_each_row<T, F>(out: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if current() == Execution::Parallel {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| f(y, row));
        return;
    }
    out.chunks_mut(width).enumerate().for_each(|(y, row)| f(y, row));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let par = map_range(1000, |i| i * i);
        let seq = with_execution(Execution::Sequential, || map_range(1000, |i| i * i));
        assert_eq!(par, seq);
    }

    #[test]
    fn mode_is_restored() {
        with_execution(Execution::Sequential, || {
            if cfg!(feature = "parallel") {
                assert_eq!(MODE.with(Cell::get), Execution::Sequential);
            }
        });
        assert_eq!(MODE.with(Cell::get), Execution::Parallel);
    }

    #[test]
    fn rows_are_written_in_place() {
        let mut buf = vec![0usize; 12];
        for_each_row(&mut buf, 4, |y, row| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = y * 10 + x;
            }
        });
        assert_eq!(buf[5], 11);
        assert_eq!(buf[11], 23);
    }
}
