//! Pluggable data-parallel execution for per-pixel kernels.
//!
//! Kernels receive a contiguous run of whole items (pixels) plus the index of
//! the first item, and must compute each item independently of the
//! partition. That is what makes results bit-identical across executors.

/// Runs a kernel over disjoint runs of items.
pub trait Executor: Sync {
    /// Splits `data` into runs of whole items (`item_len` elements each) and
    /// calls `kernel(first_item, run)` for every run.
    fn for_each_chunk<T, F>(&self, data: &mut [T], item_len: usize, kernel: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send;
}

/// Single-threaded executor: one run covering everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn for_each_chunk<T, F>(&self, data: &mut [T], item_len: usize, kernel: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        debug_assert!(item_len > 0 && data.len() % item_len == 0);
        kernel(0, data);
    }
}
