//! Per-thread instrumentation of dense factorizations and solver-path
//! allocations.
//!
//! Counters are recorded only while a [`Probe`] is active on the current
//! thread, so the bookkeeping costs one thread-local lookup otherwise.

use std::cell::RefCell;

/// What the instrumented code did while a probe was active.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    /// Dimension of every square matrix factorized, in call order.
    pub factorizations: Vec<usize>,
    /// Number of `f64` slots allocated through instrumented buffers.
    pub floats_allocated: usize,
}

impl Counters {
    pub fn largest_factorization(&self) -> usize {
        self.factorizations.iter().copied().max().unwrap_or(0)
    }
}

thread_local! {
    static ACTIVE: RefCell<Option<Counters>> = const { RefCell::new(None) };
}

/// Scoped recorder; dropping it without calling [`Probe::finish`] discards
/// the counters.
#[must_use]
pub struct Probe(());

impl Probe {
    pub fn start() -> Self {
        ACTIVE.with(|c| *c.borrow_mut() = Some(Counters::default()));
        Probe(())
    }

    pub fn finish(self) -> Counters {
        ACTIVE.with(|c| c.borrow_mut().take()).unwrap_or_default()
    }
}

impl Drop for Probe {
    fn drop(&mut self) {
        ACTIVE.with(|c| c.borrow_mut().take());
    }
}

pub(crate) fn factorization(dim: usize) {
    ACTIVE.with(|c| {
        if let Some(c) = c.borrow_mut().as_mut() {
            c.factorizations.push(dim);
        }
    });
}

pub(crate) fn alloc(floats: usize) {
    ACTIVE.with(|c| {
        if let Some(c) = c.borrow_mut().as_mut() {
            c.floats_allocated += floats;
        }
    });
}

/// `vec![0.0; len]`, counted.
pub(crate) fn zeros(len: usize) -> Vec<f64> {
    alloc(len);
    vec![0.0; len]
}

/// Dense `rows × cols` zero matrix, counted.
pub(crate) fn zeros_mat(rows: usize, cols: usize) -> faer::Mat<f64> {
    alloc(rows * cols);
    faer::Mat::zeros(rows, cols)
}
