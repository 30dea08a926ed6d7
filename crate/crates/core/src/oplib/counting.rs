use std::sync::atomic::{AtomicUsize, Ordering};

use super::{LinearOperator, SvdOperator};

/// Snapshot of how many times each map of a [`Counted`] operator ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyCounts {
    pub forward: usize,
    pub adjoint: usize,
    pub left: usize,
    pub left_t: usize,
    pub right: usize,
    pub right_t: usize,
}

impl ApplyCounts {
    pub fn dense(&self) -> usize {
        self.forward + self.adjoint
    }

    pub fn factors(&self) -> usize {
        self.left + self.left_t + self.right + self.right_t
    }
}

/// Instrumented wrapper counting applications of each map.
pub struct Counted<A: ?Sized> {
    counters: [AtomicUsize; 6],
    inner: A,
}

impl<A> Counted<A> {
    pub fn new(inner: A) -> Self {
        Self { counters: Default::default(), inner }
    }
}

impl<A: ?Sized> Counted<A> {
    pub fn counts(&self) -> ApplyCounts {
        let c = |i: usize| self.counters[i].load(Ordering::Relaxed);
        ApplyCounts { forward: c(0), adjoint: c(1), left: c(2), left_t: c(3), right: c(4), right_t: c(5) }
    }

    pub fn reset(&self) {
        self.counters.iter().for_each(|c| c.store(0, Ordering::Relaxed));
    }

    fn bump(&self, i: usize) {
        self.counters[i].fetch_add(1, Ordering::Relaxed);
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for Counted<A> {
    fn rows(&self) -> usize {
        self.inner.rows()
    }
    fn cols(&self) -> usize {
        self.inner.cols()
    }
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.bump(0);
        self.inner.forward(x)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        self.bump(1);
        self.inner.adjoint(y)
    }
}

impl<A: SvdOperator + ?Sized> SvdOperator for Counted<A> {
    fn singular_values(&self) -> &[f64] {
        self.inner.singular_values()
    }
    fn left(&self, c: &[f64]) -> Vec<f64> {
        self.bump(2);
        self.inner.left(c)
    }
    fn left_t(&self, y: &[f64]) -> Vec<f64> {
        self.bump(3);
        self.inner.left_t(y)
    }
    fn right(&self, c: &[f64]) -> Vec<f64> {
        self.bump(4);
        self.inner.right(c)
    }
    fn right_t(&self, x: &[f64]) -> Vec<f64> {
        self.bump(5);
        self.inner.right_t(x)
    }
}
