use crate::error::{Error, Result};
use crate::num::{lit, Real};

/// Uniform vertex-centered opinion grid: `cells + 1` nodes from `lo` to `hi`.
///
/// Node `i` owns the control volume `[φ_i − Δφ/2, φ_i + Δφ/2]` clipped to the
/// domain, so the control volumes are exactly the trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpinionGrid<T> {
    pub lo: T,
    pub dx: T,
    pub cells: usize,
}

impl<T: Real> OpinionGrid<T> {
    pub fn new(lo: T, hi: T, cells: usize) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidParam(format!("grid needs at least 4 cells, got {cells}")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParam("grid bounds must be finite with lo < hi".into()));
        }
        Ok(OpinionGrid { lo, dx: (hi - lo) / lit(cells as f64), cells })
    }

    /// Grid on `[center − half_width, center + half_width]`.
    pub fn centered(center: T, half_width: T, cells: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, cells)
    }

    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hi(&self) -> T {
        self.node(self.cells)
    }

    pub fn node(&self, i: usize) -> T {
        self.lo + self.dx * lit(i as f64)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weight(&self, i: usize) -> T {
        if i == 0 || i == self.cells {
            self.dx * lit(0.5)
        } else {
            self.dx
        }
    }

    pub fn weights(&self) -> Vec<T> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Trapezoid integral of node values.
    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        let inner: T = values[1..self.cells].iter().copied().sum();
        (inner + (values[0] + values[self.cells]) * lit(0.5)) * self.dx
    }

    /// The same grid translated by `k` cells.
    pub fn shifted(&self, k: i64) -> Self {
        OpinionGrid { lo: self.lo + self.dx * lit(k as f64), ..*self }
    }
}
