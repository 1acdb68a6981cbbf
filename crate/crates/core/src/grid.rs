//! Uniform time grid and the composite-trapezoid weights used by every
//! discretized integral in the crate.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nodes `t_k = k·h` for `k = 0..=n`; horizon `T = n·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    h: T,
    n: usize,
}

impl<T: Real> TimeGrid<T> {
    /// Grid with step `h` and `n` steps. `n` must be even (the propagator
    /// steps by `2h`) and at least 4 (trapezoid weights degenerate below).
    pub fn new(h: T, n: usize) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive and finite, got {h}")));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 steps, got {n}")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("step count must be even, got {n}")));
        }
        Ok(Self { h, n })
    }

    /// Grid covering `[0, horizon]` with `n` steps.
    pub fn with_horizon(horizon: T, n: usize) -> Result<Self> {
        if !(horizon > T::zero()) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        Self::new(horizon / T::from_usize_lossy(n.max(1)), n)
    }

    #[inline]
    pub fn step(&self) -> T {
        self.h
    }

    /// Number of steps `N`; there are `N + 1` nodes.
    #[inline]
    pub fn steps(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.h
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.time(self.n)
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.n).map(|k| self.time(k)).collect()
    }

    /// Same horizon, twice the resolution.
    pub fn refined(&self) -> Self {
        Self { h: self.h / T::lit(2.0), n: 2 * self.n }
    }

    pub(crate) fn ensure_same(&self, other: &Self) -> Result<()> {
        if self.n == other.n && self.h == other.h {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: (self.h.as_f64(), self.n),
                found: (other.h.as_f64(), other.n),
            })
        }
    }
}

/// Weight of node `k` in the composite trapezoid rule over nodes `lo..=hi`.
/// An empty range (`lo == hi`) has all weights zero.
#[inline]
pub fn trapezoid_weight<T: Real>(h: T, lo: usize, hi: usize, k: usize) -> T {
    debug_assert!(lo <= k && k <= hi);
    if lo == hi {
        T::zero()
    } else if k == lo || k == hi {
        h / T::lit(2.0)
    } else {
        h
    }
}

/// Composite trapezoid weights for nodes `0..=hi`.
pub fn trapezoid_weights<T: Real>(h: T, hi: usize) -> Vec<T> {
    (0..=hi).map(|k| trapezoid_weight(h, 0, hi, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_grids() {
        assert!(TimeGrid::<f64>::new(0.1, 2).is_err());
        assert!(TimeGrid::<f64>::new(0.1, 5).is_err());
        assert!(TimeGrid::<f64>::new(0.0, 10).is_err());
        assert!(TimeGrid::<f64>::new(-0.1, 10).is_err());
        assert!(TimeGrid::<f64>::new(0.1, 4).is_ok());
    }

    #[test]
    fn horizon_and_refinement() {
        let g = TimeGrid::<f64>::with_horizon(4.0, 400).unwrap();
        assert!((g.step() - 0.01).abs() < 1e-15);
        assert_eq!(g.nodes(), 401);
        let r = g.refined();
        assert_eq!(r.steps(), 800);
        assert!((r.horizon() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_integrates_linear_exactly() {
        let h = 0.25;
        let w = trapezoid_weights(h, 8);
        let s: f64 = w.iter().enumerate().map(|(k, wk)| wk * (3.0 * k as f64 * h + 1.0)).sum();
        // ∫_0^2 (3t + 1) dt = 8
        assert!((s - 8.0).abs() < 1e-14);
        assert_eq!(trapezoid_weight(h, 3, 3, 3), 0.0);
    }
}
