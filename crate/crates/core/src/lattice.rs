//! Uniform Cartesian lattices and central-difference stencils on them.

use crate::error::{GrowthError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    origin: Vec<f64>,
    spacing: f64,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(origin: Vec<f64>, spacing: f64, counts: Vec<usize>) -> Result<Self> {
        if origin.len() != counts.len() || origin.is_empty() || origin.len() > 3 {
            return Err(GrowthError::Configuration(format!(
                "lattice needs 1 to 3 axes with matching origin, got {} and {}",
                origin.len(),
                counts.len()
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(GrowthError::Configuration(format!("lattice spacing {spacing} must be positive")));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(GrowthError::Configuration("lattice needs at least 2 nodes per axis".into()));
        }
        let mut strides = vec![1; counts.len()];
        for k in (0..counts.len() - 1).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Ok(Self { origin, spacing, counts, strides })
    }

    /// Cube `[lo, hi]^dim` with `n` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(GrowthError::Configuration(format!(
                "cube lattice needs hi > lo and n >= 2 (got [{lo}, {hi}], n = {n})"
            )));
        }
        Self::new(vec![lo; dim], (hi - lo) / (n - 1) as f64, vec![n; dim])
    }

    /// Box with lower corner `lo`, spacing `h`, reaching at least `hi` on every axis.
    pub fn boxed(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let counts = lo.iter().zip(hi).map(|(a, b)| ((b - a) / h).round() as usize + 1).collect();
        Self::new(lo.to_vec(), h, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let i = flat / s;
                flat %= s;
                i
            })
            .collect()
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        self.multi(flat).iter().zip(&self.origin).map(|(&i, o)| o + self.spacing * i as f64).collect()
    }

    /// Distance (in nodes) from `flat` to the nearest boundary face.
    pub fn margin(&self, flat: usize) -> usize {
        self.multi(flat).iter().zip(&self.counts).map(|(&i, &n)| i.min(n - 1 - i)).min().unwrap_or(0)
    }

    /// Flat indices of nodes at least `margin` nodes from every face, in order.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.margin(k) >= margin).collect()
    }

    /// Neighbour `offset` nodes along `axis`; caller guarantees it exists.
    pub fn shift(&self, flat: usize, axis: usize, offset: isize) -> usize {
        (flat as isize + offset * self.strides[axis] as isize) as usize
    }

    pub fn min_count(&self) -> usize {
        *self.counts.iter().min().unwrap()
    }

    /// Every other node, when all counts are odd.
    pub fn coarsen(&self) -> Option<Lattice> {
        if self.counts.iter().any(|&c| c % 2 == 0 || c < 3) {
            return None;
        }
        Lattice::new(self.origin.clone(), 2.0 * self.spacing, self.counts.iter().map(|c| c.div_ceil(2)).collect()).ok()
    }

    /// Fine-lattice index of a node of `self.coarsen()`.
    pub fn fine_of_coarse(&self, coarse: &Lattice, flat: usize) -> usize {
        let idx: Vec<usize> = coarse.multi(flat).iter().map(|i| 2 * i).collect();
        self.flat(&idx)
    }

    pub fn require_min_nodes(&self, n: usize, what: &str) -> Result<()> {
        if self.min_count() < n {
            return Err(GrowthError::Configuration(format!(
                "{what} needs at least {n} nodes per axis, lattice has {:?}",
                self.counts
            )));
        }
        Ok(())
    }
}

/// Central-difference order for first derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdScheme {
    /// Three-point stencil, O(h²).
    #[default]
    Second,
    /// Five-point stencil (Richardson-extrapolated central difference), O(h⁴).
    Fourth,
}

impl FdScheme {
    pub fn half_width(self) -> usize {
        match self {
            FdScheme::Second => 1,
            FdScheme::Fourth => 2,
        }
    }

    /// (offset, weight) pairs; the derivative is Σ w f(x + o h) / h.
    pub fn first_derivative(self) -> &'static [(isize, f64)] {
        match self {
            FdScheme::Second => &[(-1, -0.5), (1, 0.5)],
            FdScheme::Fourth => &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let l = Lattice::new(vec![0.0, 1.0, -1.0], 0.5, vec![3, 4, 5]).unwrap();
        for k in 0..l.len() {
            assert_eq!(l.flat(&l.multi(k)), k);
        }
        assert_eq!(l.coords(l.flat(&[2, 1, 4])), vec![1.0, 1.5, 1.0]);
        assert_eq!(l.interior(1).len(), 6);
        let k = l.flat(&[1, 1, 1]);
        assert_eq!(l.multi(l.shift(k, 2, 1)), vec![1, 1, 2]);
        assert_eq!(l.multi(l.shift(k, 0, -1)), vec![0, 1, 1]);
    }

    #[test]
    fn coarsening_keeps_even_nodes() {
        let l = Lattice::cube(2, 0.0, 1.0, 9).unwrap();
        let c = l.coarsen().unwrap();
        assert_eq!(c.counts(), &[5, 5]);
        assert_eq!(l.coords(l.fine_of_coarse(&c, c.flat(&[2, 3]))), vec![0.5, 0.75]);
        assert!(Lattice::cube(2, 0.0, 1.0, 8).unwrap().coarsen().is_none());
    }
}
