use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_i, hi_i]` in R^D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self { lo: vec![a], hi: vec![b] }
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Self {
            lo: vec![lo, lo],
            hi: vec![hi, hi],
        }
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo.is_empty() || self.lo.len() != self.hi.len() {
            return Err(Error::Config(format!(
                "box bounds must be nonempty and of equal length (got {} and {})",
                self.lo.len(),
                self.hi.len()
            )));
        }
        if self
            .lo
            .iter()
            .zip(&self.hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::Config(format!(
                "box bounds must be finite with lo < hi: {:?} .. {:?}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    /// Coordinate of lattice node `i` of `resolution` nodes along `axis`.
    /// Every lattice in the crate is built through this function so that
    /// node coordinates are reproduced bit-for-bit.
    #[inline]
    pub fn node(&self, axis: usize, i: usize, resolution: usize) -> f64 {
        let h = self.side(axis) / (resolution - 1) as f64;
        self.lo[axis] + i as f64 * h
    }

    /// Midpoint of cell `i` of `cells` equal cells along `axis`.
    #[inline]
    pub fn cell_mid(&self, axis: usize, i: usize, cells: usize) -> f64 {
        let h = self.side(axis) / cells as f64;
        self.lo[axis] + (i as f64 + 0.5) * h
    }

    pub fn contains_open(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&a, &b))| x > a && x < b)
    }

    pub fn contains_closed(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&a, &b))| x >= a && x <= b)
    }

    /// The box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.lo.iter().map(|a| a + margin).collect(),
            self.hi.iter().map(|b| b - margin).collect(),
        )
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }
}
