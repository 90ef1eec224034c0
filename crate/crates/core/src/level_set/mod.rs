//! Empirical side: what a single realization actually does on a box.
//!
//! Root sets for `D = d`, nodal curves for `D = 2, d = 1`, the Kac window
//! counter, local time, the near-irregularity scan and weighted sums over
//! level sets. Every operation is a pure function of one realization.

mod grid;
mod marching;
pub(crate) mod occupation;
mod roots;

pub use grid::GridSample;
pub use marching::nodal_length;
pub use occupation::{irregularity_scan, kac_counter, local_time, unit_ball_volume, IrregularityScan};
pub use roots::{count_roots_1d, count_roots_2d, winding_root_count};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integral_geometry::Polyline;
use crate::SCHEMA_VERSION;

/// Default points per axis in one dimension.
pub const DEFAULT_GRID_1D: usize = 2048;
/// Default points per axis in two dimensions.
pub const DEFAULT_GRID_2D: usize = 512;
/// Residual tolerance for refined one-dimensional roots.
pub const ROOT_TOL_1D: f64 = 1e-10;
/// Residual tolerance for Newton roots in the plane.
pub const ROOT_TOL_2D: f64 = 1e-9;
/// Newton iteration cap used when callers have no preference.
pub const DEFAULT_NEWTON_ITERS: usize = 60;

/// One solution of `X(t) = u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub location: Vec<f64>,
    /// Normal Jacobian `|det X'(t)|` at the root.
    pub delta: f64,
    /// `‖X(t) − u‖` after refinement.
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub dim: usize,
    pub roots: Vec<Root>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn locations(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.roots.iter().map(|r| r.location.as_slice())
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.roots.iter().enumerate() {
            for b in &self.roots[i + 1..] {
                best = best.min(dist(&a.location, &b.location));
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["schema_version".to_string(), "root".to_string()];
        header.extend((0..self.dim).map(|k| format!("t{k}")));
        header.extend(["delta".to_string(), "residual".to_string()]);
        wr.write_record(&header)?;
        for (i, r) in self.roots.iter().enumerate() {
            let mut rec = vec![SCHEMA_VERSION.to_string(), i.to_string()];
            rec.extend(r.location.iter().map(|x| x.to_string()));
            rec.extend([r.delta.to_string(), r.residual.to_string()]);
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// A level curve of a planar scalar field as a polyline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelCurve {
    pub level: f64,
    pub polyline: Polyline,
    /// `|∇X|` at the midpoint of every segment, in `Polyline::segments` order.
    pub segment_delta: Vec<f64>,
}

impl LevelCurve {
    pub fn length(&self) -> f64 {
        self.polyline.length()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["schema_version", "segment", "x0", "y0", "x1", "y1", "delta"])?;
        for (i, ((a, b), d)) in self
            .polyline
            .segments()
            .zip(&self.segment_delta)
            .enumerate()
        {
            wr.write_record([
                SCHEMA_VERSION.to_string(),
                i.to_string(),
                a[0].to_string(),
                a[1].to_string(),
                b[0].to_string(),
                b[1].to_string(),
                d.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// A level set that can be integrated against a weight.
pub trait LevelSetMeasure {
    /// `Σ_roots w(t)` for point sets, `∫ w dσ` for curves.
    fn weighted_sum(&self, weight: &dyn Fn(&[f64]) -> f64) -> f64;
}

impl LevelSetMeasure for RootSet {
    fn weighted_sum(&self, weight: &dyn Fn(&[f64]) -> f64) -> f64 {
        self.roots.iter().map(|r| weight(&r.location)).sum()
    }
}

impl LevelSetMeasure for LevelCurve {
    fn weighted_sum(&self, weight: &dyn Fn(&[f64]) -> f64) -> f64 {
        self.polyline
            .segments()
            .map(|(a, b)| {
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                (b[0] - a[0]).hypot(b[1] - a[1]) * weight(&mid)
            })
            .sum()
    }
}

/// Sum of `weight` over a root set, or its integral along a level curve
/// by per-segment midpoint evaluation. The weight is expected to be
/// nonnegative.
pub fn weighted_root_sum<S: LevelSetMeasure + ?Sized>(
    set: &S,
    weight: impl Fn(&[f64]) -> f64,
) -> f64 {
    set.weighted_sum(&weight)
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
