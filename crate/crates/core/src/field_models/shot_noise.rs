use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{config_err, Field};
use crate::domain::BoxDomain;
use crate::error::{FieldError, Result};
use crate::rng::{stream_rng, Stream};

/// Compactly supported C¹ kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Kernel {
    /// `g(x) = (1 - ‖x/η‖²)²` on `‖x‖ < η`, zero elsewhere.
    Biweight { radius: f64 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Biweight { radius: 1.0 }
    }
}

impl Kernel {
    pub fn radius(&self) -> f64 {
        match *self {
            Kernel::Biweight { radius } => radius,
        }
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Kernel::Biweight { radius } => {
                let s = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                if s < 1.0 {
                    (1.0 - s) * (1.0 - s)
                } else {
                    0.0
                }
            }
        }
    }

    /// Writes `∇g(x)` into `grad` and returns `g(x)`.
    #[inline]
    pub fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match *self {
            Kernel::Biweight { radius } => {
                let r2 = radius * radius;
                let s = x.iter().map(|v| v * v).sum::<f64>() / r2;
                if s < 1.0 {
                    let c = -4.0 * (1.0 - s) / r2;
                    for (g, xi) in grad.iter_mut().zip(x) {
                        *g = c * xi;
                    }
                    (1.0 - s) * (1.0 - s)
                } else {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    0.0
                }
            }
        }
    }

    /// `∫ g` over R^dim.
    pub fn integral(&self, dim: usize) -> f64 {
        match *self {
            Kernel::Biweight { radius } => match dim {
                1 => radius * 16.0 / 15.0,
                _ => std::f64::consts::PI * radius * radius / 3.0,
            },
        }
    }

    /// `sup ‖∇g‖`.
    pub fn max_grad(&self) -> f64 {
        match *self {
            Kernel::Biweight { radius } => 8.0 / (3.0 * 3f64.sqrt() * radius),
        }
    }

    pub fn max_value(&self) -> f64 {
        1.0
    }
}

/// Law of the impulses β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Impulse {
    Uniform { lo: f64, hi: f64 },
}

impl Default for Impulse {
    fn default() -> Self {
        Impulse::Uniform { lo: 0.5, hi: 1.5 }
    }
}

impl Impulse {
    pub fn mean(&self) -> f64 {
        match *self {
            Impulse::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    #[inline]
    pub fn density(&self, b: f64) -> f64 {
        match *self {
            Impulse::Uniform { lo, hi } => {
                if b >= lo && b <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn max_density(&self) -> f64 {
        match *self {
            Impulse::Uniform { lo, hi } => 1.0 / (hi - lo),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match *self {
            Impulse::Uniform { lo, hi } => lo.abs().max(hi.abs()),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Impulse::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Impulse::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            _ => config_err("impulse law needs finite bounds lo < hi"),
        }
    }
}

/// `X(t) = Σ_i β_i g(t - τ_i)` driven by a homogeneous Poisson process on a
/// box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotNoiseModel {
    pub dim: usize,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub impulse: Impulse,
    /// Poisson points per unit volume.
    pub intensity: f64,
    /// Box carrying the Poisson points.
    pub domain: BoxDomain,
}

impl ShotNoiseModel {
    pub fn new(dim: usize, intensity: f64, domain: BoxDomain) -> Self {
        Self {
            dim,
            kernel: Kernel::default(),
            impulse: Impulse::default(),
            intensity,
            domain,
        }
    }

    /// Mean of `X(t)` away from the boundary (Campbell's formula).
    pub fn mean(&self) -> f64 {
        self.intensity * self.impulse.mean() * self.kernel.integral(self.dim)
    }

    /// The window at distance ≥ η from the Poisson domain boundary.
    pub fn interior(&self) -> Result<BoxDomain> {
        self.domain.shrink(self.kernel.radius())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return config_err("shot-noise dimension must be 1 or 2");
        }
        self.domain.validate()?;
        if self.domain.dim() != self.dim {
            return config_err("shot-noise domain dimension does not match `dim`");
        }
        let eta = self.kernel.radius();
        if !(eta.is_finite() && eta > 0.0) {
            return config_err("kernel radius must be positive");
        }
        if (0..self.dim).any(|i| self.domain.side(i) <= 2.0 * eta) {
            return config_err(format!(
                "shot-noise domain sides must exceed the kernel support 2η = {}",
                2.0 * eta
            ));
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return config_err("intensity must be finite and non-negative");
        }
        self.impulse.validate()
    }

    pub(super) fn sample(&self, seed: u64) -> Result<ShotNoiseRealization> {
        self.validate()?;
        let mut rng = stream_rng(seed, 0, Stream::Realization);
        let mean = self.intensity * self.domain.volume();
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| crate::error::Error::Config(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let mut pts: Vec<([f64; 2], f64)> = (0..count)
            .map(|_| {
                let mut p = [0.0; 2];
                for (i, x) in p.iter_mut().enumerate().take(self.dim) {
                    *x = self.domain.lo[i] + self.domain.side(i) * rng.random::<f64>();
                }
                let b = self.impulse.sample(&mut rng);
                (p, b)
            })
            .collect();
        pts.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        Ok(ShotNoiseRealization {
            dim: self.dim,
            kernel: self.kernel,
            domain: self.domain.clone(),
            points: pts.iter().map(|p| p.0).collect(),
            impulses: pts.iter().map(|p| p.1).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotNoiseRealization {
    dim: usize,
    kernel: Kernel,
    domain: BoxDomain,
    /// Sorted by first coordinate.
    points: Vec<[f64; 2]>,
    impulses: Vec<f64>,
}

impl ShotNoiseRealization {
    /// Builds a realization from explicit points and impulses.
    pub fn from_points(
        dim: usize,
        kernel: Kernel,
        domain: BoxDomain,
        points: Vec<[f64; 2]>,
        impulses: Vec<f64>,
    ) -> Self {
        let mut pts: Vec<_> = points.into_iter().zip(impulses).collect();
        pts.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        Self {
            dim,
            kernel,
            domain,
            points: pts.iter().map(|p| p.0).collect(),
            impulses: pts.iter().map(|p| p.1).collect(),
        }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn impulses(&self) -> &[f64] {
        &self.impulses
    }

    pub fn interior(&self) -> Result<BoxDomain> {
        self.domain.shrink(self.kernel.radius())
    }

    /// Same realization without the points at distance > η from `t`.
    pub fn localized(&self, t: &[f64]) -> Self {
        let eta = self.kernel.radius();
        let keep: Vec<usize> = (0..self.points.len())
            .filter(|&i| {
                let d2: f64 = (0..self.dim).map(|k| (self.points[i][k] - t[k]).powi(2)).sum();
                d2 <= eta * eta
            })
            .collect();
        Self {
            dim: self.dim,
            kernel: self.kernel,
            domain: self.domain.clone(),
            points: keep.iter().map(|&i| self.points[i]).collect(),
            impulses: keep.iter().map(|&i| self.impulses[i]).collect(),
        }
    }
}

impl Field for ShotNoiseRealization {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) -> Result<(), FieldError> {
        let eta = self.kernel.radius();
        for k in 0..self.dim {
            if t[k] < self.domain.lo[k] + eta || t[k] > self.domain.hi[k] - eta {
                return Err(FieldError::OutOfDomain {
                    point: t.to_vec(),
                    reason: "closer than the kernel radius to the Poisson domain boundary".into(),
                });
            }
        }
        let start = self.points.partition_point(|p| p[0] <= t[0] - eta);
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut dg = [0.0; 2];
        let mut x = [0.0; 2];
        for (p, b) in self.points[start..].iter().zip(&self.impulses[start..]) {
            if p[0] >= t[0] + eta {
                break;
            }
            for k in 0..self.dim {
                x[k] = t[k] - p[k];
            }
            let gv = self.kernel.value_grad(&x[..self.dim], &mut dg[..self.dim]);
            v += b * gv;
            for k in 0..self.dim {
                g[k] += b * dg[k];
            }
        }
        value[0] = v;
        jac[..self.dim].copy_from_slice(&g[..self.dim]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> BoxDomain {
        BoxDomain::interval(0.0, 10.0)
    }

    #[test]
    fn empty_sum_is_zero() {
        let r = ShotNoiseRealization::from_points(1, Kernel::default(), line(), vec![[8.0, 0.0]], vec![1.0]);
        let jet = r.eval(&[3.0]).unwrap();
        assert_eq!(jet.value[0], 0.0);
        assert_eq!(jet.jacobian[0], 0.0);
    }

    #[test]
    fn single_term_sum() {
        let r = ShotNoiseRealization::from_points(1, Kernel::default(), line(), vec![[4.0, 0.0]], vec![2.0]);
        let jet = r.eval(&[4.0]).unwrap();
        assert_eq!(jet.value[0], 2.0);
        assert_eq!(jet.jacobian[0], 0.0);
    }

    #[test]
    fn boundary_zone_is_rejected() {
        let r = ShotNoiseRealization::from_points(1, Kernel::default(), line(), vec![], vec![]);
        assert!(r.eval(&[0.5]).is_err());
        assert!(r.eval(&[9.5]).is_err());
    }

    #[test]
    fn domain_smaller_than_support_is_a_configuration_error() {
        let m = ShotNoiseModel::new(1, 1.0, BoxDomain::interval(0.0, 1.5));
        assert!(matches!(
            crate::field_models::sample_realization(&crate::field_models::FieldModel::ShotNoise(m), 1),
            Err(crate::error::Error::Config(_))
        ));
    }

    #[test]
    fn kernel_vanishes_outside_support() {
        let k = Kernel::Biweight { radius: 0.7 };
        assert_eq!(k.value(&[0.7]), 0.0);
        assert_eq!(k.value(&[0.5, 0.5]), 0.0);
        assert!(k.value(&[0.69]) > 0.0);
    }

    #[test]
    fn kernel_constants() {
        let k = Kernel::Biweight { radius: 1.3 };
        // midpoint rule for ∫g and sup|g'|
        let n = 200_000;
        let h = 2.6 / n as f64;
        let mut int = 0.0;
        let mut gmax: f64 = 0.0;
        let mut g = [0.0];
        for i in 0..n {
            let x = -1.3 + (i as f64 + 0.5) * h;
            int += k.value_grad(&[x], &mut g) * h;
            gmax = gmax.max(g[0].abs());
        }
        assert!((int - k.integral(1)).abs() < 1e-8);
        assert!((gmax - k.max_grad()).abs() < 1e-6);
    }
}
