use serde::{Deserialize, Serialize};

use super::{check_inner, kacrice_rhs, Quadrature};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::{sample_realization, FieldModel};
use crate::level_set::occupation::midpoint_sample;
use crate::linalg::normal_jacobian_slice;
use crate::rng::mix;
use crate::stats::{Estimate, MeanAccumulator};

/// Midpoints of `n` equal cells of `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LevelGrid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn levels(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| self.lo + (k as f64 + 0.5) * self.step())
            .collect()
    }
}

/// Smooth bump `exp(−1/(1 − s²))`, `s = (u − center)/half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    pub fn eval(&self, u: f64) -> f64 {
        let s = (u - self.center) / self.half_width;
        if s.abs() < 1.0 {
            (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeSpec {
    pub levels: LevelGrid,
    pub bump: Bump,
    /// Midpoint cells per axis for the co-area integral.
    pub cells: usize,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AeConsistency {
    pub levels: Vec<f64>,
    /// Right-hand side at each level; zero where the bump vanishes.
    pub rhs: Vec<f64>,
    /// Mean of `∫_T g(X(t)) Δ(t) dt` over realizations.
    pub lhs: Estimate,
    /// `Σ_k g(u_k) RHS(u_k) Δu`.
    pub rhs_integral: Estimate,
    pub realizations: usize,
}

impl AeConsistency {
    /// Whether the two sides agree to within `z` combined standard errors
    /// plus `abs_floor`.
    pub fn agrees(&self, z: f64, abs_floor: f64) -> bool {
        let se = self.lhs.std_error.hypot(self.rhs_integral.std_error);
        (self.lhs.value - self.rhs_integral.value).abs() <= z * se + abs_floor
    }
}

/// Checks the Kac-Rice formula for almost every level at once: integrating
/// both sides against a smooth weight `g(u)` turns the level-set measure
/// into `∫_T g(X) Δ dt` by the co-area formula, which needs no level-set
/// extraction.
pub fn ae_level_consistency(
    model: &FieldModel,
    domain: &BoxDomain,
    spec: &AeSpec,
    inner_mc: usize,
    seed: u64,
    exec: Exec,
) -> Result<AeConsistency> {
    check_inner(inner_mc)?;
    model.validate()?;
    domain.validate()?;
    if model.output_dim() != 1 {
        return Err(Error::Capability("level consistency needs a scalar field".into()));
    }
    if spec.levels.n == 0 || !(spec.levels.hi > spec.levels.lo) {
        return Err(Error::Config("level grid needs n ≥ 1 and lo < hi".into()));
    }
    if !(spec.bump.half_width > 0.0) || spec.cells < 2 || spec.realizations < 2 {
        return Err(Error::Config(
            "need a positive bump width, at least 2 cells and 2 realizations".into(),
        ));
    }
    let dim = domain.dim();
    let lhs_parts = exec.map(spec.realizations, |r| -> Result<f64> {
        let real = sample_realization(model, mix(&[seed, r as u64]))?;
        let (v, j, cell) = midpoint_sample(&real, domain, spec.cells + 1)?;
        Ok(v
            .iter()
            .enumerate()
            .map(|(i, &x)| spec.bump.eval(x) * normal_jacobian_slice(1, dim, &j[i * dim..(i + 1) * dim]))
            .sum::<f64>()
            * cell)
    });
    let mut lhs = MeanAccumulator::new();
    for p in lhs_parts {
        lhs.push(p?);
    }

    let levels = spec.levels.levels();
    let du = spec.levels.step();
    let mut rhs = vec![0.0; levels.len()];
    let mut value = 0.0;
    let mut err = 0.0;
    for (k, &u) in levels.iter().enumerate() {
        let g = spec.bump.eval(u);
        let skip = g == 0.0
            || matches!(model, FieldModel::ChiSquare(_) if u <= 0.0)
            || matches!(model, FieldModel::ShotNoise(_) if u == 0.0);
        if skip {
            continue;
        }
        let quad = Quadrature {
            exec,
            ..Quadrature::default()
        };
        let e = kacrice_rhs(model, domain, &[u], &quad, inner_mc, mix(&[seed, 1 << 40, k as u64]))?;
        rhs[k] = e.value;
        value += g * e.value * du;
        err += (g * e.total_error * du).powi(2);
    }
    Ok(AeConsistency {
        levels,
        rhs,
        lhs: lhs.estimate(),
        rhs_integral: Estimate {
            value,
            std_error: err.sqrt(),
            samples: inner_mc as u64,
        },
        realizations: spec.realizations,
    })
}
