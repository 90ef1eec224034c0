//! Right-hand side of the Kac-Rice formula, computed without looking at any
//! simulated level set.
//!
//! Gaussian models go through exact regression on the spectral
//! representation; χ², shot noise and microlensing condition on the level
//! surface through their underlying variables (sphere sampling, a designated
//! impulse or a designated star solving the level equation).

mod ae;
mod chi_square;
mod euler;
mod gaussian;
mod microlens;
mod moment;
mod shot_noise;

pub use ae::{ae_level_consistency, AeConsistency, AeSpec, Bump, LevelGrid};
pub use euler::euler_char_expectation;
pub use gaussian::{alphas, GaussianRegression};
pub use microlens::microlens_rhs;
pub use moment::second_factorial_moment_rhs;
pub use shot_noise::{poisson_tail_second_moment, shotnoise_rhs};

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::FieldModel;
use crate::stats::{Estimate, MeanAccumulator};
use crate::SCHEMA_VERSION;

/// Inner Monte Carlo sample count below which results are refused.
pub const MIN_INNER_MC: usize = 100;
/// Samples used when a density has to be estimated without a caller budget.
pub const DEFAULT_INNER_MC: usize = 100_000;
/// Inner samples per parallel batch.
pub(crate) const INNER_BATCH: usize = 1024;
/// Push-forward Jacobians below this value are clamped.
pub const DELTA_CLAMP: f64 = 1e-8;

/// Outer quadrature settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    /// Midpoint nodes per axis.
    pub nodes: usize,
    /// Integrate over the box even for stationary models.
    pub force: bool,
    pub exec: Exec,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            nodes: 256,
            force: false,
            exec: Exec::default(),
        }
    }
}

impl Quadrature {
    pub fn with_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            ..Self::default()
        }
    }

    pub fn forced(mut self) -> Self {
        self.force = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.nodes % 2 != 0 {
            return Err(Error::Config(format!(
                "quadrature nodes must be even and ≥ 2 (Richardson pairing), got {}",
                self.nodes
            )));
        }
        Ok(())
    }
}

/// A lag (or other integration location) excluded because the two-point
/// law degenerates there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrandGap {
    pub location: f64,
    pub half_width: f64,
    /// Mass carried by the degenerate set, already included in `value`.
    pub singular_contribution: f64,
}

/// Value of a right-hand side with its error decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsEvaluation {
    pub schema_version: u32,
    pub quantity: String,
    /// Expected measure (count or length); signed for the Euler
    /// characteristic.
    pub value: f64,
    pub quadrature_error: f64,
    pub mc_std_error: f64,
    pub truncation_error: f64,
    /// `quadrature_error + mc_std_error + truncation_error`.
    pub total_error: f64,
    pub outer_nodes: usize,
    pub inner_samples: u64,
    /// Fraction of inner samples whose push-forward Jacobian was clamped.
    pub clamped_mass: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<IntegrandGap>,
    pub model: FieldModel,
    #[serde(rename = "box")]
    pub domain: BoxDomain,
    pub level: Vec<f64>,
    pub seed: u64,
}

impl RhsEvaluation {
    pub(crate) fn new(
        quantity: &str,
        model: &FieldModel,
        domain: &BoxDomain,
        level: &[f64],
        seed: u64,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            quantity: quantity.to_string(),
            value: 0.0,
            quadrature_error: 0.0,
            mc_std_error: 0.0,
            truncation_error: 0.0,
            total_error: 0.0,
            outer_nodes: 0,
            inner_samples: 0,
            clamped_mass: 0.0,
            gaps: Vec::new(),
            model: model.clone(),
            domain: domain.clone(),
            level: level.to_vec(),
            seed,
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        self.total_error = self.quadrature_error + self.mc_std_error + self.truncation_error;
        self
    }

    /// The value with its total error used as a standard error.
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            std_error: self.total_error,
            samples: self.inner_samples,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Weight `g` integrated over the level set, evaluated on the Jacobian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `g ≡ 1`.
    Unit,
    /// `1{X'(t) > 0}` for scalar processes on the line.
    UpCrossing,
    /// `1{X'(t) < 0}` for scalar processes on the line.
    DownCrossing,
    /// `1{index(X'(t)) = k}` on a gradient field, where `X'` is the Hessian.
    CriticalIndex { k: usize },
    Sum { terms: Vec<WeightSpec> },
}

impl WeightSpec {
    /// Value of the weight on a row-major `d × D` Jacobian.
    pub fn eval(&self, d: usize, jac: &[f64]) -> f64 {
        match self {
            WeightSpec::Unit => 1.0,
            WeightSpec::UpCrossing => f64::from(u8::from(jac[0] > 0.0)),
            WeightSpec::DownCrossing => f64::from(u8::from(jac[0] < 0.0)),
            WeightSpec::CriticalIndex { k } => {
                f64::from(u8::from(crate::linalg::morse_index(d, jac) == *k))
            }
            WeightSpec::Sum { terms } => terms.iter().map(|w| w.eval(d, jac)).sum(),
        }
    }

    /// Checks that the weight makes sense for the model.
    pub fn check(&self, model: &FieldModel) -> Result<()> {
        let scalar_line = model.input_dim() == 1 && model.output_dim() == 1;
        match self {
            WeightSpec::Unit => Ok(()),
            WeightSpec::UpCrossing | WeightSpec::DownCrossing if scalar_line => Ok(()),
            WeightSpec::CriticalIndex { k } if model.is_gradient() && *k <= model.input_dim() => {
                Ok(())
            }
            WeightSpec::Sum { terms } if !terms.is_empty() => {
                terms.iter().try_for_each(|w| w.check(model))
            }
            _ => Err(Error::Config(format!(
                "weight {self:?} is not defined for the {} model",
                model.family()
            ))),
        }
    }
}

pub(crate) fn check_inner(inner_mc: usize) -> Result<()> {
    if inner_mc < MIN_INNER_MC {
        return Err(Error::Config(format!(
            "inner Monte Carlo needs at least {MIN_INNER_MC} samples, got {inner_mc}"
        )));
    }
    Ok(())
}

fn check_level(model: &FieldModel, domain: &BoxDomain, u: &[f64]) -> Result<()> {
    model.validate()?;
    domain.validate()?;
    if domain.dim() != model.input_dim() {
        return Err(Error::Config(format!(
            "box has {} dimensions but the {} model lives in R^{}",
            domain.dim(),
            model.family(),
            model.input_dim()
        )));
    }
    if u.len() != model.output_dim() {
        return Err(Error::Config(format!(
            "level has {} components but the {} model has {} outputs",
            u.len(),
            model.family(),
            model.output_dim()
        )));
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("level must be finite".into()));
    }
    Ok(())
}

/// Pointwise Kac-Rice integrand `E(Δ·g | X(t) = u)·p_{X(t)}(u)` with its
/// inner Monte Carlo error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Integrand {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

fn integrand(
    model: &FieldModel,
    t: &[f64],
    u: &[f64],
    weight: &WeightSpec,
    inner_mc: usize,
    seed: u64,
    exec: Exec,
) -> Result<Integrand> {
    match model {
        FieldModel::SpectralGaussian1d(_)
        | FieldModel::SpectralGaussian2d(_)
        | FieldModel::GaussianGradient(_) => {
            gaussian::integrand(model, t, u, weight, inner_mc, seed, exec)
        }
        FieldModel::ChiSquare(c) => {
            if *weight != WeightSpec::Unit {
                return Err(Error::Capability("χ² right-hand sides support the unit weight only".into()));
            }
            chi_square::integrand(c, t, u[0], inner_mc, seed, exec)
        }
        _ => Err(Error::Capability(format!(
            "no pointwise integrand for the {} model",
            model.family()
        ))),
    }
}

/// Density of `X(t)` at `u`.
///
/// Gaussian models: exact. χ²: push-forward surface integral over the
/// sphere. Shot noise: total-probability mixture estimated with
/// [`DEFAULT_INNER_MC`] samples; use [`level_density_with`] to control the
/// budget.
pub fn level_density(model: &FieldModel, t: &[f64], u: &[f64]) -> Result<f64> {
    Ok(level_density_with(model, t, u, DEFAULT_INNER_MC, 0)?.value)
}

pub fn level_density_with(
    model: &FieldModel,
    t: &[f64],
    u: &[f64],
    inner_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    model.validate()?;
    if u.len() != model.output_dim() || t.len() != model.input_dim() {
        return Err(Error::Config("level or point has the wrong dimension".into()));
    }
    match model {
        FieldModel::SpectralGaussian1d(_)
        | FieldModel::SpectralGaussian2d(_)
        | FieldModel::GaussianGradient(_) => {
            Ok(Estimate::exact(GaussianRegression::for_model(model, t, u)?.density()?))
        }
        FieldModel::ChiSquare(c) => Ok(Estimate::exact(chi_square::density(c, u[0])?)),
        FieldModel::ShotNoise(s) => {
            check_inner(inner_mc)?;
            shot_noise::density(s, u[0], inner_mc, seed)
        }
        FieldModel::Microlens(_) => Err(Error::Capability(
            "the microlens density is only evaluated inside microlens_rhs".into(),
        )),
    }
}

/// `E(Δ(t) | X(t) = u)` with its inner Monte Carlo standard error.
///
/// Gaussian models use closed forms when the conditional Jacobian law
/// allows (scalar half-normal means, isotropic planar gradients) and
/// regression sampling otherwise.
pub fn conditional_jacobian_expectation(
    model: &FieldModel,
    t: &[f64],
    u: &[f64],
    inner_mc: usize,
    seed: u64,
) -> Result<Estimate> {
    check_inner(inner_mc)?;
    model.validate()?;
    if u.len() != model.output_dim() || t.len() != model.input_dim() {
        return Err(Error::Config("level or point has the wrong dimension".into()));
    }
    match model {
        FieldModel::SpectralGaussian1d(_)
        | FieldModel::SpectralGaussian2d(_)
        | FieldModel::GaussianGradient(_) => {
            let reg = GaussianRegression::for_model(model, t, u)?;
            Ok(gaussian::conditional_delta(&reg, model, &WeightSpec::Unit, inner_mc, seed, Exec::default()))
        }
        FieldModel::ChiSquare(c) => {
            let p = chi_square::density(c, u[0])?;
            let i = chi_square::integrand(c, t, u[0], inner_mc, seed, Exec::default())?;
            Ok(Estimate {
                value: i.value / p,
                std_error: i.std_error / p,
                samples: i.samples,
            })
        }
        FieldModel::ShotNoise(s) => shot_noise::conditional_delta(s, u[0], inner_mc, seed),
        FieldModel::Microlens(m) => microlens::conditional_delta(m, t, u, inner_mc, seed),
    }
}

/// Expected level-set measure `∫_box E(Δ | X(t) = u) p_{X(t)}(u) dt`.
///
/// Stationary models short-circuit to integrand × volume unless the
/// quadrature is forced; shot noise and microlensing delegate to their
/// dedicated evaluators with default settings.
pub fn kacrice_rhs(
    model: &FieldModel,
    domain: &BoxDomain,
    u: &[f64],
    quad: &Quadrature,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    weighted_kacrice_rhs_with(model, domain, u, &WeightSpec::Unit, quad, inner_mc, seed)
}

/// `∫_box E(Δ·g | X(t) = u) p_{X(t)}(u) dt` for a weight `g` evaluated on
/// the Jacobian.
pub fn weighted_kacrice_rhs(
    model: &FieldModel,
    domain: &BoxDomain,
    u: &[f64],
    weight: &WeightSpec,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    weighted_kacrice_rhs_with(model, domain, u, weight, &Quadrature::default(), inner_mc, seed)
}

pub fn weighted_kacrice_rhs_with(
    model: &FieldModel,
    domain: &BoxDomain,
    u: &[f64],
    weight: &WeightSpec,
    quad: &Quadrature,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    check_level(model, domain, u)?;
    check_inner(inner_mc)?;
    quad.validate()?;
    weight.check(model)?;
    match model {
        FieldModel::ShotNoise(s) if *weight == WeightSpec::Unit => {
            return shotnoise_rhs(s, domain, u[0], None, inner_mc, seed);
        }
        FieldModel::Microlens(m) if *weight == WeightSpec::Unit => {
            return microlens_rhs(m, [u[0], u[1]], domain, quad, inner_mc, seed);
        }
        FieldModel::ShotNoise(_) | FieldModel::Microlens(_) => {
            return Err(Error::Capability(format!(
                "the {} model supports the unit weight only",
                model.family()
            )));
        }
        _ => {}
    }
    let quantity = if *weight != WeightSpec::Unit {
        "weighted_measure"
    } else if model.input_dim() == model.output_dim() {
        "count"
    } else {
        "length"
    };
    let mut out = RhsEvaluation::new(quantity, model, domain, u, seed);
    if model.is_stationary() && !quad.force {
        let i = integrand(model, &domain.center(), u, weight, inner_mc, seed, quad.exec)?;
        let vol = domain.volume();
        out.value = i.value * vol;
        out.mc_std_error = i.std_error * vol;
        out.inner_samples = i.samples;
        out.outer_nodes = 1;
        return Ok(out.finish());
    }
    let fine = tensor_midpoint(domain, quad.nodes, |t| {
        integrand(model, t, u, weight, inner_mc, seed, Exec::Sequential)
    }, quad.exec)?;
    let coarse = tensor_midpoint(domain, quad.nodes / 2, |t| {
        integrand(model, t, u, weight, inner_mc, seed, Exec::Sequential)
    }, quad.exec)?;
    out.value = fine.value;
    out.mc_std_error = fine.std_error;
    out.quadrature_error = (fine.value - coarse.value).abs();
    out.outer_nodes = quad.nodes.pow(domain.dim() as u32);
    out.inner_samples = fine.samples;
    Ok(out.finish())
}

/// Midpoint tensor rule. Inner estimates share random numbers across nodes,
/// so their errors are added linearly.
pub(crate) fn tensor_midpoint(
    domain: &BoxDomain,
    n: usize,
    f: impl Fn(&[f64]) -> Result<Integrand> + Sync + Send,
    exec: Exec,
) -> Result<Integrand> {
    let dim = domain.dim();
    let total = n.pow(dim as u32);
    let cell = domain.volume() / total as f64;
    let vals = exec.map(total, |node| {
        let mut rem = node;
        let t: Vec<f64> = (0..dim)
            .map(|k| {
                let i = rem % n;
                rem /= n;
                domain.cell_mid(k, i, n)
            })
            .collect();
        f(&t)
    });
    let mut acc = Integrand {
        value: 0.0,
        std_error: 0.0,
        samples: 0,
    };
    for v in vals {
        let v = v?;
        acc.value += v.value * cell;
        acc.std_error += v.std_error * cell;
        acc.samples = acc.samples.max(v.samples);
    }
    Ok(acc)
}

/// Runs `per_sample` over `n` inner draws split into batches with their own
/// streams, merging in batch order.
pub(crate) fn inner_mc<F>(n: usize, exec: Exec, per_batch: F) -> MeanAccumulator
where
    F: Fn(usize, usize, &mut MeanAccumulator) + Sync + Send,
{
    let batches = n.div_ceil(INNER_BATCH);
    let parts = exec.map(batches, |b| {
        let mut acc = MeanAccumulator::new();
        per_batch(b, INNER_BATCH.min(n - b * INNER_BATCH), &mut acc);
        acc
    });
    crate::integral_geometry::merge(parts)
}
