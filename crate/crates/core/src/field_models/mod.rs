//! Random field families with exact pointwise evaluation.
//!
//! Every family is sampled into a frozen [`Realization`]: all random draws are
//! taken once from a counter-based stream, after which evaluation of the field
//! value `X(t)` and its Jacobian `X'(t)` is deterministic, exact and reentrant.

mod chi_square;
pub(crate) mod microlens;
mod shot_noise;
mod spectral;

use serde::{Deserialize, Serialize};

pub use chi_square::{ChiSquareField, ChiSquareRealization};
pub use microlens::{check_supercritical, MicrolensRealization, MicrolensSystem};
pub use shot_noise::{Impulse, Kernel, ShotNoiseModel, ShotNoiseRealization};
pub use spectral::{
    GaussianGradient, GradientRealization, SpectralGaussian1D, SpectralGaussian2D,
    SpectralRealization, Spectrum,
};

use crate::domain::BoxDomain;
use crate::error::{Error, FieldError, Result};

/// Value and Jacobian of a field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Vec<f64>,
    /// Row-major `d × D` Jacobian.
    pub jacobian: Vec<f64>,
    pub input_dim: usize,
}

impl Jet {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            value: vec![0.0; output_dim],
            jacobian: vec![0.0; output_dim * input_dim],
            input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.value.len()
    }

    #[inline]
    pub fn jac(&self, row: usize, col: usize) -> f64 {
        self.jacobian[row * self.input_dim + col]
    }
}

/// A deterministic map `R^D -> R^d` with an exact Jacobian.
pub trait Field: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Writes `X(t)` into `value` (length d) and the row-major Jacobian into
    /// `jacobian` (length d·D).
    fn eval_into(&self, t: &[f64], value: &mut [f64], jacobian: &mut [f64])
        -> Result<(), FieldError>;

    fn eval(&self, t: &[f64]) -> Result<Jet, FieldError> {
        if t.len() != self.input_dim() {
            return Err(FieldError::Dimension {
                expected: self.input_dim(),
                got: t.len(),
            });
        }
        let mut jet = Jet::zeros(self.input_dim(), self.output_dim());
        self.eval_into(t, &mut jet.value, &mut jet.jacobian)?;
        Ok(jet)
    }

    /// Evaluates on the tensor lattice spanned by `axes` (first axis varies
    /// fastest). Implementations may vectorize but must reproduce
    /// [`Field::eval_into`] bit-for-bit at every node.
    fn fill_lattice(
        &self,
        axes: &[Vec<f64>],
        values: &mut [f64],
        jacobians: &mut [f64],
    ) -> Result<(), FieldError> {
        let d = self.output_dim();
        let dd = d * self.input_dim();
        let mut t = vec![0.0; axes.len()];
        let total: usize = axes.iter().map(Vec::len).product();
        for node in 0..total {
            let mut rem = node;
            for (k, axis) in axes.iter().enumerate() {
                t[k] = axis[rem % axis.len()];
                rem /= axis.len();
            }
            self.eval_into(
                &t,
                &mut values[node * d..(node + 1) * d],
                &mut jacobians[node * dd..(node + 1) * dd],
            )?;
        }
        Ok(())
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn eval_into(&self, t: &[f64], v: &mut [f64], j: &mut [f64]) -> Result<(), FieldError> {
        (**self).eval_into(t, v, j)
    }
    fn fill_lattice(&self, a: &[Vec<f64>], v: &mut [f64], j: &mut [f64]) -> Result<(), FieldError> {
        (**self).fill_lattice(a, v, j)
    }
}

/// A field given by a closure, for deterministic test functions.
pub struct FnField<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64], &mut [f64]) + Sync,
{
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F> Field for FnField<F>
where
    F: Fn(&[f64], &mut [f64], &mut [f64]) + Sync,
{
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn eval_into(&self, t: &[f64], v: &mut [f64], j: &mut [f64]) -> Result<(), FieldError> {
        (self.f)(t, v, j);
        Ok(())
    }
}

/// Parametric description of a random field family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldModel {
    #[serde(rename = "spectral_gaussian_1d")]
    SpectralGaussian1d(SpectralGaussian1D),
    #[serde(rename = "spectral_gaussian_2d")]
    SpectralGaussian2d(SpectralGaussian2D),
    ChiSquare(ChiSquareField),
    ShotNoise(ShotNoiseModel),
    Microlens(MicrolensSystem),
    GaussianGradient(GaussianGradient),
}

impl FieldModel {
    pub fn family(&self) -> &'static str {
        match self {
            FieldModel::SpectralGaussian1d(_) => "spectral_gaussian_1d",
            FieldModel::SpectralGaussian2d(_) => "spectral_gaussian_2d",
            FieldModel::ChiSquare(_) => "chi_square",
            FieldModel::ShotNoise(_) => "shot_noise",
            FieldModel::Microlens(_) => "microlens",
            FieldModel::GaussianGradient(_) => "gaussian_gradient",
        }
    }

    /// Parameter dimension D.
    pub fn input_dim(&self) -> usize {
        match self {
            FieldModel::SpectralGaussian1d(_) => 1,
            FieldModel::SpectralGaussian2d(_) => 2,
            FieldModel::ChiSquare(c) => c.base.input_dim(),
            FieldModel::ShotNoise(s) => s.dim,
            FieldModel::Microlens(_) => 2,
            FieldModel::GaussianGradient(g) => g.dim(),
        }
    }

    /// Value dimension d.
    pub fn output_dim(&self) -> usize {
        match self {
            FieldModel::Microlens(_) => 2,
            FieldModel::GaussianGradient(g) => g.dim(),
            _ => 1,
        }
    }

    /// Gaussian spectral view of the model, when it is one.
    pub fn spectrum(&self) -> Option<Spectrum> {
        match self {
            FieldModel::SpectralGaussian1d(m) => Some(m.spectrum()),
            FieldModel::SpectralGaussian2d(m) => Some(m.spectrum()),
            _ => None,
        }
    }

    /// Whether realizations have (exact) second derivatives.
    pub fn has_hessian(&self) -> bool {
        matches!(
            self,
            FieldModel::SpectralGaussian1d(_) | FieldModel::SpectralGaussian2d(_)
        )
    }

    /// Whether the model is the gradient of a scalar Gaussian field.
    pub fn is_gradient(&self) -> bool {
        matches!(self, FieldModel::GaussianGradient(_))
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, FieldModel::Microlens(_))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FieldModel::SpectralGaussian1d(m) => m.validate(),
            FieldModel::SpectralGaussian2d(m) => m.validate(),
            FieldModel::ChiSquare(m) => m.validate(),
            FieldModel::ShotNoise(m) => m.validate(),
            FieldModel::Microlens(m) => m.validate(),
            FieldModel::GaussianGradient(m) => m.validate(),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Spectral(SpectralRealization),
    ChiSquare(ChiSquareRealization),
    ShotNoise(ShotNoiseRealization),
    Microlens(MicrolensRealization),
    Gradient(GradientRealization),
}

/// One frozen draw of a [`FieldModel`].
#[derive(Debug, Clone)]
pub struct Realization {
    seed: u64,
    kind: Kind,
}

/// Draws the realization of `model` keyed by `seed`.
pub fn sample_realization(model: &FieldModel, seed: u64) -> Result<Realization> {
    model.validate()?;
    let kind = match model {
        FieldModel::SpectralGaussian1d(m) => Kind::Spectral(m.spectrum().sample(seed, 0)),
        FieldModel::SpectralGaussian2d(m) => Kind::Spectral(m.spectrum().sample(seed, 0)),
        FieldModel::ChiSquare(m) => Kind::ChiSquare(m.sample(seed)?),
        FieldModel::ShotNoise(m) => Kind::ShotNoise(m.sample(seed)?),
        FieldModel::Microlens(m) => Kind::Microlens(m.sample(seed)),
        FieldModel::GaussianGradient(m) => Kind::Gradient(m.spectrum()?.sample(seed, 0).into_gradient()),
    };
    Ok(Realization { seed, kind })
}

/// Value and Jacobian of a realization at `t`.
pub fn eval_field(r: &Realization, t: &[f64]) -> Result<Jet, FieldError> {
    r.eval(t)
}

/// Value and gradient of a shot-noise realization at `t`.
pub fn eval_shot_noise(r: &ShotNoiseRealization, t: &[f64]) -> Result<Jet, FieldError> {
    r.eval(t)
}

impl Realization {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn as_spectral(&self) -> Option<&SpectralRealization> {
        match &self.kind {
            Kind::Spectral(s) => Some(s),
            Kind::Gradient(g) => Some(g.base()),
            _ => None,
        }
    }

    pub fn as_chi_square(&self) -> Option<&ChiSquareRealization> {
        match &self.kind {
            Kind::ChiSquare(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_shot_noise(&self) -> Option<&ShotNoiseRealization> {
        match &self.kind {
            Kind::ShotNoise(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_microlens(&self) -> Option<&MicrolensRealization> {
        match &self.kind {
            Kind::Microlens(s) => Some(s),
            _ => None,
        }
    }

    /// Whether this realization evaluates the gradient of a scalar field.
    pub fn is_gradient(&self) -> bool {
        matches!(self.kind, Kind::Gradient(_))
    }

    /// The underlying scalar value for gradient realizations.
    pub fn potential(&self, t: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::Gradient(g) => Some(g.base().value(t)),
            _ => None,
        }
    }

    /// Domain on which evaluation is free of boundary effects, if the
    /// family has one.
    pub fn interior(&self) -> Option<BoxDomain> {
        match &self.kind {
            Kind::ShotNoise(s) => s.interior().ok(),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn Field {
        match &self.kind {
            Kind::Spectral(s) => s,
            Kind::ChiSquare(s) => s,
            Kind::ShotNoise(s) => s,
            Kind::Microlens(s) => s,
            Kind::Gradient(g) => g,
        }
    }
}

impl Field for Realization {
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner().output_dim()
    }
    fn eval_into(&self, t: &[f64], v: &mut [f64], j: &mut [f64]) -> Result<(), FieldError> {
        self.inner().eval_into(t, v, j)
    }
    fn fill_lattice(&self, a: &[Vec<f64>], v: &mut [f64], j: &mut [f64]) -> Result<(), FieldError> {
        self.inner().fill_lattice(a, v, j)
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_json_round_trip() {
        let m = FieldModel::SpectralGaussian1d(SpectralGaussian1D::single_harmonic(1.0, 1.0));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"spectral_gaussian_1d\""));
        let back: FieldModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unknown_model_fields_are_rejected() {
        let s = r#"{"type":"spectral_gaussian_1d","frequencies":[1.0],"amplitudes":[1.0],"colour":3}"#;
        assert!(serde_json::from_str::<FieldModel>(s).is_err());
        let s = r#"{"type":"spectral_gaussian_3d","frequencies":[1.0],"amplitudes":[1.0]}"#;
        assert!(serde_json::from_str::<FieldModel>(s).is_err());
    }
}
