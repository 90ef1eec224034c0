use serde::{Deserialize, Serialize};

use super::{config_err, Field, FieldModel, SpectralRealization, Spectrum};
use crate::error::{FieldError, Result};

/// `X(t) = ‖Y(t)‖²` for `n` independent copies of a unit-variance spectral
/// Gaussian field `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSquareField {
    pub components: usize,
    pub base: Box<FieldModel>,
}

impl ChiSquareField {
    pub fn new(components: usize, base: FieldModel) -> Self {
        Self {
            components,
            base: Box::new(base),
        }
    }

    pub fn base_spectrum(&self) -> Result<Spectrum> {
        match self.base.spectrum() {
            Some(s) => Ok(s),
            None => config_err(format!(
                "chi-square base must be a spectral Gaussian model, got {}",
                self.base.family()
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components < 2 {
            return config_err("chi-square field needs at least 2 components");
        }
        self.base.validate()?;
        let spec = self.base_spectrum()?;
        if (spec.variance() - 1.0).abs() > 1e-9 {
            return config_err(format!(
                "chi-square base must have unit variance, got {}",
                spec.variance()
            ));
        }
        Ok(())
    }

    pub(super) fn sample(&self, seed: u64) -> Result<ChiSquareRealization> {
        let spec = self.base_spectrum()?;
        Ok(ChiSquareRealization {
            components: (0..self.components)
                .map(|i| spec.sample(seed, i as u64))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareRealization {
    components: Vec<SpectralRealization>,
}

impl ChiSquareRealization {
    pub fn from_components(components: Vec<SpectralRealization>) -> Self {
        Self { components }
    }

    pub fn components(&self) -> &[SpectralRealization] {
        &self.components
    }
}

impl Field for ChiSquareRealization {
    fn input_dim(&self) -> usize {
        self.components[0].dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) -> Result<(), FieldError> {
        let dim = self.input_dim();
        let mut y = [0.0];
        let mut g = [0.0; 2];
        value[0] = 0.0;
        jac[..dim].iter_mut().for_each(|x| *x = 0.0);
        for c in &self.components {
            c.eval_into(t, &mut y, &mut g)?;
            value[0] += y[0] * y[0];
            for i in 0..dim {
                jac[i] += 2.0 * y[0] * g[i];
            }
        }
        Ok(())
    }

    fn fill_lattice(
        &self,
        axes: &[Vec<f64>],
        values: &mut [f64],
        jacobians: &mut [f64],
    ) -> Result<(), FieldError> {
        let dim = self.input_dim();
        let nodes = values.len();
        let mut y = vec![0.0; nodes];
        let mut g = vec![0.0; nodes * dim];
        values.iter_mut().for_each(|x| *x = 0.0);
        jacobians.iter_mut().for_each(|x| *x = 0.0);
        for c in &self.components {
            c.fill_lattice(axes, &mut y, &mut g)?;
            for n in 0..nodes {
                values[n] += y[n] * y[n];
                for i in 0..dim {
                    jacobians[n * dim + i] += 2.0 * y[n] * g[n * dim + i];
                }
            }
        }
        Ok(())
    }
}
