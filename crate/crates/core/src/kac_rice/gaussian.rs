use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{inner_mc, Integrand, WeightSpec, INNER_BATCH};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::{FieldModel, Spectrum};
use crate::linalg::{
    folded_normal_mean, gaussian_density, normal_jacobian_slice, positive_part_mean,
    ConditionalGaussian,
};
use crate::rng::{stream_rng, Stream};
use crate::stats::Estimate;

/// Multi-indices of all partial derivatives of order `k` in dimension
/// `dim`, in row-major order (`k = 2` gives the full `dim × dim` Hessian).
pub fn alphas(dim: usize, k: usize) -> Vec<Vec<usize>> {
    match k {
        0 => vec![vec![0; dim]],
        1 => (0..dim).map(|i| unit(dim, &[i])).collect(),
        2 => (0..dim * dim).map(|ij| unit(dim, &[ij / dim, ij % dim])).collect(),
        _ => panic!("derivatives of order {k} are not used"),
    }
}

fn unit(dim: usize, axes: &[usize]) -> Vec<usize> {
    let mut a = vec![0; dim];
    for &i in axes {
        a[i] += 1;
    }
    a
}

/// Joint Gaussian law of observed derivatives of a spectral field at one
/// point and the conditional law of target derivatives given their values.
#[derive(Debug, Clone)]
pub struct GaussianRegression {
    pub observed_cov: DMatrix<f64>,
    pub values: Vec<f64>,
    pub conditional: ConditionalGaussian,
}

impl GaussianRegression {
    pub fn new(
        spectrum: &Spectrum,
        t: &[f64],
        observed: &[Vec<usize>],
        targets: &[Vec<usize>],
        values: &[f64],
    ) -> Self {
        let obs: Vec<Vec<f64>> = observed.iter().map(|a| spectrum.functional(t, a)).collect();
        let tgt: Vec<Vec<f64>> = targets.iter().map(|a| spectrum.functional(t, a)).collect();
        let n = obs.len();
        let observed_cov = DMatrix::from_fn(n, n, |i, j| {
            obs[i].iter().zip(&obs[j]).map(|(a, b)| a * b).sum()
        });
        Self {
            observed_cov,
            values: values.to_vec(),
            conditional: ConditionalGaussian::from_functionals(&tgt, &obs, values),
        }
    }

    /// Regression of the Jacobian of `model` on its value, at level `u`.
    pub fn for_model(model: &FieldModel, t: &[f64], u: &[f64]) -> Result<Self> {
        let (spec, order) = match model {
            FieldModel::SpectralGaussian1d(m) => (m.spectrum(), 0),
            FieldModel::SpectralGaussian2d(m) => (m.spectrum(), 0),
            FieldModel::GaussianGradient(g) => (g.spectrum()?, 1),
            _ => {
                return Err(Error::Capability(format!(
                    "{} is not a Gaussian model",
                    model.family()
                )))
            }
        };
        let dim = spec.dim;
        Ok(Self::new(&spec, t, &alphas(dim, order), &alphas(dim, order + 1), u))
    }

    /// Density of the observed vector at the conditioning values.
    pub fn density(&self) -> Result<f64> {
        gaussian_density(&self.observed_cov, &self.values).map_err(|_| {
            Error::Model("degenerate Gaussian variance at the evaluation point".into())
        })
    }
}

/// Closed forms for `E(Δ·g | ·)` when the conditional Jacobian law is
/// simple enough.
fn closed_form(reg: &GaussianRegression, model: &FieldModel, weight: &WeightSpec) -> Option<f64> {
    let c = &reg.conditional;
    let (d, dim) = (model.output_dim(), model.input_dim());
    match (d, dim, weight) {
        (1, 1, WeightSpec::Unit) => Some(folded_normal_mean(c.mean[0], c.variance(0).sqrt())),
        (1, 1, WeightSpec::UpCrossing) => {
            Some(positive_part_mean(c.mean[0], c.variance(0).sqrt()))
        }
        (1, 1, WeightSpec::DownCrossing) => {
            Some(positive_part_mean(-c.mean[0], c.variance(0).sqrt()))
        }
        (1, 1, WeightSpec::Sum { terms }) => terms
            .iter()
            .map(|w| closed_form(reg, model, w))
            .sum::<Option<f64>>(),
        (1, 2, WeightSpec::Unit) => {
            // centered isotropic planar gradient: ‖∇X‖ is Rayleigh
            let (a, b, o) = (c.cov[(0, 0)], c.cov[(1, 1)], c.cov[(0, 1)]);
            let scale = a.max(b).max(f64::MIN_POSITIVE);
            let centred = c.mean.iter().all(|m| m.abs() <= 1e-12 * scale.sqrt());
            let isotropic = (a - b).abs() <= 1e-12 * scale && o.abs() <= 1e-12 * scale;
            (centred && isotropic).then(|| (0.5 * (a + b)).sqrt() * (std::f64::consts::PI / 2.0).sqrt())
        }
        _ => None,
    }
}

/// `E(Δ·g | X(t) = u)` for a Gaussian model.
pub(crate) fn conditional_delta(
    reg: &GaussianRegression,
    model: &FieldModel,
    weight: &WeightSpec,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Estimate {
    if let Some(v) = closed_form(reg, model, weight) {
        return Estimate::exact(v);
    }
    let (d, dim) = (model.output_dim(), model.input_dim());
    let c = &reg.conditional;
    let k = c.dim();
    let acc = inner_mc(n, exec, |b, count, acc| {
        let mut rng = stream_rng(seed, b as u64, Stream::InnerMc);
        let mut z = vec![0.0; k];
        let mut jac = vec![0.0; k];
        for _ in 0..count {
            c.sample_into(&mut rng, &mut z, &mut jac);
            acc.push(normal_jacobian_slice(d, dim, &jac) * weight.eval(d, &jac));
        }
    });
    acc.estimate()
}

pub(crate) fn integrand(
    model: &FieldModel,
    t: &[f64],
    u: &[f64],
    weight: &WeightSpec,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Integrand> {
    let reg = GaussianRegression::for_model(model, t, u)?;
    let p = reg.density()?;
    let e = conditional_delta(&reg, model, weight, n, seed, exec);
    Ok(Integrand {
        value: e.value * p,
        std_error: e.std_error * p,
        samples: e.samples,
    })
}

/// `n` standard normal vectors of length `k`, shared by every node of an
/// outer quadrature.
pub(crate) fn common_normals(n: usize, k: usize, seed: u64) -> Vec<f64> {
    let batches = n.div_ceil(INNER_BATCH);
    let mut out = Vec::with_capacity(n * k);
    for b in 0..batches {
        let mut rng = stream_rng(seed, b as u64, Stream::InnerMc);
        let count = INNER_BATCH.min(n - b * INNER_BATCH);
        for _ in 0..count * k {
            out.push(rng.sample::<f64, _>(StandardNormal));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::{SpectralGaussian1D, SpectralGaussian2D};

    #[test]
    fn hessian_alphas() {
        assert_eq!(alphas(2, 2), vec![vec![2, 0], vec![1, 1], vec![1, 1], vec![0, 2]]);
        assert_eq!(alphas(1, 1), vec![vec![1]]);
    }

    #[test]
    fn stationary_regression_leaves_derivative_unchanged() {
        let m = SpectralGaussian1D::band(20, 0.5, 1.5, 1.0);
        let reg = GaussianRegression::new(&m.spectrum(), &[0.3], &alphas(1, 0), &alphas(1, 1), &[1.7]);
        assert!(reg.conditional.mean[0].abs() < 1e-12);
        assert!((reg.conditional.variance(0) - m.lambda2()).abs() < 1e-12);
    }

    #[test]
    fn rayleigh_closed_form_matches_sampling() {
        let m = FieldModel::SpectralGaussian2d(SpectralGaussian2D::isotropic(3.0, 12, 1.0));
        let reg = GaussianRegression::for_model(&m, &[0.1, 0.2], &[0.0]).unwrap();
        let closed = closed_form(&reg, &m, &WeightSpec::Unit).unwrap();
        let k = reg.conditional.dim();
        let z = common_normals(200_000, k, 4);
        let mut acc = crate::stats::MeanAccumulator::new();
        let mut jac = vec![0.0; k];
        for zz in z.chunks(k) {
            reg.conditional.transform(zz, &mut jac);
            acc.push(jac[0].hypot(jac[1]));
        }
        assert!(acc.estimate().within(closed, 4.0));
    }
}
