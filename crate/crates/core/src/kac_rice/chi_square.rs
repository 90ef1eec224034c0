use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::gaussian::{alphas, GaussianRegression};
use super::{inner_mc, Integrand};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::ChiSquareField;
use crate::rng::{stream_rng, Stream};

fn check(u: f64) -> Result<()> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!(
            "χ² levels must be positive (the level set at 0 is the zero set of every component), got {u}"
        )));
    }
    Ok(())
}

/// Area of the sphere of radius `r` in `R^n`.
fn sphere_area(n: usize, r: f64) -> f64 {
    let n = n as f64;
    (std::f64::consts::LN_2 + 0.5 * n * std::f64::consts::PI.ln() - ln_gamma(0.5 * n)
        + (n - 1.0) * r.ln())
    .exp()
}

/// Push-forward density `h(u) = ∫_{‖y‖² = u} p(y)/Δ(y) dσ(y)` with `p` the
/// standard normal density on `R^n` and `Δ(y) = 2‖y‖`, averaged over a fixed
/// set of points on the sphere.
pub(crate) fn density(c: &ChiSquareField, u: f64) -> Result<f64> {
    check(u)?;
    let n = c.components;
    let r = u.sqrt();
    let mut rng = stream_rng(0, 0, Stream::Sphere);
    let m = 64;
    let mut sum = 0.0;
    let mut y = vec![0.0; n];
    for k in 0..m {
        if n == 2 {
            let th = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
            y[0] = r * th.cos();
            y[1] = r * th.sin();
        } else {
            sphere_point(&mut rng, r, &mut y);
        }
        let sq: f64 = y.iter().map(|v| v * v).sum();
        let p = (-0.5 * sq - 0.5 * n as f64 * std::f64::consts::TAU.ln()).exp();
        let delta = 2.0 * sq.sqrt();
        sum += p / delta;
    }
    Ok(sphere_area(n, r) * sum / m as f64)
}

fn sphere_point<R: Rng + ?Sized>(rng: &mut R, r: f64, y: &mut [f64]) {
    loop {
        for v in y.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            y.iter_mut().for_each(|v| *v *= r / norm);
            return;
        }
    }
}

/// `E(‖∇X‖ | X(t) = u)·h(u)`: the components `Y(t)` are uniform on the
/// sphere of radius `√u` and each `∇Y_i(t)` is drawn from its regression on
/// `Y_i(t)`.
pub(crate) fn integrand(
    c: &ChiSquareField,
    t: &[f64],
    u: f64,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Integrand> {
    check(u)?;
    let spec = c.base_spectrum()?;
    let dim = spec.dim;
    let reg = GaussianRegression::new(&spec, t, &alphas(dim, 0), &alphas(dim, 1), &[0.0]);
    let cond = &reg.conditional;
    let gain: Vec<f64> = (0..dim).map(|i| cond.gain()[(i, 0)]).collect();
    let k = c.components;
    let r = u.sqrt();
    let acc = inner_mc(n, exec, |b, count, acc| {
        let mut rng = stream_rng(seed, b as u64, Stream::InnerMc);
        let mut y = vec![0.0; k];
        let mut z = vec![0.0; dim];
        let mut dy = vec![0.0; dim];
        for _ in 0..count {
            sphere_point(&mut rng, r, &mut y);
            let mut grad = [0.0; 2];
            for &yi in &y {
                cond.sample_into(&mut rng, &mut z, &mut dy);
                for a in 0..dim {
                    grad[a] += 2.0 * yi * (dy[a] + gain[a] * yi);
                }
            }
            acc.push(grad[0].hypot(grad[1]));
        }
    });
    let h = density(c, u)?;
    let e = acc.estimate();
    Ok(Integrand {
        value: e.value * h,
        std_error: e.std_error * h,
        samples: e.samples,
    })
}
