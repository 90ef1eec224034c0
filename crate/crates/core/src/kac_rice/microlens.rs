use super::{check_inner, Quadrature, RhsEvaluation, INNER_BATCH};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field_models::microlens::{add_star, uniform_in_disk};
use crate::field_models::{check_supercritical, FieldModel, MicrolensSystem};
use crate::linalg::det_square;
use crate::rng::{stream_rng, Stream};
use crate::stats::{Estimate, MeanAccumulator};

/// Star 0 solves the lens equation `η(x) = y` given the other stars:
/// `(x − ξ₀)/‖x − ξ₀‖² = v` with `v = (a x − y)/(2m) − Σ_{j>0} w(x − ξ_j)`,
/// so `ξ₀ = x − v/‖v‖²`. The inversion has Jacobian determinant
/// `‖v‖⁴` up to the factor `(2m)²`, which gives the density of `η(x)` at
/// `y` given the other stars. Returns `(density, density·|det J|)`.
fn designated(sys: &MicrolensSystem, rest: &[[f64; 2]], x: [f64; 2], y: [f64; 2]) -> (f64, f64) {
    let a = sys.linear_coefficient();
    let m = sys.mass;
    let mut v = [(a * x[0] - y[0]) / (2.0 * m), (a * x[1] - y[1]) / (2.0 * m)];
    for s in rest {
        let z = [x[0] - s[0], x[1] - s[1]];
        let r2 = z[0] * z[0] + z[1] * z[1];
        if r2 == 0.0 {
            return (0.0, 0.0);
        }
        v[0] -= z[0] / r2;
        v[1] -= z[1] / r2;
    }
    let v2 = v[0] * v[0] + v[1] * v[1];
    if v2 == 0.0 {
        return (0.0, 0.0);
    }
    let star = [x[0] - v[0] / v2, x[1] - v[1] / v2];
    if star[0] * star[0] + star[1] * star[1] >= sys.radius * sys.radius {
        return (0.0, 0.0);
    }
    let p = 1.0 / (std::f64::consts::PI * sys.radius * sys.radius) / (4.0 * m * m * v2 * v2);
    let mut value = [0.0; 2];
    let mut jac = [a, 0.0, 0.0, a];
    for s in rest.iter().chain(std::iter::once(&star)) {
        add_star(m, [x[0] - s[0], x[1] - s[1]], &mut value, &mut jac);
    }
    (p, p * det_square(2, &jac).abs())
}

fn check(sys: &MicrolensSystem) -> Result<()> {
    sys.validate()?;
    if sys.star_positions.is_some() {
        return Err(Error::Capability(
            "the microlens right-hand side needs random star positions".into(),
        ));
    }
    Ok(())
}

/// Expected number of images of the source `y` inside `region` for stars
/// uniform on the disk of radius `R`.
///
/// Outer midpoint rule over `region`, inner Monte Carlo over the positions
/// of all stars but the designated one. The same star draws are used at
/// every node and for the half-resolution rule, whose difference is the
/// reported quadrature error.
pub fn microlens_rhs(
    sys: &MicrolensSystem,
    y: [f64; 2],
    region: &BoxDomain,
    quad: &Quadrature,
    inner_mc_samples: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    check(sys)?;
    check_inner(inner_mc_samples)?;
    quad.validate()?;
    region.validate()?;
    if region.dim() != 2 || !(y[0].is_finite() && y[1].is_finite()) {
        return Err(Error::Config("microlensing needs a planar box and a finite source".into()));
    }
    if !check_supercritical(sys) {
        return Err(Error::Capability(format!(
            "microlens right-hand side is implemented for the supercritical regime 1 − κ_c + γ < 0, got {}",
            sys.linear_coefficient()
        )));
    }
    let model = FieldModel::Microlens(sys.clone());
    let mut out = RhsEvaluation::new("count", &model, region, &y, seed);
    if sys.n_stars == 0 {
        let a = sys.linear_coefficient();
        out.value = f64::from(u8::from(region.contains_open(&[y[0] / a, y[1] / a])));
        return Ok(out.finish());
    }
    let n = quad.nodes;
    let rule = |rest: &[[f64; 2]], k: usize| {
        let cell = region.volume() / (k * k) as f64;
        let mut sum = 0.0;
        for j in 0..k {
            for i in 0..k {
                let x = [region.cell_mid(0, i, k), region.cell_mid(1, j, k)];
                sum += designated(sys, rest, x, y).1;
            }
        }
        sum * cell
    };
    let samples = if sys.n_stars == 1 { 1 } else { inner_mc_samples };
    let batches = samples.div_ceil(INNER_BATCH);
    let parts = quad.exec.map(batches, |b| {
        let mut rng = stream_rng(seed, b as u64, Stream::InnerMc);
        let mut fine = MeanAccumulator::new();
        let mut coarse = MeanAccumulator::new();
        let mut rest = vec![[0.0; 2]; sys.n_stars - 1];
        for _ in 0..INNER_BATCH.min(samples - b * INNER_BATCH) {
            for s in rest.iter_mut() {
                *s = uniform_in_disk(&mut rng, sys.radius);
            }
            fine.push(rule(&rest, n));
            coarse.push(rule(&rest, n / 2));
        }
        (fine, coarse)
    });
    let (fine, coarse) = parts.iter().fold(
        (MeanAccumulator::new(), MeanAccumulator::new()),
        |(mut f, mut c), (pf, pc)| {
            f.merge(pf);
            c.merge(pc);
            (f, c)
        },
    );
    out.value = fine.mean();
    out.mc_std_error = if samples > 1 { fine.std_error() } else { 0.0 };
    out.quadrature_error = (fine.mean() - coarse.mean()).abs();
    out.outer_nodes = n * n;
    out.inner_samples = samples as u64;
    Ok(out.finish())
}

/// `E(|det ∂η/∂x| | η(t) = y)` for random star positions.
pub(crate) fn conditional_delta(
    sys: &MicrolensSystem,
    t: &[f64],
    y: &[f64],
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    check(sys)?;
    if sys.n_stars == 0 {
        return Err(Error::Domain("without stars the lens map is deterministic".into()));
    }
    let x = [t[0], t[1]];
    let y = [y[0], y[1]];
    let mut dens = MeanAccumulator::new();
    let mut num = MeanAccumulator::new();
    let mut rng = stream_rng(seed, 0, Stream::InnerMc);
    let mut rest = vec![[0.0; 2]; sys.n_stars - 1];
    for _ in 0..n {
        for s in rest.iter_mut() {
            *s = uniform_in_disk(&mut rng, sys.radius);
        }
        let (p, q) = designated(sys, &rest, x, y);
        dens.push(p);
        num.push(q);
    }
    if dens.mean() <= 0.0 {
        return Err(Error::Domain("the source position has zero density at this point".into()));
    }
    let ratio = num.mean() / dens.mean();
    Ok(Estimate {
        value: ratio,
        std_error: ((num.std_error() / dens.mean()).powi(2)
            + (ratio * dens.std_error() / dens.mean()).powi(2))
        .sqrt(),
        samples: n as u64,
    })
}
