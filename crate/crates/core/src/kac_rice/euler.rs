use super::gaussian::{alphas, common_normals, GaussianRegression};
use super::{check_inner, Quadrature, RhsEvaluation};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field_models::FieldModel;
use crate::linalg::{det_square, gaussian_density};
use crate::stats::MeanAccumulator;

/// Expected modified Euler characteristic of the excursion set `{X ≥ u}`,
/// counting interior critical points only:
///
/// `E Φ = (−1)^D ∫_u^∞ dx ∫_box E(det X''(t) | X'(t) = 0, X(t) = x)
///        p_{X(t), X'(t)}(x, 0) dt`.
///
/// The `x` integral is mapped to `(0, 1)` by `x = u + s/(1 − s)` and
/// integrated by the midpoint rule with Richardson extrapolation; the
/// signed determinant is averaged over common conditional draws. The value
/// may be negative.
pub fn euler_char_expectation(
    model: &FieldModel,
    domain: &BoxDomain,
    u: f64,
    quad: &Quadrature,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    check_inner(inner_mc)?;
    quad.validate()?;
    model.validate()?;
    if !model.has_hessian() {
        return Err(Error::Capability(format!(
            "the Euler characteristic needs a C² scalar Gaussian field, got {}",
            model.family()
        )));
    }
    let spec = model.spectrum().expect("C² models are spectral");
    if domain.dim() != spec.dim {
        return Err(Error::Config("box dimension does not match the model".into()));
    }
    if !u.is_finite() {
        return Err(Error::Config("level must be finite".into()));
    }
    let dim = spec.dim;
    let k = dim * dim;
    let z = common_normals(inner_mc, k, seed);
    let sign = if dim % 2 == 0 { 1.0 } else { -1.0 };

    // per-draw quadrature sums for n and n/2 nodes at one point t
    let at_point = |t: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let observed: Vec<Vec<usize>> = alphas(dim, 0).into_iter().chain(alphas(dim, 1)).collect();
        let mut unit = vec![0.0; dim + 1];
        unit[0] = 1.0;
        let reg = GaussianRegression::new(&spec, t, &observed, &alphas(dim, 2), &unit);
        let mut fine = vec![0.0; inner_mc];
        let mut coarse = vec![0.0; inner_mc];
        for (n, sums) in [(quad.nodes, &mut fine), (quad.nodes / 2, &mut coarse)] {
            let h = 1.0 / n as f64;
            let mut hess = vec![0.0; k];
            for i in 0..n {
                let s = (i as f64 + 0.5) * h;
                let x = u + s / (1.0 - s);
                let jac = 1.0 / ((1.0 - s) * (1.0 - s));
                let mut obs = vec![0.0; dim + 1];
                obs[0] = x;
                let p = gaussian_density(&reg.observed_cov, &obs)
                    .map_err(|_| Error::Model("degenerate law of (X, X')".into()))?;
                let w = p * jac * h;
                if w == 0.0 {
                    continue;
                }
                let cond = reg.conditional.recentred(&obs);
                for (j, zz) in z.chunks(k).enumerate() {
                    cond.transform(zz, &mut hess);
                    sums[j] += w * det_square(dim, &hess);
                }
            }
        }
        Ok((fine, coarse))
    };

    let (fine, coarse, vol, nodes) = if model.is_stationary() && !quad.force {
        let (f, c) = at_point(&domain.center())?;
        (f, c, domain.volume(), 1)
    } else {
        let n = quad.nodes;
        let total = n.pow(dim as u32);
        let mut f = vec![0.0; inner_mc];
        let mut c = vec![0.0; inner_mc];
        for node in 0..total {
            let mut rem = node;
            let t: Vec<f64> = (0..dim)
                .map(|a| {
                    let i = rem % n;
                    rem /= n;
                    domain.cell_mid(a, i, n)
                })
                .collect();
            let (ff, cc) = at_point(&t)?;
            f.iter_mut().zip(ff).for_each(|(a, b)| *a += b / total as f64);
            c.iter_mut().zip(cc).for_each(|(a, b)| *a += b / total as f64);
        }
        (f, c, domain.volume(), total)
    };

    let mut extrapolated = MeanAccumulator::new();
    let (mut mf, mut mc) = (0.0, 0.0);
    for (f, c) in fine.iter().zip(&coarse) {
        extrapolated.push((4.0 * f - c) / 3.0);
        mf += f / inner_mc as f64;
        mc += c / inner_mc as f64;
    }
    let scale = sign * vol;
    let mut out = RhsEvaluation::new("euler_characteristic", model, domain, &[u], seed);
    out.value = extrapolated.mean() * scale;
    out.mc_std_error = extrapolated.std_error() * vol;
    out.quadrature_error = (mf - mc).abs() / 3.0 * vol;
    out.outer_nodes = nodes * quad.nodes;
    out.inner_samples = inner_mc as u64;
    Ok(out.finish())
}
