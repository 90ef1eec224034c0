use super::gaussian::common_normals;
use super::{check_inner, IntegrandGap, Quadrature, RhsEvaluation};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field_models::FieldModel;
use crate::linalg::abs_product_mean;
use crate::stats::MeanAccumulator;

/// Two-point law of a stationary process on the line at lag `τ`.
struct TwoPoint {
    a2: Vec<f64>,
    w: Vec<f64>,
    l0: f64,
    l2: f64,
}

/// Conditional law of `(X'(0), X'(τ))` given `X(0) = X(τ) = u`.
struct Pair {
    density: f64,
    mean: [f64; 2],
    sd: f64,
    rho: f64,
}

impl TwoPoint {
    /// `(λ0 − r(τ), λ0 + r(τ))`, both computed without cancellation.
    fn gaps(&self, tau: f64) -> (f64, f64) {
        let mut minus = 0.0;
        let mut plus = 0.0;
        for (a2, w) in self.a2.iter().zip(&self.w) {
            let (s, c) = (0.5 * w * tau).sin_cos();
            minus += 2.0 * a2 * s * s;
            plus += 2.0 * a2 * c * c;
        }
        (minus, plus)
    }

    fn pair(&self, tau: f64, u: f64) -> Pair {
        let (mut r, mut r1, mut r2) = (0.0, 0.0, 0.0);
        for (a2, w) in self.a2.iter().zip(&self.w) {
            let (s, c) = (w * tau).sin_cos();
            r += a2 * c;
            r1 -= a2 * w * s;
            r2 -= a2 * w * w * c;
        }
        let (minus, plus) = self.gaps(tau);
        let det = minus * plus;
        let density = (-u * u / plus).exp() / (std::f64::consts::TAU * det.sqrt());
        let m = u * r1 / plus;
        let var = (self.l2 - self.l0 * r1 * r1 / det).max(0.0);
        let cov = -r2 - r * r1 * r1 / det;
        let sd = var.sqrt();
        let rho = if var > 0.0 { (cov / var).clamp(-1.0, 1.0) } else { 0.0 };
        Pair {
            density,
            mean: [-m, m],
            sd,
            rho,
        }
    }
}

/// `E[N(N − 1)]` for the number `N` of `u`-crossings of a stationary
/// Gaussian process on an interval:
///
/// `E N(N−1) = 2 ∫_0^T (T − τ) E(|X'(0) X'(τ)| | X(0) = X(τ) = u)
///             p_{X(0), X(τ)}(u, u) dτ`.
///
/// The band `τ < h` around the diagonal is excluded and removed by
/// Richardson extrapolation over `h` and `2h`. Lags where the two-point
/// law degenerates (`|r(τ₀)| = λ0`) are cut out and reported as gaps; when
/// `X(τ₀) = ±X(0)` maps the level to itself they carry the singular mass
/// `2(T − τ₀)·ρ₁` of pairs of crossings exactly `τ₀` apart, with `ρ₁` the
/// crossing intensity.
pub fn second_factorial_moment_rhs(
    model: &FieldModel,
    interval: &BoxDomain,
    u: f64,
    quad: &Quadrature,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    check_inner(inner_mc)?;
    quad.validate()?;
    model.validate()?;
    let FieldModel::SpectralGaussian1d(m) = model else {
        return Err(Error::Capability(format!(
            "the second factorial moment is implemented for Gaussian processes on the line, got {}",
            model.family()
        )));
    };
    interval.validate()?;
    if interval.dim() != 1 || !u.is_finite() {
        return Err(Error::Config("need a 1-dimensional interval and a finite level".into()));
    }
    let tp = TwoPoint {
        a2: m.amplitudes.iter().map(|a| a * a).collect(),
        w: m.frequencies.clone(),
        l0: m.lambda0(),
        l2: m.lambda2(),
    };
    let len = interval.side(0);
    let omega = (tp.l2 / tp.l0).sqrt();
    let h = (0.05 / omega).min(len / 64.0);
    let band = 2.0 * h;

    let lags = degenerate_lags(&tp, h, len, quad.nodes);
    let rho1 = omega / std::f64::consts::PI * (-u * u / (2.0 * tp.l0)).exp();
    let mut out = RhsEvaluation::new("factorial_moment_2", model, interval, &[u], seed);
    let mut singular = 0.0;
    for &(tau0, c) in &lags {
        let carries = (c * u - u).abs() <= 1e-12 * u.abs().max(1.0);
        let mass = if carries && tau0 < len {
            2.0 * (len - tau0) * rho1
        } else {
            0.0
        };
        singular += mass;
        out.gaps.push(IntegrandGap {
            location: tau0,
            half_width: band,
            singular_contribution: mass,
        });
    }

    let centred = u == 0.0;
    let z = if centred { Vec::new() } else { common_normals(inner_mc, 2, seed) };
    let samples = if centred { 1 } else { inner_mc };
    let per_sample = |lo: f64, n: usize| -> Vec<f64> {
        let mut acc = vec![0.0; samples];
        for (a, b) in pieces(lo, len, &lags, band) {
            let k = ((n as f64 * (b - a) / len).ceil() as usize).max(2);
            let dt = (b - a) / k as f64;
            for i in 0..k {
                let tau = a + (i as f64 + 0.5) * dt;
                let p = tp.pair(tau, u);
                let w = 2.0 * (len - tau) * p.density * dt;
                if centred {
                    acc[0] += w * abs_product_mean(p.sd, p.sd, p.rho);
                } else {
                    let q = (1.0 - p.rho * p.rho).sqrt();
                    for (j, zz) in z.chunks(2).enumerate() {
                        let z1 = p.mean[0] + p.sd * zz[0];
                        let z2 = p.mean[1] + p.sd * (p.rho * zz[0] + q * zz[1]);
                        acc[j] += w * (z1 * z2).abs();
                    }
                }
            }
        }
        acc
    };
    let n = quad.nodes;
    let i_h = per_sample(h, n);
    let i_2h = per_sample(2.0 * h, n);
    let i_coarse = per_sample(h, n / 2);
    let mut extrapolated = MeanAccumulator::new();
    for (a, b) in i_h.iter().zip(&i_2h) {
        extrapolated.push((4.0 * a - b) / 3.0);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mh, m2h, mc) = (mean(&i_h), mean(&i_2h), mean(&i_coarse));
    out.value = extrapolated.mean() + singular;
    out.mc_std_error = extrapolated.std_error();
    out.quadrature_error = (mh - mc).abs() + (mh - m2h).abs() / 3.0;
    out.outer_nodes = n;
    out.inner_samples = samples as u64;
    Ok(out.finish())
}

/// Sub-intervals of `[lo, len]` that avoid the bands around degenerate lags.
fn pieces(lo: f64, len: f64, lags: &[(f64, f64)], band: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = lo;
    for &(tau0, _) in lags {
        let (s, e) = (tau0 - band, tau0 + band);
        if s > a {
            out.push((a, s.min(len)));
        }
        a = a.max(e);
    }
    if a < len {
        out.push((a, len));
    }
    out
}

/// Lags in `[h, len]` where `|r(τ)| = λ0`, with the sign of `r`.
fn degenerate_lags(tp: &TwoPoint, h: f64, len: f64, nodes: usize) -> Vec<(f64, f64)> {
    let g = |tau: f64| {
        let (minus, plus) = tp.gaps(tau);
        minus.min(plus)
    };
    let n = 16 * nodes;
    let step = (len - h) / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| g(h + i as f64 * step)).collect();
    let mut lags: Vec<(f64, f64)> = Vec::new();
    for i in 0..=n {
        let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
        let right = if i < n { vals[i + 1] } else { f64::INFINITY };
        if vals[i] > 1e-6 * tp.l0 || vals[i] > left || vals[i] > right {
            continue;
        }
        // golden-section refinement of the local minimum
        let (mut a, mut b) = (h + (i as f64 - 1.0) * step, h + (i as f64 + 1.0) * step);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if g(c) < g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let tau0 = 0.5 * (a + b);
        if g(tau0) <= 1e-12 * tp.l0 && lags.iter().all(|&(t, _)| (t - tau0).abs() > step) {
            let (minus, plus) = tp.gaps(tau0);
            lags.push((tau0, if minus < plus { 1.0 } else { -1.0 }));
        }
    }
    lags
}
