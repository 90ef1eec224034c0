use rand::Rng;

use super::{check_inner, inner_mc, RhsEvaluation, DELTA_CLAMP};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::{FieldModel, ShotNoiseModel};
use crate::rng::{stream_rng, Stream};
use crate::stats::{Estimate, MeanAccumulator};

/// Hard cap on the number of points in the local cube.
const P_CAP: usize = 400;
/// Relative size of the neglected Poisson tail at which the mixture stops.
const TAIL_REL: f64 = 1e-3;

/// `Σ_{q > p} q² P(N = q)` for `N ~ Poisson(μ)`.
pub fn poisson_tail_second_moment(mu: f64, p: usize) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    let mut q = p + 1;
    let mut log_pmf = -mu + q as f64 * mu.ln() - ln_factorial(q);
    let mut sum = 0.0;
    loop {
        let term = (q * q) as f64 * log_pmf.exp();
        sum += term;
        if q as f64 > mu && term <= 1e-18 * sum.max(f64::MIN_POSITIVE) {
            break;
        }
        q += 1;
        log_pmf += mu.ln() - (q as f64).ln();
        if q > p + 100_000 {
            break;
        }
    }
    sum
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

fn pmf(mu: f64, p: usize) -> f64 {
    if mu <= 0.0 {
        return f64::from(u8::from(p == 0));
    }
    (-mu + p as f64 * mu.ln() - ln_factorial(p)).exp()
}

struct Mixture {
    value: f64,
    std_error: f64,
    truncation: f64,
    clamped: f64,
    samples: u64,
    p_max: usize,
}

/// Mixes over the number `p` of Poisson points in the kernel-support cube
/// around the origin. Given `p` points, one impulse is designated with
/// probability `|g_i| / Σ_j |g_j|` and solved for from `X = u`, which gives
/// an unbiased estimate of `E(φ | X = u)·p_X(u)` with bounded summands.
fn mixture(
    s: &ShotNoiseModel,
    u: f64,
    p_max: Option<usize>,
    n: usize,
    seed: u64,
    with_grad: bool,
    exec: Exec,
) -> Result<Mixture> {
    if u == 0.0 {
        return Err(Error::Domain(
            "level 0 carries an atom of the shot-noise law; use a non-zero level".into(),
        ));
    }
    let d = s.dim;
    let eta = s.kernel.radius();
    let mu = s.intensity * (2.0 * eta).powi(d as i32);
    let bound = s.impulse.max_density() * s.impulse.max_abs() / u.abs()
        * if with_grad {
            s.impulse.max_abs() * s.kernel.max_grad()
        } else {
            1.0
        };
    // summand bound is `bound·p` without gradient and `bound·p²` with it
    let tail = |p: usize| {
        if with_grad {
            poisson_tail_second_moment(mu, p)
        } else {
            poisson_tail_first_moment(mu, p)
        }
    };
    let mut value = 0.0;
    let mut var = 0.0;
    let mut clamped = 0.0;
    let mut weight = 0.0;
    let mut p = 0;
    loop {
        p += 1;
        let w = pmf(mu, p);
        let (acc, cl) = conditional_sum(s, u, p, n, seed, with_grad, exec);
        value += w * acc.mean();
        var += (w * acc.std_error()).powi(2);
        clamped += w * cl;
        weight += w;
        let rest = bound * tail(p);
        let done = match p_max {
            Some(m) => p >= m,
            None => rest <= TAIL_REL * value.abs() || rest <= 1e-15 || p >= P_CAP,
        };
        if done {
            return Ok(Mixture {
                value,
                std_error: var.sqrt(),
                truncation: rest,
                clamped: if weight > 0.0 { clamped / weight } else { 0.0 },
                samples: n as u64,
                p_max: p,
            });
        }
    }
}

fn poisson_tail_first_moment(mu: f64, p: usize) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    // Σ_{q>p} q P(N = q) = μ P(N ≥ p)
    let mut q = p;
    let mut sum = 0.0;
    let mut log_pmf = -mu + q as f64 * mu.ln() - ln_factorial(q);
    loop {
        let term = log_pmf.exp();
        sum += term;
        if q as f64 > mu && term <= 1e-18 * sum.max(f64::MIN_POSITIVE) {
            break;
        }
        q += 1;
        log_pmf += mu.ln() - (q as f64).ln();
    }
    mu * sum
}

/// Mean of the designated-impulse summand given exactly `p` points, and the
/// fraction of draws where every kernel weight vanished.
fn conditional_sum(
    s: &ShotNoiseModel,
    u: f64,
    p: usize,
    n: usize,
    seed: u64,
    with_grad: bool,
    exec: Exec,
) -> (MeanAccumulator, f64) {
    let d = s.dim;
    let eta = s.kernel.radius();
    let clamped = std::sync::atomic::AtomicU64::new(0);
    let acc = inner_mc(n, exec, |b, count, acc| {
        let mut rng = stream_rng(seed, ((p as u64) << 32) | b as u64, Stream::InnerMc);
        let mut g = vec![0.0; p];
        let mut grad = vec![0.0; p * d];
        let mut beta = vec![0.0; p];
        let mut x = [0.0; 2];
        let mut local_clamped = 0;
        for _ in 0..count {
            for j in 0..p {
                for xk in x.iter_mut().take(d) {
                    // kernel evaluated at t − τ with t = 0
                    *xk = -eta + 2.0 * eta * rng.random::<f64>();
                }
                g[j] = s.kernel.value_grad(&x[..d], &mut grad[j * d..(j + 1) * d]);
                beta[j] = s.impulse.sample(&mut rng);
            }
            let total: f64 = g.iter().map(|v| v.abs()).sum();
            if total < DELTA_CLAMP {
                local_clamped += 1;
                acc.push(0.0);
                continue;
            }
            let x_all: f64 = g.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mut sum = 0.0;
            for i in 0..p {
                if g[i] == 0.0 {
                    continue;
                }
                let rest = x_all - beta[i] * g[i];
                let star = (u - rest) / g[i];
                let dens = s.impulse.density(star);
                if dens == 0.0 {
                    continue;
                }
                let mut term = dens / total;
                if with_grad {
                    let mut norm2 = 0.0;
                    for k in 0..d {
                        let mut gk = 0.0;
                        for j in 0..p {
                            let bj = if j == i { star } else { beta[j] };
                            gk += bj * grad[j * d + k];
                        }
                        norm2 += gk * gk;
                    }
                    term *= norm2.sqrt();
                }
                sum += term;
            }
            acc.push(sum);
        }
        clamped.fetch_add(local_clamped, std::sync::atomic::Ordering::Relaxed);
    });
    let cl = clamped.into_inner() as f64 / n.max(1) as f64;
    (acc, cl)
}

/// Density of `X(t)` at `u ≠ 0` in the stationary interior.
pub(crate) fn density(s: &ShotNoiseModel, u: f64, n: usize, seed: u64) -> Result<Estimate> {
    s.validate()?;
    let m = mixture(s, u, None, n, seed, false, Exec::default())?;
    Ok(Estimate {
        value: m.value,
        std_error: m.std_error + m.truncation,
        samples: m.samples,
    })
}

/// `E(‖∇X(t)‖ | X(t) = u)` in the stationary interior.
pub(crate) fn conditional_delta(s: &ShotNoiseModel, u: f64, n: usize, seed: u64) -> Result<Estimate> {
    check_inner(n)?;
    s.validate()?;
    let p = mixture(s, u, None, n, seed, false, Exec::default())?;
    let i = mixture(s, u, None, n, seed, true, Exec::default())?;
    if p.value <= 0.0 {
        return Err(Error::Domain(format!("level {u} has zero density")));
    }
    let ratio = i.value / p.value;
    let se_i = i.std_error + i.truncation;
    let se_p = p.std_error + p.truncation;
    Ok(Estimate {
        value: ratio,
        std_error: ((se_i / p.value).powi(2) + (ratio * se_p / p.value).powi(2)).sqrt(),
        samples: i.samples,
    })
}

/// Expected `u`-level measure of a shot-noise field over a box at distance
/// at least η from the boundary of the Poisson domain.
///
/// The field is stationary there, so the result is the volume times the
/// integrand at one point. The integrand is a Poisson mixture over the
/// number of points in the kernel support, truncated at `p_max`
/// (automatic when `None`); the neglected tail is bounded through
/// `sup|β|² · sup β-density · sup‖∇g‖ / |u| · Σ_{q>p_max} q² P(N = q)`.
/// `outer_nodes` reports the number of mixture terms used.
pub fn shotnoise_rhs(
    model: &ShotNoiseModel,
    domain: &BoxDomain,
    u: f64,
    p_max: Option<usize>,
    inner_mc: usize,
    seed: u64,
) -> Result<RhsEvaluation> {
    check_inner(inner_mc)?;
    model.validate()?;
    domain.validate()?;
    if domain.dim() != model.dim {
        return Err(Error::Config("box dimension does not match the shot-noise model".into()));
    }
    if !u.is_finite() {
        return Err(Error::Config("level must be finite".into()));
    }
    if p_max == Some(0) {
        return Err(Error::Config("p_max must be at least 1".into()));
    }
    let interior = model.interior()?;
    if !(interior.contains_closed(&domain.lo) && interior.contains_closed(&domain.hi)) {
        return Err(Error::Domain(format!(
            "box must lie at distance ≥ η = {} from the Poisson domain boundary",
            model.kernel.radius()
        )));
    }
    let m = mixture(model, u, p_max, inner_mc, seed, true, Exec::default())?;
    let vol = domain.volume();
    let wrapped = FieldModel::ShotNoise(model.clone());
    let quantity = if model.dim == 1 { "count" } else { "length" };
    let mut out = RhsEvaluation::new(quantity, &wrapped, domain, &[u], seed);
    out.value = m.value * vol;
    out.mc_std_error = m.std_error * vol;
    out.truncation_error = m.truncation * vol;
    out.clamped_mass = m.clamped;
    out.inner_samples = m.samples;
    out.outer_nodes = m.p_max;
    Ok(out.finish())
}
