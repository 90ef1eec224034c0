//! Stationary Gaussian fields as finite random trigonometric sums
//!
//! `X(t) = Σ_k a_k (ξ_k cos⟨κ_k, t⟩ + ξ'_k sin⟨κ_k, t⟩)` with i.i.d. standard
//! normal `ξ, ξ'`. The field is exactly Gaussian and stationary with
//! covariance `r(τ) = Σ_k a_k² cos⟨κ_k, τ⟩`, and every derivative is available
//! in closed form.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{config_err, Field, FieldModel};
use crate::error::{FieldError, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGaussian1D {
    /// Angular frequencies, radians per unit t.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl SpectralGaussian1D {
    pub fn single_harmonic(frequency: f64, amplitude: f64) -> Self {
        Self {
            frequencies: vec![frequency],
            amplitudes: vec![amplitude],
        }
    }

    /// `n` equally spaced frequencies on `[lo, hi]` with equal amplitudes
    /// summing to the given variance.
    pub fn band(n: usize, lo: f64, hi: f64, variance: f64) -> Self {
        let frequencies = (0..n)
            .map(|k| {
                if n == 1 {
                    lo
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect();
        Self {
            frequencies,
            amplitudes: vec![(variance / n as f64).sqrt(); n],
        }
    }

    /// Variance of `X(t)`.
    pub fn lambda0(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Variance of `X'(t)`.
    pub fn lambda2(&self) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.frequencies)
            .map(|(a, w)| a * a * w * w)
            .sum()
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            dim: 1,
            waves: self.frequencies.iter().map(|&w| [w, 0.0]).collect(),
            amps: self.amplitudes.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.is_empty() || self.frequencies.len() != self.amplitudes.len() {
            return config_err("spectral model needs equally many (≥1) frequencies and amplitudes");
        }
        if self.frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return config_err("frequencies must be positive and finite");
        }
        if self.amplitudes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return config_err("amplitudes must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGaussian2D {
    pub wave_vectors: Vec<[f64; 2]>,
    pub amplitudes: Vec<f64>,
}

impl SpectralGaussian2D {
    /// Wave vectors of norm `kappa` at the `n` equally spaced angles `πk/n`.
    /// For `n ≥ 2` the covariance of the gradient is `λ0·κ²/2·I`.
    pub fn isotropic(kappa: f64, n: usize, variance: f64) -> Self {
        let wave_vectors = (0..n)
            .map(|k| {
                let th = PI * k as f64 / n as f64;
                [kappa * th.cos(), kappa * th.sin()]
            })
            .collect();
        Self {
            wave_vectors,
            amplitudes: vec![(variance / n as f64).sqrt(); n],
        }
    }

    /// Wave vectors drawn once, uniformly on the circle of radius `kappa`.
    pub fn isotropic_random(kappa: f64, n: usize, variance: f64, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0, Stream::Realization);
        let wave_vectors = (0..n)
            .map(|_| {
                let th: f64 = rng.random::<f64>() * 2.0 * PI;
                [kappa * th.cos(), kappa * th.sin()]
            })
            .collect();
        Self {
            wave_vectors,
            amplitudes: vec![(variance / n as f64).sqrt(); n],
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    /// Covariance matrix of the gradient, `Σ a² κ κᵀ`.
    pub fn lambda2(&self) -> [[f64; 2]; 2] {
        self.spectrum().second_moments()
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            dim: 2,
            waves: self.wave_vectors.clone(),
            amps: self.amplitudes.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.wave_vectors.is_empty() || self.wave_vectors.len() != self.amplitudes.len() {
            return config_err("spectral model needs equally many (≥1) wave vectors and amplitudes");
        }
        if self
            .wave_vectors
            .iter()
            .any(|k| !(k[0].is_finite() && k[1].is_finite()) || k[0] == 0.0 && k[1] == 0.0)
        {
            return config_err("wave vectors must be finite and nonzero");
        }
        if self.amplitudes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return config_err("amplitudes must be positive and finite");
        }
        Ok(())
    }
}

/// The gradient `∇Y` of a spectral Gaussian field `Y`, viewed as a field
/// `R^D -> R^D` whose Jacobian is the Hessian of `Y`. Its zeros are the
/// critical points of `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianGradient {
    pub base: Box<FieldModel>,
}

impl GaussianGradient {
    pub fn new(base: FieldModel) -> Self {
        Self {
            base: Box::new(base),
        }
    }

    pub fn dim(&self) -> usize {
        self.base.input_dim()
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        self.base.spectrum().ok_or_else(|| {
            crate::error::Error::Capability(format!(
                "gradient fields need a spectral Gaussian base, got {}",
                self.base.family()
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum()?;
        self.base.validate()
    }
}

/// Dimension-agnostic view of a spectral Gaussian model (D ∈ {1, 2}).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub dim: usize,
    /// Wave vectors; the second entry is zero when `dim == 1`.
    pub waves: Vec<[f64; 2]>,
    pub amps: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn variance(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// `Σ a² κ_i κ_j`, the covariance of the gradient.
    pub fn second_moments(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for (k, a) in self.waves.iter().zip(&self.amps) {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += a * a * k[i] * k[j];
                }
            }
        }
        m
    }

    /// Covariance `r(τ) = Cov(X(t), X(t+τ))`.
    pub fn covariance(&self, tau: &[f64]) -> f64 {
        self.waves
            .iter()
            .zip(&self.amps)
            .map(|(k, a)| a * a * self.phase(k, tau).cos())
            .sum()
    }

    #[inline]
    fn phase(&self, k: &[f64; 2], t: &[f64]) -> f64 {
        if self.dim == 1 {
            k[0] * t[0]
        } else {
            k[0] * t[0] + k[1] * t[1]
        }
    }

    /// Coefficients of the Gaussian variable `∂^α X(t)` on the underlying
    /// standard normals, ordered `(ξ_1..ξ_K, ξ'_1..ξ'_K)`. The covariance of
    /// any family of such variables is the Gram matrix of their coefficients.
    pub fn functional(&self, t: &[f64], alpha: &[usize]) -> Vec<f64> {
        let n = self.len();
        let order: usize = alpha.iter().sum();
        let mut out = vec![0.0; 2 * n];
        for (k, (w, a)) in self.waves.iter().zip(&self.amps).enumerate() {
            let (s, c) = self.phase(w, t).sin_cos();
            let scale = a * alpha
                .iter()
                .enumerate()
                .map(|(i, &p)| w[i].powi(p as i32))
                .product::<f64>();
            let (cc, sc) = match order % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            out[k] = scale * cc;
            out[n + k] = scale * sc;
        }
        out
    }

    /// Freezes one realization; `index` selects an independent sub-stream.
    pub fn sample(&self, seed: u64, index: u64) -> SpectralRealization {
        let mut rng = stream_rng(seed, index, Stream::Realization);
        let mut p = Vec::with_capacity(self.len());
        let mut q = Vec::with_capacity(self.len());
        for a in &self.amps {
            let xi: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            p.push(a * xi);
            q.push(a * xi2);
        }
        SpectralRealization {
            dim: self.dim,
            waves: self.waves.clone(),
            p,
            q,
        }
    }
}

/// A frozen spectral Gaussian realization, stored as `p_k = a_k ξ_k`,
/// `q_k = a_k ξ'_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRealization {
    dim: usize,
    waves: Vec<[f64; 2]>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl SpectralRealization {
    /// Builds a realization from explicit coefficients
    /// `X(t) = Σ p_k cos⟨κ_k,t⟩ + q_k sin⟨κ_k,t⟩`.
    pub fn from_coefficients(dim: usize, waves: Vec<[f64; 2]>, p: Vec<f64>, q: Vec<f64>) -> Self {
        assert!(dim == 1 || dim == 2);
        assert!(waves.len() == p.len() && p.len() == q.len());
        Self { dim, waves, p, q }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.p
    }

    pub fn sin_coefficients(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    fn trig(&self, k: usize, t: &[f64]) -> (f64, f64) {
        let w = &self.waves[k];
        if self.dim == 1 {
            (w[0] * t[0]).sin_cos()
        } else {
            let (sx, cx) = (w[0] * t[0]).sin_cos();
            let (sy, cy) = (w[1] * t[1]).sin_cos();
            (sx * cy + cx * sy, cx * cy - sx * sy)
        }
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        (0..self.p.len())
            .map(|k| {
                let (s, c) = self.trig(k, t);
                self.p[k] * c + self.q[k] * s
            })
            .sum()
    }

    /// Value, gradient and row-major Hessian at `t`.
    pub fn eval2(&self, t: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let dim = self.dim;
        grad[..dim].iter_mut().for_each(|g| *g = 0.0);
        hess[..dim * dim].iter_mut().for_each(|h| *h = 0.0);
        let mut v = 0.0;
        for k in 0..self.p.len() {
            let (s, c) = self.trig(k, t);
            let w = &self.waves[k];
            let val = self.p[k] * c + self.q[k] * s;
            let der = -self.p[k] * s + self.q[k] * c;
            v += val;
            for i in 0..dim {
                grad[i] += w[i] * der;
                for j in 0..dim {
                    hess[i * dim + j] -= w[i] * w[j] * val;
                }
            }
        }
        v
    }

    /// The gradient field `∇X` of this realization.
    pub fn into_gradient(self) -> GradientRealization {
        GradientRealization(self)
    }
}

impl Field for SpectralRealization {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) -> Result<(), FieldError> {
        let mut v = 0.0;
        jac[..self.dim].iter_mut().for_each(|g| *g = 0.0);
        for k in 0..self.p.len() {
            let (s, c) = self.trig(k, t);
            let w = &self.waves[k];
            v += self.p[k] * c + self.q[k] * s;
            let der = -self.p[k] * s + self.q[k] * c;
            for i in 0..self.dim {
                jac[i] += w[i] * der;
            }
        }
        value[0] = v;
        Ok(())
    }

    fn fill_lattice(
        &self,
        axes: &[Vec<f64>],
        values: &mut [f64],
        jacobians: &mut [f64],
    ) -> Result<(), FieldError> {
        if self.dim != 2 {
            let mut t = [0.0];
            for (node, &x) in axes[0].iter().enumerate() {
                t[0] = x;
                self.eval_into(&t, &mut values[node..node + 1], &mut jacobians[node..node + 1])?;
            }
            return Ok(());
        }
        // Separable phase tables; the per-node arithmetic is identical to
        // `trig` + `eval_into`, so lattice values match pointwise evaluation.
        let nk = self.p.len();
        let (xs, ys) = (&axes[0], &axes[1]);
        let tab = |axis: &[f64], comp: usize| -> Vec<(f64, f64)> {
            let mut out = Vec::with_capacity(axis.len() * nk);
            for &x in axis {
                for w in &self.waves {
                    out.push((w[comp] * x).sin_cos());
                }
            }
            out
        };
        let tx = tab(xs, 0);
        let ty = tab(ys, 1);
        for (j, _) in ys.iter().enumerate() {
            let row_y = &ty[j * nk..(j + 1) * nk];
            for (i, _) in xs.iter().enumerate() {
                let row_x = &tx[i * nk..(i + 1) * nk];
                let node = j * xs.len() + i;
                let (mut v, mut g0, mut g1) = (0.0, 0.0, 0.0);
                for k in 0..nk {
                    let (sx, cx) = row_x[k];
                    let (sy, cy) = row_y[k];
                    let (s, c) = (sx * cy + cx * sy, cx * cy - sx * sy);
                    let w = &self.waves[k];
                    v += self.p[k] * c + self.q[k] * s;
                    let der = -self.p[k] * s + self.q[k] * c;
                    g0 += w[0] * der;
                    g1 += w[1] * der;
                }
                values[node] = v;
                jacobians[2 * node] = g0;
                jacobians[2 * node + 1] = g1;
            }
        }
        Ok(())
    }
}

/// `∇X` of a spectral realization; the Jacobian is the Hessian of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRealization(SpectralRealization);

impl GradientRealization {
    pub fn base(&self) -> &SpectralRealization {
        &self.0
    }
}

impl Field for GradientRealization {
    fn input_dim(&self) -> usize {
        self.0.dim
    }

    fn output_dim(&self) -> usize {
        self.0.dim
    }

    fn eval_into(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) -> Result<(), FieldError> {
        self.0.eval2(t, value, jac);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central_diff(f: &dyn Fn(&[f64]) -> f64, t: &[f64], i: usize, h: f64) -> f64 {
        let mut a = t.to_vec();
        let mut b = t.to_vec();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    #[test]
    fn single_harmonic_is_xi_cos_plus_xi2_sin() {
        let spec = SpectralGaussian1D::single_harmonic(1.0, 1.0).spectrum();
        let r = spec.sample(11, 0);
        let (xi, xi2) = (r.p[0], r.q[0]);
        for &t in &[0.0, 0.3, 2.0, -1.7] {
            let v = r.value(&[t]);
            assert!((v - (xi * t.cos() + xi2 * t.sin())).abs() < 1e-14);
        }
    }

    #[test]
    fn cos_at_zero() {
        let r = SpectralRealization::from_coefficients(1, vec![[1.0, 0.0]], vec![1.0], vec![0.0]);
        let jet = r.eval(&[0.0]).unwrap();
        assert_eq!(jet.value[0], 1.0);
        assert_eq!(jet.jacobian[0], 0.0);
    }

    #[test]
    fn same_seed_same_realization() {
        let spec = SpectralGaussian1D::band(50, 0.5, 1.5, 1.0).spectrum();
        assert_eq!(spec.sample(5, 0), spec.sample(5, 0));
        assert_ne!(spec.sample(5, 0), spec.sample(6, 0));
    }

    #[test]
    fn moments_of_band_model() {
        let m = SpectralGaussian1D::band(50, 0.5, 1.5, 1.0);
        assert!((m.lambda0() - 1.0).abs() < 1e-12);
        let iso = SpectralGaussian2D::isotropic(3.0, 8, 2.0);
        let l2 = iso.lambda2();
        assert!((l2[0][0] - 2.0 * 9.0 / 2.0).abs() < 1e-12);
        assert!((l2[1][1] - 2.0 * 9.0 / 2.0).abs() < 1e-12);
        assert!(l2[0][1].abs() < 1e-12);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let spec = SpectralGaussian2D::isotropic(4.0, 6, 1.0).spectrum();
        let r = spec.sample(3, 0);
        let t = [0.31, -0.72];
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        r.eval2(&t, &mut g, &mut h);
        for i in 0..2 {
            for j in 0..2 {
                let gi = |x: &[f64]| {
                    let mut g = [0.0; 2];
                    let mut h = [0.0; 4];
                    r.eval2(x, &mut g, &mut h);
                    g[i]
                };
                let fd = central_diff(&gi, &t, j, 1e-5);
                assert!((fd - h[i * 2 + j]).abs() < 1e-6 * (1.0 + h[i * 2 + j].abs()));
            }
        }
    }

    #[test]
    fn functional_reproduces_realization() {
        let spec = SpectralGaussian2D::isotropic(2.5, 5, 1.0).spectrum();
        let r = spec.sample(9, 0);
        let z: Vec<f64> = r
            .p
            .iter()
            .zip(&spec.amps)
            .map(|(p, a)| p / a)
            .chain(r.q.iter().zip(&spec.amps).map(|(q, a)| q / a))
            .collect();
        let t = [0.4, 1.3];
        let dot = |c: Vec<f64>| c.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        let v = r.eval2(&t, &mut g, &mut h);
        assert!((dot(spec.functional(&t, &[0, 0])) - v).abs() < 1e-12);
        assert!((dot(spec.functional(&t, &[1, 0])) - g[0]).abs() < 1e-12);
        assert!((dot(spec.functional(&t, &[0, 1])) - g[1]).abs() < 1e-12);
        assert!((dot(spec.functional(&t, &[1, 1])) - h[1]).abs() < 1e-11);
        assert!((dot(spec.functional(&t, &[0, 2])) - h[3]).abs() < 1e-11);
    }

    #[test]
    fn lattice_matches_pointwise_bitwise() {
        let spec = SpectralGaussian2D::isotropic(7.0, 9, 1.0).spectrum();
        let r = spec.sample(1, 0);
        let xs: Vec<f64> = (0..17).map(|i| -0.5 + i as f64 / 16.0).collect();
        let ys: Vec<f64> = (0..13).map(|i| 0.25 + i as f64 / 12.0).collect();
        let mut vals = vec![0.0; 17 * 13];
        let mut jacs = vec![0.0; 2 * 17 * 13];
        r.fill_lattice(&[xs.clone(), ys.clone()], &mut vals, &mut jacs).unwrap();
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                let jet = r.eval(&[x, y]).unwrap();
                let n = j * 17 + i;
                assert_eq!(jet.value[0].to_bits(), vals[n].to_bits());
                assert_eq!(jet.jacobian[0].to_bits(), jacs[2 * n].to_bits());
                assert_eq!(jet.jacobian[1].to_bits(), jacs[2 * n + 1].to_bits());
            }
        }
    }
}
