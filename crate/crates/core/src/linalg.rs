//! Small dense linear algebra and Gaussian conditioning.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Round-off floor below which a Gram determinant is treated as zero.
pub const GRAM_FLOOR: f64 = 1e-14;

/// `sqrt(det(M Mᵀ))` for a row-major `d × cols` matrix, `d ≤ cols`.
pub fn normal_jacobian_slice(d: usize, cols: usize, m: &[f64]) -> f64 {
    debug_assert_eq!(m.len(), d * cols);
    match d {
        0 => 1.0,
        1 => m.iter().map(|x| x * x).sum::<f64>().sqrt(),
        _ if d == cols && d == 2 => (m[0] * m[3] - m[1] * m[2]).abs(),
        _ if d == cols && d == 3 => det3(m).abs(),
        2 => {
            let (a, b) = m.split_at(cols);
            let aa: f64 = a.iter().map(|x| x * x).sum();
            let bb: f64 = b.iter().map(|x| x * x).sum();
            let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            guarded_sqrt(aa * bb - ab * ab, aa * bb)
        }
        _ => {
            let mat = DMatrix::from_row_slice(d, cols, m);
            let gram = &mat * mat.transpose();
            let scale = (0..d).map(|i| gram[(i, i)]).product::<f64>();
            guarded_sqrt(gram.determinant(), scale)
        }
    }
}

fn guarded_sqrt(det: f64, scale: f64) -> f64 {
    if det <= GRAM_FLOOR * scale.max(f64::MIN_POSITIVE) {
        0.0
    } else {
        det.sqrt()
    }
}

#[inline]
pub fn det3(m: &[f64]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Determinant of a row-major square matrix.
pub fn det_square(n: usize, m: &[f64]) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => det3(m),
        _ => DMatrix::from_row_slice(n, n, m).determinant(),
    }
}

/// Number of negative eigenvalues of a symmetric row-major matrix.
pub fn morse_index(n: usize, m: &[f64]) -> usize {
    match n {
        1 => usize::from(m[0] < 0.0),
        2 => {
            let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
            let det = a * c - b * b;
            if det < 0.0 {
                1
            } else if a + c < 0.0 {
                2
            } else {
                0
            }
        }
        _ => {
            let s = DMatrix::from_row_slice(n, n, m);
            let sym = (&s + s.transpose()) * 0.5;
            sym.symmetric_eigenvalues().iter().filter(|&&l| l < 0.0).count()
        }
    }
}

/// Density of `N(0, cov)` at `x`.
pub fn gaussian_density(cov: &DMatrix<f64>, x: &[f64]) -> Result<f64> {
    let n = cov.nrows();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("covariance is not positive definite".into()))?;
    let xv = DVector::from_column_slice(x);
    let sol = chol.solve(&xv);
    let quad = xv.dot(&sol);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok((-0.5 * quad - 0.5 * logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()).exp())
}

/// Law of a Gaussian vector `A z` conditioned on `B z = u`, with `z` standard
/// normal: `A z | B z = u ~ N(A B⁺ u, R Rᵀ)` with `R = A (I - B⁺B)`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    factor: DMatrix<f64>,
    /// Regression matrix `A B⁺`: the conditional mean is `gain · u`.
    gain: DMatrix<f64>,
}

impl ConditionalGaussian {
    /// `targets` and `observed` are rows of coefficients on the same
    /// standard-normal basis.
    pub fn from_functionals(targets: &[Vec<f64>], observed: &[Vec<f64>], values: &[f64]) -> Self {
        let m = targets.first().or(observed.first()).map_or(0, Vec::len);
        let a = rows_to_matrix(targets, m);
        let (mean, resid, gain) = if observed.is_empty() {
            (vec![0.0; targets.len()], a, DMatrix::zeros(targets.len(), 0))
        } else {
            let b = rows_to_matrix(observed, m);
            let pinv = pseudo_inverse_sym(&(&b * b.transpose()));
            // B⁺ = Bᵀ (B Bᵀ)⁺
            let bplus = b.transpose() * &pinv;
            let gain = &a * &bplus;
            let u = DVector::from_column_slice(values);
            let mean = (&gain * u).iter().copied().collect();
            let resid = &a - &gain * &b;
            (mean, resid, gain)
        };
        let cov = &resid * resid.transpose();
        let factor = psd_sqrt(&cov);
        Self {
            mean,
            cov,
            factor,
            gain,
        }
    }

    /// The same conditional law for other observed values.
    pub fn recentred(&self, values: &[f64]) -> Self {
        let u = DVector::from_column_slice(values);
        Self {
            mean: (&self.gain * u).iter().copied().collect(),
            ..self.clone()
        }
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws one conditional sample into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        let n = self.dim();
        for zi in z[..n].iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        self.transform(&z[..n], out);
    }

    /// `mean + L z` for a given standard-normal vector `z`.
    pub fn transform(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = self.mean[i];
            for j in 0..n {
                s += self.factor[(i, j)] * z[j];
            }
            out[i] = s;
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.cov[(i, i)].max(0.0)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Moore-Penrose inverse of a symmetric PSD matrix with a relative
/// eigenvalue cutoff.
pub fn pseudo_inverse_sym(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = 1e-13 * top;
    let inv = eig
        .eigenvalues
        .map(|l| if l > cut { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Symmetric square root of a PSD matrix; tiny or negative eigenvalues are
/// clamped to zero.
pub fn psd_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = 1e-12 * top;
    let root = eig
        .eigenvalues
        .map(|l| if l > cut { l.sqrt() } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `E|Z|` for `Z ~ N(mu, sigma²)`.
pub fn folded_normal_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.abs();
    }
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * (mu / sigma).powi(2)).exp()
        + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma))
}

/// `E[Z⁺]` for `Z ~ N(mu, sigma²)`.
pub fn positive_part_mean(mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return mu.max(0.0);
    }
    mu * normal_cdf(mu / sigma) + sigma * normal_pdf(mu / sigma)
}

/// `E|Z₁ Z₂|` for a centered bivariate normal with the given standard
/// deviations and correlation.
pub fn abs_product_mean(s1: f64, s2: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    s1 * s2 * (2.0 / std::f64::consts::PI) * ((1.0 - rho * rho).sqrt() + rho * rho.asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn conditioning_matches_regression_formula() {
        // z in R^3; X = z0 + z1, Y = (z0, z2)
        let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let b = vec![vec![1.0, 1.0, 0.0]];
        let c = ConditionalGaussian::from_functionals(&a, &b, &[2.0]);
        assert!((c.mean[0] - 1.0).abs() < 1e-12);
        assert!(c.mean[1].abs() < 1e-12);
        assert!((c.cov[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((c.cov[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(c.cov[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn degenerate_conditioning_is_deterministic() {
        let a = vec![vec![2.0, 0.0]];
        let b = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        let c = ConditionalGaussian::from_functionals(&a, &b, &[1.5, 3.0]);
        assert!((c.mean[0] - 3.0).abs() < 1e-12);
        let mut rng = stream_rng(1, 0, Stream::Test);
        let mut z = [0.0];
        let mut out = [0.0];
        c.sample_into(&mut rng, &mut z, &mut out);
        assert!((out[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_against_monte_carlo() {
        let mut rng = stream_rng(2, 0, Stream::Test);
        let n = 400_000;
        let (mu, s) = (0.7, 1.3);
        let (mut fold, mut pos, mut prod) = (0.0, 0.0, 0.0);
        let rho: f64 = -0.4;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let w: f64 = rng.sample(StandardNormal);
            let x = mu + s * z;
            fold += x.abs();
            pos += x.max(0.0);
            prod += (2.0 * z * 0.5 * (rho * z + (1.0 - rho * rho).sqrt() * w)).abs();
        }
        let n = n as f64;
        assert!((fold / n - folded_normal_mean(mu, s)).abs() < 0.01);
        assert!((pos / n - positive_part_mean(mu, s)).abs() < 0.01);
        assert!((prod / n - abs_product_mean(2.0, 0.5, rho)).abs() < 0.01);
    }

    #[test]
    fn gram_determinant_cases() {
        assert_eq!(normal_jacobian_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), 1.0);
        assert_eq!(normal_jacobian_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]), 1.0);
        assert_eq!(normal_jacobian_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]), 0.0);
        assert_eq!(normal_jacobian_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]), 0.0);
        let m: [f64; 12] = [1.0, 2.0, 0.5, -1.0, 0.3, 2.0, 0.1, 0.4, -0.7, 1.1, 0.2, 0.9];
        let direct = {
            let mat = DMatrix::<f64>::from_row_slice(3, 4, &m);
            (&mat * mat.transpose()).determinant().sqrt()
        };
        assert!((normal_jacobian_slice(3, 4, &m) - direct).abs() < 1e-12);
    }

    #[test]
    fn morse_index_of_diagonal() {
        assert_eq!(morse_index(2, &[1.0, 0.0, 0.0, 2.0]), 0);
        assert_eq!(morse_index(2, &[1.0, 0.0, 0.0, -2.0]), 1);
        assert_eq!(morse_index(2, &[-1.0, 0.0, 0.0, -2.0]), 2);
        assert_eq!(morse_index(1, &[-1.0]), 1);
    }
}
