use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::{stream_rng, Stream};

/// A `d`-dimensional subspace of `R^D` given by an orthonormal basis
/// (row-major `D × d`, one basis vector per column).
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannElement {
    ambient: usize,
    dim: usize,
    basis: Vec<f64>,
}

impl GrassmannElement {
    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// Column `j` of the basis.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.ambient).map(|i| self.basis[i * self.dim + j]).collect()
    }

    /// Largest deviation of `basisᵀ basis` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                let dot: f64 = (0..self.ambient)
                    .map(|i| self.basis[i * self.dim + a] * self.basis[i * self.dim + b])
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Haar-distributed element of `G(D, d)`: the span of a `D × d` standard
/// Gaussian matrix, orthonormalized with a positive-diagonal QR convention.
pub fn sample_haar_grassmann(ambient: usize, d: usize, seed: u64) -> GrassmannElement {
    assert!(1 <= d && d <= ambient, "need 1 ≤ d ≤ D");
    let mut rng = stream_rng(seed, 0, Stream::Haar);
    let mut basis = vec![0.0; ambient * d];
    haar_basis_into(&mut rng, ambient, d, &mut basis);
    GrassmannElement {
        ambient,
        dim: d,
        basis,
    }
}

/// Fills `basis` (row-major `D × d`) with a Haar orthonormal frame.
///
/// Gram-Schmidt applied to Gaussian columns is the QR factorization with a
/// positive diagonal in `R`, which makes the frame exactly Haar distributed.
pub fn haar_basis_into<R: Rng + ?Sized>(rng: &mut R, ambient: usize, d: usize, basis: &mut [f64]) {
    let mut col = vec![0.0; ambient];
    let mut j = 0;
    while j < d {
        for x in col.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..ambient).map(|i| col[i] * basis[i * d + k]).sum();
                for i in 0..ambient {
                    col[i] -= dot * basis[i * d + k];
                }
            }
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            continue;
        }
        for i in 0..ambient {
            basis[i * d + j] = col[i] / norm;
        }
        j += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_grassmannian_is_a_sign() {
        let g = sample_haar_grassmann(1, 1, 3);
        assert_eq!(g.basis()[0].abs(), 1.0);
    }

    #[test]
    fn columns_are_orthonormal() {
        for seed in 0..50 {
            let g = sample_haar_grassmann(5, 3, seed);
            assert!(g.orthonormality_error() < 1e-12);
        }
    }
}
