//! Deterministic geometry behind the Kac-Rice formula for `D > d`.
//!
//! The normal Jacobian `Δ = sqrt(det(M Mᵀ))`, the expected normal Jacobian of
//! a standard Gaussian matrix, Crofton constants, Haar sampling on
//! Grassmannians, the determinant identity that averages `|det(M π_Vᵀ)|`
//! over `G(D, d)`, and a Monte Carlo Favard (integral geometric) measure of
//! planar polylines.

mod favard;
mod grassmann;
mod polyline;

pub use favard::{favard_measure, favard_measure_with, MIN_LINES, OFFSETS_PER_DIRECTION};
pub use grassmann::{haar_basis_into, sample_haar_grassmann, GrassmannElement};
pub use polyline::Polyline;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::normal_jacobian_slice;
use crate::rng::{stream_rng, Stream};
use crate::stats::{Estimate, MeanAccumulator};

/// Monte Carlo work is split into fixed-size batches, each with its own
/// random stream.
pub(crate) const BATCH: usize = 4096;

/// A `d × D` real matrix with `d ≤ D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl JacobianMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || rows > cols {
            return Err(Error::Config(format!(
                "Jacobian must be d × D with 1 ≤ d ≤ D, got {rows} × {cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "expected {} entries for a {rows} × {cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<const C: usize>(rows: &[[f64; C]]) -> Result<Self> {
        Self::new(rows.len(), C, rows.iter().flatten().copied().collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    /// A matrix with i.i.d. standard normal entries.
    pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// `self · other` for a `cols × k` row-major matrix.
    pub fn mul(&self, other: &[f64], k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * k];
        for i in 0..self.rows {
            for j in 0..k {
                out[i * k + j] = (0..self.cols)
                    .map(|l| self.data[i * self.cols + l] * other[l * k + j])
                    .sum();
            }
        }
        out
    }
}

/// Normal (generalized) Jacobian `sqrt(det(M Mᵀ))`; equals `|det M|` when
/// `M` is square.
pub fn normal_jacobian(m: &JacobianMatrix) -> f64 {
    normal_jacobian_slice(m.rows, m.cols, &m.data)
}

/// `L_{D,d} = E Δ(M) = 2^{d/2} Γ((D+1)/2) / Γ((D-d+1)/2)` for a `d × D`
/// standard Gaussian matrix.
pub fn gaussian_det_expectation(ambient: usize, d: usize) -> f64 {
    assert!(1 <= d && d <= ambient, "need 1 ≤ d ≤ D");
    let (dd, d) = (ambient as f64, d as f64);
    (0.5 * d * std::f64::consts::LN_2 + ln_gamma((dd + 1.0) / 2.0) - ln_gamma((dd - d + 1.0) / 2.0))
        .exp()
}

/// Crofton constant
/// `c_{D,m} = π^{1/2} Γ((D+1)/2) / (Γ((m+1)/2) Γ((D-m+1)/2))`.
/// Symmetric in `m ↔ D - m` bit-for-bit.
pub fn crofton_constant(ambient: usize, m: usize) -> f64 {
    assert!(m <= ambient, "need m ≤ D");
    let (a, b) = (m + 1, ambient - m + 1);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if ambient + 1 > 300 {
        return std::f64::consts::PI.sqrt() * gamma((ambient + 1) as f64 / 2.0)
            / (gamma(lo as f64 / 2.0) * gamma(hi as f64 / 2.0));
    }
    // collect the √π factors separately so that e.g. c_{2,1} is exactly π/2
    let (num, pn) = half_gamma(ambient + 1);
    let (den_lo, pl) = half_gamma(lo);
    let (den_hi, ph) = half_gamma(hi);
    let rational = num / (den_lo * den_hi);
    match 1 + pn as i32 - pl as i32 - ph as i32 {
        2 => std::f64::consts::PI * rational,
        1 => std::f64::consts::PI.sqrt() * rational,
        0 => rational,
        -1 => rational / std::f64::consts::PI.sqrt(),
        _ => rational / std::f64::consts::PI,
    }
}

/// `Γ(k/2) = r · √π^p` as `(r, p)`, by the recurrence from `Γ(1/2) = √π`
/// and `Γ(1) = 1`.
fn half_gamma(k: usize) -> (f64, u32) {
    assert!(k > 0);
    let odd = k % 2 == 1;
    let mut g = 1.0;
    let mut x = if odd { 0.5 } else { 1.0 };
    while x < k as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    (g, u32::from(odd))
}

/// Monte Carlo mean of `Δ` over `n` i.i.d. `d × D` standard Gaussian
/// matrices.
pub fn gaussian_det_mc(ambient: usize, d: usize, n: usize, seed: u64, exec: Exec) -> Estimate {
    let batches = n.div_ceil(BATCH);
    let parts = exec.map(batches, |b| {
        let mut rng = stream_rng(seed, b as u64, Stream::GaussianMatrix);
        let count = BATCH.min(n - b * BATCH);
        let mut buf = vec![0.0; d * ambient];
        let mut acc = MeanAccumulator::new();
        for _ in 0..count {
            for x in buf.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            acc.push(normal_jacobian_slice(d, ambient, &buf));
        }
        acc
    });
    merge(parts).estimate()
}

/// Estimates `c_{D,D-d} · E_V |det(M π_Vᵀ)|` over Haar-distributed
/// `V ∈ G(D, d)`; consistent for `normal_jacobian(M)`.
pub fn crofton_identity_mc(m: &JacobianMatrix, n: usize, seed: u64) -> Result<Estimate> {
    crofton_identity_mc_with(m, n, seed, Exec::default())
}

pub fn crofton_identity_mc_with(
    m: &JacobianMatrix,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Estimate> {
    if n < 100 {
        return Err(Error::Config(format!(
            "crofton identity needs at least 100 Haar samples, got {n}"
        )));
    }
    let (d, ambient) = (m.rows, m.cols);
    let c = crofton_constant(ambient, ambient - d);
    let batches = n.div_ceil(BATCH);
    let parts = exec.map(batches, |b| {
        let mut rng = stream_rng(seed, b as u64, Stream::Haar);
        let count = BATCH.min(n - b * BATCH);
        let mut basis = vec![0.0; ambient * d];
        let mut acc = MeanAccumulator::new();
        for _ in 0..count {
            haar_basis_into(&mut rng, ambient, d, &mut basis);
            // M π_Vᵀ = M · basis  (d × d)
            let prod = m.mul(&basis, d);
            acc.push(c * crate::linalg::det_square(d, &prod).abs());
        }
        acc
    });
    Ok(merge(parts).estimate())
}

pub(crate) fn merge(parts: Vec<MeanAccumulator>) -> MeanAccumulator {
    parts.iter().fold(MeanAccumulator::new(), |mut a, p| {
        a.merge(p);
        a
    })
}
