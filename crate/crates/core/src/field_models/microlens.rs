use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{config_err, Field};
use crate::error::{FieldError, Result};
use crate::rng::{stream_rng, Stream};

/// Lens system with `n_stars` point masses uniform on the disk of radius
/// `radius`, continuous matter density `kappa_c` and external shear `gamma`.
///
/// The lens map is `η(x) = (1 - κ_c + γ) x - 2m Σ_i (x - ξ_i)/‖x - ξ_i‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicrolensSystem {
    pub kappa_c: f64,
    pub gamma: f64,
    pub mass: f64,
    pub n_stars: usize,
    pub radius: f64,
    /// Fixed star positions; when absent they are drawn per realization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub star_positions: Option<Vec<[f64; 2]>>,
}

impl MicrolensSystem {
    pub fn new(kappa_c: f64, gamma: f64, mass: f64, n_stars: usize, radius: f64) -> Self {
        Self {
            kappa_c,
            gamma,
            mass,
            n_stars,
            radius,
            star_positions: None,
        }
    }

    /// Linear coefficient `1 - κ_c + γ` of the lens map.
    pub fn linear_coefficient(&self) -> f64 {
        1.0 - self.kappa_c + self.gamma
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_c.is_finite() && self.kappa_c >= 0.0) {
            return config_err("kappa_c must be finite and non-negative");
        }
        if !self.gamma.is_finite() {
            return config_err("gamma must be finite");
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return config_err("star mass must be positive");
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return config_err("field radius must be positive");
        }
        if let Some(stars) = &self.star_positions {
            if stars.len() != self.n_stars {
                return config_err("star_positions length must equal n_stars");
            }
        }
        Ok(())
    }

    pub(super) fn sample(&self, seed: u64) -> MicrolensRealization {
        let stars = match &self.star_positions {
            Some(s) => s.clone(),
            None => {
                let mut rng = stream_rng(seed, 0, Stream::Realization);
                (0..self.n_stars)
                    .map(|_| uniform_in_disk(&mut rng, self.radius))
                    .collect()
            }
        };
        MicrolensRealization::new(self.linear_coefficient(), self.mass, stars)
    }
}

pub(crate) fn uniform_in_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
    [r * c, r * s]
}

/// Whether `1 - κ_c + γ < 0`.
pub fn check_supercritical(sys: &MicrolensSystem) -> bool {
    sys.linear_coefficient() < 0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicrolensRealization {
    linear: f64,
    mass: f64,
    stars: Vec<[f64; 2]>,
}

impl MicrolensRealization {
    pub fn new(linear: f64, mass: f64, stars: Vec<[f64; 2]>) -> Self {
        Self {
            linear,
            mass,
            stars,
        }
    }

    pub fn stars(&self) -> &[[f64; 2]] {
        &self.stars
    }

    pub fn linear_coefficient(&self) -> f64 {
        self.linear
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `⟨(∂η/∂x) v, v⟩`.
    pub fn jacobian_quadratic_form(&self, x: [f64; 2], v: [f64; 2]) -> Result<f64, FieldError> {
        let jet = self.eval(&x)?;
        let j = &jet.jacobian;
        let jv = [j[0] * v[0] + j[1] * v[1], j[2] * v[0] + j[3] * v[1]];
        Ok(jv[0] * v[0] + jv[1] * v[1])
    }
}

/// Adds the contribution `-2m (x - ξ)/‖x - ξ‖²` of one star to `value` and its
/// derivative to the row-major `jac`.
#[inline]
pub(crate) fn add_star(mass: f64, z: [f64; 2], value: &mut [f64], jac: &mut [f64]) {
    let r2 = z[0] * z[0] + z[1] * z[1];
    let inv = 1.0 / r2;
    let inv2 = inv * inv;
    value[0] -= 2.0 * mass * z[0] * inv;
    value[1] -= 2.0 * mass * z[1] * inv;
    jac[0] -= 2.0 * mass * (inv - 2.0 * z[0] * z[0] * inv2);
    jac[1] += 4.0 * mass * z[0] * z[1] * inv2;
    jac[2] += 4.0 * mass * z[0] * z[1] * inv2;
    jac[3] -= 2.0 * mass * (inv - 2.0 * z[1] * z[1] * inv2);
}

impl Field for MicrolensRealization {
    fn input_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        2
    }

    fn eval_into(&self, t: &[f64], value: &mut [f64], jac: &mut [f64]) -> Result<(), FieldError> {
        value[0] = self.linear * t[0];
        value[1] = self.linear * t[1];
        jac[..4].copy_from_slice(&[self.linear, 0.0, 0.0, self.linear]);
        for s in &self.stars {
            let z = [t[0] - s[0], t[1] - s[1]];
            if z[0] == 0.0 && z[1] == 0.0 {
                return Err(FieldError::Singular(t.to_vec()));
            }
            add_star(self.mass, z, value, jac);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supercritical_flag() {
        assert!(check_supercritical(&MicrolensSystem::new(2.0, 0.0, 0.5, 1, 1.0)));
        assert!(!check_supercritical(&MicrolensSystem::new(0.0, 0.0, 0.5, 1, 1.0)));
        assert!(!check_supercritical(&MicrolensSystem::new(1.0, 0.0, 0.5, 1, 1.0)));
    }

    #[test]
    fn one_star_direct_substitution() {
        let r = MicrolensRealization::new(1.0 - 2.0, 0.5, vec![[0.0, 0.0]]);
        let jet = r.eval(&[1.0, 0.0]).unwrap();
        assert_eq!(jet.value, vec![-2.0, 0.0]);
    }

    #[test]
    fn singular_at_star() {
        let r = MicrolensRealization::new(-1.0, 0.5, vec![[0.25, -0.5]]);
        assert!(matches!(r.eval(&[0.25, -0.5]), Err(FieldError::Singular(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let r = MicrolensRealization::new(-0.7, 0.3, vec![[0.1, 0.2], [-0.5, 0.4], [0.3, -0.6]]);
        let x = [0.45, -0.12];
        let jet = r.eval(&x).unwrap();
        let h = 1e-6;
        for col in 0..2 {
            let mut a = x;
            let mut b = x;
            a[col] += h;
            b[col] -= h;
            let (fa, fb) = (r.eval(&a).unwrap(), r.eval(&b).unwrap());
            for row in 0..2 {
                let fd = (fa.value[row] - fb.value[row]) / (2.0 * h);
                assert!((fd - jet.jac(row, col)).abs() < 1e-6, "{row} {col}");
            }
        }
    }
}
