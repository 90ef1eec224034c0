use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::GridSample;
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field_models::Field;
use crate::linalg::normal_jacobian_slice;

/// Lebesgue measure of the unit ball of `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => std::f64::consts::PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0),
    }
}

/// Field values and Jacobians at the midpoints of the `(resolution − 1)^D`
/// lattice cells.
pub(crate) fn midpoint_sample<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    resolution: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    domain.validate()?;
    if resolution < 2 {
        return Err(Error::Config(format!("grid resolution must be ≥ 2, got {resolution}")));
    }
    let dim = domain.dim();
    if field.input_dim() != dim {
        return Err(Error::Config(format!(
            "field has {} inputs but the box has {dim} dimensions",
            field.input_dim()
        )));
    }
    let cells = resolution - 1;
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|k| (0..cells).map(|i| domain.cell_mid(k, i, cells)).collect())
        .collect();
    let total = cells.pow(dim as u32);
    let d = field.output_dim();
    let mut v = vec![0.0; total * d];
    let mut j = vec![0.0; total * d * dim];
    field.fill_lattice(&axes, &mut v, &mut j)?;
    let cell_volume = domain.volume() / total as f64;
    Ok((v, j, cell_volume))
}

fn window_integral<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: &[f64],
    delta: f64,
    resolution: usize,
    with_jacobian: bool,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("window half-width must be positive, got {delta}")));
    }
    let d = field.output_dim();
    if u.len() != d {
        return Err(Error::Config(format!("level has {} components, field has {d}", u.len())));
    }
    let dim = domain.dim();
    let (v, j, cell) = midpoint_sample(field, domain, resolution)?;
    let mut sum = 0.0;
    for node in 0..v.len() / d {
        let r2: f64 = (0..d).map(|c| (v[node * d + c] - u[c]).powi(2)).sum();
        let inside = if with_jacobian {
            r2 < delta * delta
        } else {
            r2 <= delta * delta
        };
        if inside {
            sum += if with_jacobian {
                normal_jacobian_slice(d, dim, &j[node * d * dim..(node + 1) * d * dim])
            } else {
                1.0
            };
        }
    }
    Ok(sum * cell / (unit_ball_volume(d) * delta.powi(d as i32)))
}

/// `(1/λ_d(B(0,δ))) ∫_box 1{‖X(t) − u‖ < δ} |det X'(t)| dt` by midpoint
/// quadrature over the lattice cells.
pub fn kac_counter<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: &[f64],
    delta: f64,
    resolution: usize,
) -> Result<f64> {
    if field.input_dim() != field.output_dim() {
        return Err(Error::Config("the Kac counter needs D = d".into()));
    }
    window_integral(field, domain, u, delta, resolution, true)
}

/// Occupation density estimate
/// `σ_D({t : ‖X(t) − u‖ ≤ δ}) / λ_d(B(0,δ))` by cell counting.
pub fn local_time<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: &[f64],
    delta: f64,
    resolution: usize,
) -> Result<f64> {
    window_integral(field, domain, u, delta, resolution, false)
}

/// Result of [`irregularity_scan`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IrregularityScan {
    /// Lattice nodes with `‖X − u‖ ≤ eps_level` and `Δ ≤ eps_delta`.
    pub flagged: Vec<Vec<f64>>,
    /// Lattice nodes with `‖X − u‖ ≤ eps_level`.
    pub near_level: usize,
}

impl IrregularityScan {
    pub fn flagged_fraction(&self) -> f64 {
        if self.near_level == 0 {
            0.0
        } else {
            self.flagged.len() as f64 / self.near_level as f64
        }
    }
}

/// Lattice witnesses of points that are both close to the level and close
/// to singular.
pub fn irregularity_scan<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: &[f64],
    eps_level: f64,
    eps_delta: f64,
    resolution: usize,
) -> Result<IrregularityScan> {
    let grid = GridSample::sample(field, domain, resolution, None)?;
    let (d, dim) = (grid.output_dim, grid.input_dim());
    if u.len() != d {
        return Err(Error::Config(format!("level has {} components, field has {d}", u.len())));
    }
    let mut scan = IrregularityScan::default();
    for node in 0..grid.node_count() {
        let v = grid.value(node);
        let r = v.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if !(r <= eps_level) {
            continue;
        }
        scan.near_level += 1;
        if normal_jacobian_slice(d, dim, grid.jacobian(node)) <= eps_delta {
            scan.flagged.push(grid.coordinates(node));
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::FnField;

    fn linear(slope: f64) -> impl Field {
        FnField::new(1, 1, move |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = slope * t[0];
            j[0] = slope;
        })
    }

    #[test]
    fn unit_and_double_slope() {
        let b = BoxDomain::interval(-1.0, 1.0);
        for slope in [1.0, 2.0] {
            let k = kac_counter(&linear(slope), &b, &[0.0], 0.1, 2048).unwrap();
            assert!((k - 1.0).abs() < 1e-2, "{k}");
        }
    }

    #[test]
    fn local_time_of_identity() {
        let b = BoxDomain::interval(-1.0, 1.0);
        for delta in [1.0, 0.5, 0.1] {
            let lt = local_time(&linear(1.0), &b, &[0.0], delta, 4097).unwrap();
            assert!((lt - 1.0).abs() < 1e-2, "{lt}");
        }
        let off = FnField::new(1, 1, |_: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = 1.0;
            j[0] = 0.0;
        });
        assert_eq!(local_time(&off, &b, &[0.0], 0.5, 100).unwrap(), 0.0);
    }

    #[test]
    fn saddle_counterexample_flags_origin() {
        let f = FnField::new(2, 1, |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = t[0] * t[0] - t[1] * t[1];
            j[0] = 2.0 * t[0];
            j[1] = -2.0 * t[1];
        });
        let s = irregularity_scan(&f, &BoxDomain::square(-1.0, 1.0), &[0.0], 1e-12, 1e-3, 101).unwrap();
        assert!(s.flagged.iter().any(|p| p[0] == 0.0 && p[1] == 0.0));
        let g = FnField::new(2, 1, |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = t[0];
            j[0] = 1.0;
            j[1] = 0.0;
        });
        let s = irregularity_scan(&g, &BoxDomain::square(-1.0, 1.0), &[0.0], 0.05, 0.99, 101).unwrap();
        assert!(s.flagged.is_empty() && s.near_level > 0);
    }
}
