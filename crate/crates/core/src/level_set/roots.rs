use super::{dist, GridSample, Root, RootSet, ROOT_TOL_1D, ROOT_TOL_2D};
use crate::domain::BoxDomain;
use crate::error::{Error, FieldError, Result};
use crate::field_models::Field;

fn check_shape<F: Field + ?Sized>(field: &F, domain: &BoxDomain, dim: usize) -> Result<()> {
    domain.validate()?;
    if domain.dim() != dim || field.input_dim() != dim || field.output_dim() != dim {
        return Err(Error::Config(format!(
            "expected a field R^{dim} -> R^{dim} on a {dim}-dimensional box, got R^{} -> R^{} on {} dims",
            field.input_dim(),
            field.output_dim(),
            domain.dim()
        )));
    }
    Ok(())
}

/// Roots of `X(t) = u` in the open interval: sign changes on the lattice,
/// refined by safeguarded Newton. Lattice end points are never reported.
pub fn count_roots_1d<F: Field + ?Sized>(
    field: &F,
    interval: &BoxDomain,
    u: f64,
    resolution: usize,
) -> Result<RootSet> {
    check_shape(field, interval, 1)?;
    let grid = GridSample::sample(field, interval, resolution, None)?;
    let g: Vec<f64> = grid.values.iter().map(|v| v - u).collect();
    let eval = |t: f64| -> Result<(f64, f64)> {
        let (mut v, mut j) = ([0.0], [0.0]);
        field.eval_into(&[t], &mut v, &mut j)?;
        Ok((v[0] - u, j[0]))
    };
    let mut roots = Vec::new();
    for i in 0..resolution - 1 {
        let (ga, gb) = (g[i], g[i + 1]);
        if i > 0 && ga == 0.0 {
            let (_, dv) = eval(grid.domain.node(0, i, resolution))?;
            roots.push(Root {
                location: vec![grid.domain.node(0, i, resolution)],
                delta: dv.abs(),
                residual: 0.0,
            });
            continue;
        }
        if ga * gb < 0.0 {
            let a = grid.domain.node(0, i, resolution);
            let b = grid.domain.node(0, i + 1, resolution);
            let (t, r, dv) = refine_bracket(&eval, a, b, ga)?;
            roots.push(Root {
                location: vec![t],
                delta: dv.abs(),
                residual: r,
            });
        }
    }
    Ok(RootSet { dim: 1, roots })
}

/// Newton steps kept inside a shrinking sign bracket, bisecting whenever the
/// step leaves it.
fn refine_bracket(
    eval: &dyn Fn(f64) -> Result<(f64, f64)>,
    mut a: f64,
    mut b: f64,
    ga: f64,
) -> Result<(f64, f64, f64)> {
    let sign_a = ga.signum();
    let mut t = 0.5 * (a + b);
    let mut best = (t, f64::INFINITY, 0.0);
    for _ in 0..200 {
        let (v, dv) = eval(t)?;
        if v.abs() < best.1 {
            best = (t, v.abs(), dv);
        }
        if v.abs() <= ROOT_TOL_1D && v.abs() <= best.1 {
            // one more Newton step can only shrink the residual further
            let tn = t - v / dv;
            if dv != 0.0 && tn > a && tn < b {
                let (vn, dvn) = eval(tn)?;
                if vn.abs() < v.abs() {
                    return Ok((tn, vn.abs(), dvn));
                }
            }
            return Ok((t, v.abs(), dv));
        }
        if v.signum() == sign_a {
            a = t;
        } else {
            b = t;
        }
        let tn = t - v / dv;
        t = if dv != 0.0 && tn > a && tn < b { tn } else { 0.5 * (a + b) };
        if b - a <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            break;
        }
    }
    Ok(best)
}

/// Roots of `X(t) = u` in the open box for `X : R² → R²`.
///
/// Newton seeds come from every lattice cell whose corner values bracket
/// `u` in both components, plus the center of every 4th cell in each
/// direction. Converged points closer than `h/2` are merged; seeds that
/// diverge, stall or leave the box are dropped.
pub fn count_roots_2d<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: [f64; 2],
    resolution: usize,
    newton_iters: usize,
) -> Result<RootSet> {
    check_shape(field, domain, 2)?;
    let grid = GridSample::sample(field, domain, resolution, None)?;
    let n = resolution;
    let cells = n - 1;
    let h = grid.spacing(0).min(grid.spacing(1));
    let mut seeds = Vec::new();
    for j in 0..cells {
        for i in 0..cells {
            let corners = [i + n * j, i + 1 + n * j, i + n * (j + 1), i + 1 + n * (j + 1)];
            let brackets = (0..2).all(|c| {
                let vals = corners.map(|k| grid.values[2 * k + c] - u[c]);
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // NaN corners (singular nodes) make the cell a seed
                !(lo > 0.0 || hi < 0.0)
            });
            if brackets || (i % 4 == 0 && j % 4 == 0) {
                seeds.push([
                    0.5 * (domain.node(0, i, n) + domain.node(0, i + 1, n)),
                    0.5 * (domain.node(1, j, n) + domain.node(1, j + 1, n)),
                ]);
            }
        }
    }
    let mut roots: Vec<Root> = Vec::new();
    for s in seeds {
        let Some(root) = newton_2d(field, domain, u, s, newton_iters) else {
            continue;
        };
        if roots.iter().all(|r| dist(&r.location, &root.location) >= 0.5 * h) {
            roots.push(root);
        }
    }
    roots.sort_by(|a, b| {
        a.location[0]
            .total_cmp(&b.location[0])
            .then(a.location[1].total_cmp(&b.location[1]))
    });
    Ok(RootSet { dim: 2, roots })
}

fn residual_at<F: Field + ?Sized>(
    field: &F,
    u: [f64; 2],
    t: [f64; 2],
) -> std::result::Result<([f64; 2], [f64; 4]), FieldError> {
    let (mut v, mut j) = ([0.0; 2], [0.0; 4]);
    field.eval_into(&t, &mut v, &mut j)?;
    Ok(([v[0] - u[0], v[1] - u[1]], j))
}

fn newton_2d<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: [f64; 2],
    start: [f64; 2],
    iters: usize,
) -> Option<Root> {
    let norm = |r: [f64; 2]| r[0].hypot(r[1]);
    let mut t = start;
    let (mut r, mut j) = residual_at(field, u, t).ok()?;
    let mut polish = 0;
    for _ in 0..iters {
        let det = j[0] * j[3] - j[1] * j[2];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step = [
            (j[3] * r[0] - j[1] * r[1]) / det,
            (-j[2] * r[0] + j[0] * r[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = [t[0] - lambda * step[0], t[1] - lambda * step[1]];
            if let Ok((rc, jc)) = residual_at(field, u, cand) {
                if norm(rc) < norm(r) {
                    accepted = Some((cand, rc, jc));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((cand, rc, jc)) = accepted else { break };
        t = cand;
        r = rc;
        j = jc;
        if !domain.contains_closed(&t) {
            return None;
        }
        if norm(r) <= ROOT_TOL_2D {
            polish += 1;
            if polish > 2 {
                break;
            }
        }
    }
    if norm(r) > ROOT_TOL_2D || !domain.contains_open(&t) {
        return None;
    }
    Some(Root {
        location: t.to_vec(),
        delta: (j[0] * j[3] - j[1] * j[2]).abs(),
        residual: norm(r),
    })
}

/// Independent root count: the sum over lattice cells of the absolute
/// winding number of `X − u` along the cell boundary, each edge sampled at
/// `edge_steps` points. Cells containing any point of `exclude` (poles of
/// the field) are skipped. Exact as long as every cell holds at most one
/// nondegenerate root.
pub fn winding_root_count<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: [f64; 2],
    resolution: usize,
    edge_steps: usize,
    exclude: &[[f64; 2]],
) -> Result<usize> {
    check_shape(field, domain, 2)?;
    let fine = (resolution - 1) * edge_steps + 1;
    let grid = GridSample::sample(field, domain, fine, None)?;
    let at = |i: usize, j: usize| {
        let k = i + fine * j;
        [grid.values[2 * k] - u[0], grid.values[2 * k + 1] - u[1]]
    };
    let mut total = 0usize;
    for cj in 0..resolution - 1 {
        for ci in 0..resolution - 1 {
            let (x0, x1) = (domain.node(0, ci, resolution), domain.node(0, ci + 1, resolution));
            let (y0, y1) = (domain.node(1, cj, resolution), domain.node(1, cj + 1, resolution));
            if exclude
                .iter()
                .any(|p| p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1)
            {
                continue;
            }
            let (i0, j0) = (ci * edge_steps, cj * edge_steps);
            let m = edge_steps;
            let mut path = Vec::with_capacity(4 * m + 1);
            path.extend((0..m).map(|s| at(i0 + s, j0)));
            path.extend((0..m).map(|s| at(i0 + m, j0 + s)));
            path.extend((0..m).map(|s| at(i0 + m - s, j0 + m)));
            path.extend((0..m).map(|s| at(i0, j0 + m - s)));
            path.push(path[0]);
            if path.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                continue;
            }
            let turn: f64 = path
                .windows(2)
                .map(|w| {
                    let (a, b) = (w[0], w[1]);
                    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
                })
                .sum();
            total += (turn / std::f64::consts::TAU).round().abs() as usize;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_models::FnField;

    #[test]
    fn sine_zeros() {
        let f = FnField::new(1, 1, |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = t[0].sin();
            j[0] = t[0].cos();
        });
        let rs = count_roots_1d(&f, &BoxDomain::interval(0.1, 7.0), 0.0, 2048).unwrap();
        assert_eq!(rs.len(), 2);
        assert!((rs.roots[0].location[0] - std::f64::consts::PI).abs() < 1e-9);
        assert!((rs.roots[1].location[0] - std::f64::consts::TAU).abs() < 1e-9);
        assert!(rs.roots.iter().all(|r| r.residual <= 1e-10));
    }

    #[test]
    fn boundary_roots_are_not_reported() {
        let f = FnField::new(1, 1, |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = t[0];
            j[0] = 1.0;
        });
        assert!(count_roots_1d(&f, &BoxDomain::interval(0.0, 1.0), 0.0, 11).unwrap().is_empty());
        assert_eq!(count_roots_1d(&f, &BoxDomain::interval(-1.0, 1.0), 0.0, 11).unwrap().len(), 1);
    }

    #[test]
    fn factored_system() {
        let f = FnField::new(2, 2, |t: &[f64], v: &mut [f64], j: &mut [f64]| {
            v[0] = t[0] * t[0] - 1.0;
            v[1] = t[1];
            j.copy_from_slice(&[2.0 * t[0], 0.0, 0.0, 1.0]);
        });
        let rs = count_roots_2d(&f, &BoxDomain::square(-2.0, 2.0), [0.0, 0.0], 64, 60).unwrap();
        assert_eq!(rs.len(), 2);
        assert!((rs.roots[0].location[0] + 1.0).abs() < 1e-9);
        assert!((rs.roots[1].location[0] - 1.0).abs() < 1e-9);
        assert_eq!(
            winding_root_count(&f, &BoxDomain::square(-2.0, 2.0), [0.0, 0.0], 64, 4, &[]).unwrap(),
            2
        );
    }
}
