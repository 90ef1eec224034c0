use rand::Rng;

use super::{crofton_constant, haar_basis_into, merge, Polyline};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{stream_rng, Stream};
use crate::stats::{Estimate, MeanAccumulator};

/// Number of uniform offsets drawn per random line direction.
pub const OFFSETS_PER_DIRECTION: usize = 16;
/// Fewest lines accepted by [`favard_measure`].
pub const MIN_LINES: usize = 1000;

/// Monte Carlo Favard measure of a planar polyline.
///
/// Lines are drawn in nested fashion: Haar directions, then uniform offsets
/// across the projection of the bounding box. Each direction contributes
/// `c_{2,1} · W · (mean intersection count)`; the standard error is taken
/// across directions. Consistent for the total length.
pub fn favard_measure(shape: &Polyline, n_lines: usize, seed: u64) -> Result<Estimate> {
    favard_measure_with(shape, n_lines, seed, Exec::default())
}

pub fn favard_measure_with(
    shape: &Polyline,
    n_lines: usize,
    seed: u64,
    exec: Exec,
) -> Result<Estimate> {
    shape.validate()?;
    if n_lines < MIN_LINES {
        return Err(Error::Config(format!(
            "favard measure needs at least {MIN_LINES} lines, got {n_lines}"
        )));
    }
    let Some((lo, hi)) = shape.bounding_box() else {
        return Ok(Estimate::exact(0.0));
    };
    let segs: Vec<([f64; 2], [f64; 2])> = shape.segments().collect();
    let c = crofton_constant(2, 1);
    let corners = [[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]];
    let directions = n_lines.div_ceil(OFFSETS_PER_DIRECTION);
    let per_dir = exec.map(directions, |j| {
        let mut rng = stream_rng(seed, j as u64, Stream::Favard);
        let mut v = [0.0; 2];
        haar_basis_into(&mut rng, 2, 1, &mut v);
        // line direction v, offsets measured along the normal
        let n = [-v[1], v[0]];
        let proj = |p: [f64; 2]| p[0] * n[0] + p[1] * n[1];
        let (wlo, whi) = corners
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
                (a.min(proj(p)), b.max(proj(p)))
            });
        let width = whi - wlo;
        if width <= 0.0 {
            return 0.0;
        }
        let mut offsets: Vec<f64> = (0..OFFSETS_PER_DIRECTION)
            .map(|_| wlo + width * rng.random::<f64>())
            .collect();
        offsets.sort_by(f64::total_cmp);
        let mut hits = 0usize;
        for &(a, b) in &segs {
            let (pa, pb) = (proj(a), proj(b));
            let (s, e) = if pa <= pb { (pa, pb) } else { (pb, pa) };
            // half-open [s, e) so shared vertices count once
            hits += offsets.partition_point(|&y| y < e) - offsets.partition_point(|&y| y < s);
        }
        c * width * hits as f64 / OFFSETS_PER_DIRECTION as f64
    });
    let acc = merge(
        per_dir
            .into_iter()
            .map(|x| {
                let mut a = MeanAccumulator::new();
                a.push(x);
                a
            })
            .collect(),
    );
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_segment() {
        let s = Polyline::segment([0.0, 0.0], [1.0, 0.0]);
        let e = favard_measure(&s, 200_000, 7).unwrap();
        assert!(e.within(1.0, 4.0), "{e:?}");
    }

    #[test]
    fn circle() {
        let s = Polyline::circle([0.3, -0.2], 1.0, 2000);
        let e = favard_measure(&s, 100_000, 8).unwrap();
        assert!(e.within(s.length(), 4.0), "{e:?}");
    }

    #[test]
    fn too_few_lines_is_a_config_error() {
        let s = Polyline::segment([0.0, 0.0], [1.0, 0.0]);
        assert!(matches!(favard_measure(&s, MIN_LINES - 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn empty_shape_has_zero_measure() {
        assert_eq!(favard_measure(&Polyline::default(), 1000, 1).unwrap().value, 0.0);
    }
}
