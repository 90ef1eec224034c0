use std::collections::HashMap;

use super::{GridSample, LevelCurve};
use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::field_models::Field;
use crate::integral_geometry::Polyline;

/// Edge of the lattice: horizontal from node `(i, j)` to `(i+1, j)` or
/// vertical from `(i, j)` to `(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Level curve `{X = u}` of a planar scalar field by marching squares.
///
/// Crossings are placed by linear interpolation along cell edges; saddle
/// cells are resolved with the exact field value at the cell center.
/// Segments are stitched into chains through shared edges.
pub fn nodal_length<F: Field + ?Sized>(
    field: &F,
    domain: &BoxDomain,
    u: f64,
    resolution: usize,
) -> Result<LevelCurve> {
    if field.input_dim() != 2 || field.output_dim() != 1 || domain.dim() != 2 {
        return Err(Error::Config(
            "nodal length needs a scalar field on a planar box".into(),
        ));
    }
    let grid = GridSample::sample(field, domain, resolution, None)?;
    let n = resolution;
    let val = |i: usize, j: usize| grid.values[i + n * j];
    let x = |i: usize| domain.node(0, i, n);
    let y = |j: usize| domain.node(1, j, n);
    let above = |v: f64| v > u;

    let mut points: HashMap<Edge, [f64; 2]> = HashMap::new();
    let mut crossing = |e: Edge| -> [f64; 2] {
        *points.entry(e).or_insert_with(|| {
            let ((i0, j0), (i1, j1)) = match e {
                Edge::H(i, j) => ((i, j), (i + 1, j)),
                Edge::V(i, j) => ((i, j), (i, j + 1)),
            };
            let (va, vb) = (val(i0, j0), val(i1, j1));
            let s = ((u - va) / (vb - va)).clamp(0.0, 1.0);
            [x(i0) + s * (x(i1) - x(i0)), y(j0) + s * (y(j1) - y(j0))]
        })
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    let mut centre = vec![0.0];
    let mut centre_j = vec![0.0; 2];
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (v00, v10, v11, v01) = (val(i, j), val(i + 1, j), val(i + 1, j + 1), val(i, j + 1));
            if [v00, v10, v11, v01].iter().any(|v| !v.is_finite()) {
                continue;
            }
            let (a00, a10, a11, a01) = (above(v00), above(v10), above(v11), above(v01));
            let bottom = Edge::H(i, j);
            let right = Edge::V(i + 1, j);
            let top = Edge::H(i, j + 1);
            let left = Edge::V(i, j);
            let mut cut = Vec::with_capacity(4);
            if a00 != a10 {
                cut.push(bottom);
            }
            if a10 != a11 {
                cut.push(right);
            }
            if a11 != a01 {
                cut.push(top);
            }
            if a01 != a00 {
                cut.push(left);
            }
            match cut.len() {
                2 => segments.push((cut[0], cut[1])),
                4 => {
                    let t = [0.5 * (x(i) + x(i + 1)), 0.5 * (y(j) + y(j + 1))];
                    field.eval_into(&t, &mut centre, &mut centre_j)?;
                    if above(centre[0]) == a00 {
                        // 00 and 11 connect through the center
                        segments.push((bottom, right));
                        segments.push((left, top));
                    } else {
                        segments.push((bottom, left));
                        segments.push((right, top));
                    }
                }
                _ => {}
            }
        }
    }
    for &(a, b) in &segments {
        crossing(a);
        crossing(b);
    }

    // stitch: every edge point has one or two incident segments
    let mut incident: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(k);
        incident.entry(b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut polyline = Polyline::default();
    let walk = |start_seg: usize, start: Edge, used: &mut Vec<bool>| -> Vec<[f64; 2]> {
        let mut chain = vec![points[&start]];
        let (mut seg, mut at) = (start_seg, start);
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            chain.push(points[&next]);
            at = next;
            match incident[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        chain
    };
    // open chains first (they start on the box boundary), in a fixed order
    let mut ends: Vec<Edge> = incident
        .iter()
        .filter(|(_, s)| s.len() == 1)
        .map(|(e, _)| *e)
        .collect();
    ends.sort_by_key(edge_order);
    for e in ends {
        let s = incident[&e][0];
        if !used[s] {
            polyline.push_component(walk(s, e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            polyline.push_component(walk(s, segments[s].0, &mut used));
        }
    }

    let mut segment_delta = Vec::with_capacity(segments.len());
    let mut g = vec![0.0; 2];
    let mut v = vec![0.0];
    for (a, b) in polyline.segments() {
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        field.eval_into(&mid, &mut v, &mut g)?;
        segment_delta.push(g[0].hypot(g[1]));
    }
    Ok(LevelCurve {
        level: u,
        polyline,
        segment_delta,
    })
}

fn edge_order(e: &Edge) -> (usize, usize, usize) {
    match *e {
        Edge::H(i, j) => (j, i, 0),
        Edge::V(i, j) => (j, i, 1),
    }
}
