use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SCHEMA_VERSION;

/// A finite union of planar polygonal chains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub components: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    schema_version: u32,
    component: usize,
    vertex: usize,
    x: f64,
    y: f64,
}

impl Polyline {
    pub fn new(components: Vec<Vec<[f64; 2]>>) -> Self {
        Self { components }
    }

    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Self {
        Self::new(vec![vec![a, b]])
    }

    /// Closed circle approximation with `n` vertices.
    pub fn circle(center: [f64; 2], radius: f64, n: usize) -> Self {
        let mut pts: Vec<[f64; 2]> = (0..n)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                [center[0] + radius * th.cos(), center[1] + radius * th.sin()]
            })
            .collect();
        pts.push(pts[0]);
        Self::new(vec![pts])
    }

    pub fn push_component(&mut self, pts: Vec<[f64; 2]>) {
        self.components.push(pts);
    }

    pub fn segments(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.components
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[0], w[1])))
    }

    pub fn segment_count(&self) -> usize {
        self.components.iter().map(|c| c.len().saturating_sub(1)).sum()
    }

    pub fn length(&self) -> f64 {
        self.segments()
            .map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1]))
            .sum()
    }

    pub fn bounding_box(&self) -> Option<([f64; 2], [f64; 2])> {
        let mut it = self.components.iter().flatten();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1])],
                [hi[0].max(p[0]), hi[1].max(p[1])],
            )
        }))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if c.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("component {i} has a non-finite vertex")));
            }
        }
        Ok(())
    }

    /// Writes `schema_version,component,vertex,x,y` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (ci, c) in self.components.iter().enumerate() {
            for (vi, p) in c.iter().enumerate() {
                wr.serialize(Row {
                    schema_version: SCHEMA_VERSION,
                    component: ci,
                    vertex: vi,
                    x: p[0],
                    y: p[1],
                })?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows: Vec<Row> = Vec::new();
        for row in rd.deserialize() {
            let row: Row = row?;
            if row.schema_version != SCHEMA_VERSION {
                return Err(Error::Config(format!(
                    "unsupported polyline schema_version {}",
                    row.schema_version
                )));
            }
            rows.push(row);
        }
        rows.sort_by_key(|r| (r.component, r.vertex));
        let mut out = Polyline::default();
        for r in rows {
            while out.components.len() <= r.component {
                out.components.push(Vec::new());
            }
            out.components[r.component].push([r.x, r.y]);
        }
        out.validate()?;
        Ok(out)
    }
}
