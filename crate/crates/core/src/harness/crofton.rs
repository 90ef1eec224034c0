use serde::{Deserialize, Serialize};

use super::run::Verdict;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::integral_geometry::{
    crofton_identity_mc_with, favard_measure_with, gaussian_det_expectation, gaussian_det_mc,
    normal_jacobian, JacobianMatrix, Polyline, MIN_LINES,
};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::SCHEMA_VERSION;

/// Test curve for the Favard estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CroftonShape {
    Segment { a: [f64; 2], b: [f64; 2] },
    Circle { center: [f64; 2], radius: f64, vertices: usize },
    Polyline { polyline: Polyline },
}

impl CroftonShape {
    pub fn polyline(&self) -> Result<Polyline> {
        match self {
            CroftonShape::Segment { a, b } => Ok(Polyline::segment(*a, *b)),
            CroftonShape::Circle {
                center,
                radius,
                vertices,
            } => {
                if *vertices < 3 || !(*radius > 0.0) {
                    return Err(Error::Config("circle needs radius > 0 and ≥ 3 vertices".into()));
                }
                Ok(Polyline::circle(*center, *radius, *vertices))
            }
            CroftonShape::Polyline { polyline } => {
                polyline.validate()?;
                Ok(polyline.clone())
            }
        }
    }
}

/// Integral-geometry checks: Favard measure of curves, Gaussian determinant
/// constants and the Crofton identity on random matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CroftonConfig {
    pub schema_version: u32,
    /// Default: unit segment and unit circle (4096 vertices).
    pub shapes: Vec<CroftonShape>,
    /// Default 10⁶.
    pub n_lines: usize,
    /// Relative tolerance of the Favard check. Default 0.01.
    pub favard_relative: f64,
    /// `(D, d)` pairs for the determinant constants.
    pub det_shapes: Vec<[usize; 2]>,
    /// Default 10⁶.
    pub det_samples: usize,
    /// `(d, D)` shapes of the random matrices for the Crofton identity.
    pub identity_shapes: Vec<[usize; 2]>,
    /// Random matrices per shape. Default 10.
    pub matrices_per_shape: usize,
    /// Haar samples per matrix. Default 10⁶.
    pub haar_samples: usize,
    /// Default 3.
    pub z_crit: f64,
    pub seed: u64,
}

impl Default for CroftonConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            shapes: vec![
                CroftonShape::Segment {
                    a: [0.0, 0.0],
                    b: [1.0, 0.0],
                },
                CroftonShape::Circle {
                    center: [0.0, 0.0],
                    radius: 1.0,
                    vertices: 4096,
                },
            ],
            n_lines: 1_000_000,
            favard_relative: 0.01,
            det_shapes: vec![[1, 1], [2, 1], [2, 2], [3, 1], [3, 2], [3, 3], [4, 2]],
            det_samples: 1_000_000,
            identity_shapes: vec![[1, 2], [1, 3], [2, 3]],
            matrices_per_shape: 10,
            haar_samples: 1_000_000,
            z_crit: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FavardRow {
    pub shape: CroftonShape,
    pub length: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub relative_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetRow {
    pub ambient: usize,
    pub d: usize,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub rows: usize,
    pub cols: usize,
    pub matrix: usize,
    pub normal_jacobian: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CroftonReport {
    pub schema_version: u32,
    pub favard: Vec<FavardRow>,
    pub det_constants: Vec<DetRow>,
    pub identity: Vec<IdentityRow>,
    pub verdict: Verdict,
    pub config: CroftonConfig,
}

fn pass(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn run_crofton(cfg: &CroftonConfig) -> Result<CroftonReport> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported schema_version {}", cfg.schema_version)));
    }
    if cfg.n_lines < MIN_LINES && !cfg.shapes.is_empty() {
        return Err(Error::Config(format!("n_lines must be at least {MIN_LINES}")));
    }
    if cfg.det_samples < 2 || cfg.haar_samples < 100 {
        return Err(Error::Config("need at least 2 determinant and 100 Haar samples".into()));
    }
    let exec = Exec::default();
    let mut favard = Vec::new();
    for (i, shape) in cfg.shapes.iter().enumerate() {
        let p = shape.polyline()?;
        let e = favard_measure_with(&p, cfg.n_lines, derive_seed(cfg.seed, "favard", i as u64), exec)?;
        let length = p.length();
        let rel = (e.value - length).abs() / length;
        favard.push(FavardRow {
            shape: shape.clone(),
            length,
            estimate: e.value,
            std_error: e.std_error,
            relative_error: rel,
            verdict: pass(rel <= cfg.favard_relative),
        });
    }
    let mut det_constants = Vec::new();
    for (i, &[ambient, d]) in cfg.det_shapes.iter().enumerate() {
        if d == 0 || d > ambient {
            return Err(Error::Config(format!("invalid determinant shape ({ambient}, {d})")));
        }
        let exact = gaussian_det_expectation(ambient, d);
        let e = gaussian_det_mc(ambient, d, cfg.det_samples, derive_seed(cfg.seed, "det", i as u64), exec);
        det_constants.push(DetRow {
            ambient,
            d,
            exact,
            estimate: e.value,
            std_error: e.std_error,
            verdict: pass(e.within(exact, cfg.z_crit)),
        });
    }
    let mut identity = Vec::new();
    for (i, &[rows, cols]) in cfg.identity_shapes.iter().enumerate() {
        if rows == 0 || rows > cols {
            return Err(Error::Config(format!("invalid matrix shape {rows}×{cols}")));
        }
        let mut rng = stream_rng(derive_seed(cfg.seed, "matrices", i as u64), 0, Stream::GaussianMatrix);
        for k in 0..cfg.matrices_per_shape {
            let m = JacobianMatrix::gaussian(&mut rng, rows, cols);
            let exact = normal_jacobian(&m);
            let seed = derive_seed(cfg.seed, "haar", ((i as u64) << 32) | k as u64);
            let e = crofton_identity_mc_with(&m, cfg.haar_samples, seed, exec)?;
            identity.push(IdentityRow {
                rows,
                cols,
                matrix: k,
                normal_jacobian: exact,
                estimate: e.value,
                std_error: e.std_error,
                verdict: pass(e.within(exact, cfg.z_crit)),
            });
        }
    }
    let all = favard.iter().map(|r| r.verdict)
        .chain(det_constants.iter().map(|r| r.verdict))
        .chain(identity.iter().map(|r| r.verdict))
        .all(|v| v == Verdict::Pass);
    Ok(CroftonReport {
        schema_version: SCHEMA_VERSION,
        favard,
        det_constants,
        identity,
        verdict: pass(all),
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run() {
        let cfg = CroftonConfig {
            n_lines: 20_000,
            det_samples: 20_000,
            haar_samples: 20_000,
            matrices_per_shape: 2,
            favard_relative: 0.05,
            z_crit: 4.0,
            ..CroftonConfig::default()
        };
        let r = run_crofton(&cfg).unwrap();
        assert_eq!(r.favard.len(), 2);
        assert_eq!(r.det_constants.len(), 7);
        assert_eq!(r.identity.len(), 6);
        assert_eq!(r.verdict, Verdict::Pass, "{r:#?}");
    }

    #[test]
    fn config_round_trip() {
        let c = CroftonConfig::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<CroftonConfig>(&s).unwrap(), c);
    }
}
