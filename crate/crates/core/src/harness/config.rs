use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Issue, Result};
use crate::field_models::{check_supercritical, FieldModel, SpectralGaussian1D};
use crate::integral_geometry::MIN_LINES;
use crate::kac_rice::{Quadrature, WeightSpec, MIN_INNER_MC};
use crate::level_set::{DEFAULT_GRID_1D, DEFAULT_GRID_2D, DEFAULT_NEWTON_ITERS};
use crate::SCHEMA_VERSION;

/// Inner Monte Carlo budget of the right-hand side when a config omits it.
pub const DEFAULT_INNER_MC_HARNESS: usize = 10_000;

/// Which empirical functional of the level set is averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    /// Number of points of `{X = u}` (`D = d`).
    Roots,
    /// Length of `{X = u}` for a scalar field on a planar box.
    Length,
    /// Sum of a weight over the points of `{X = u}` (`D = d`).
    Weighted { weight: WeightSpec },
    /// Occupation density `LT(δ)` of a scalar field.
    LocalTime { delta: f64 },
    /// Interior critical points of `X` above `u`, counted with sign
    /// `(−1)^(D − index)`.
    Euler,
    /// `N(N − 1)` for the number `N` of roots of a process on the line.
    Moment2,
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Roots
    }
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Roots => "roots",
            Estimator::Length => "length",
            Estimator::Weighted { .. } => "weighted",
            Estimator::LocalTime { .. } => "local_time",
            Estimator::Euler => "euler",
            Estimator::Moment2 => "moment2",
        }
    }
}

/// Lattice settings of the empirical side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// Lattice nodes per axis. Default: 2048 on the line, 512 for planar
    /// lengths and local times, 256 for planar root counts.
    pub resolution: Option<usize>,
    /// Newton iterations for planar roots. Default 60.
    pub newton_iters: usize,
    /// When set, every planar level curve is also measured by the Favard
    /// estimator with this many random lines. Default: off.
    pub favard_lines: Option<usize>,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            resolution: None,
            newton_iters: DEFAULT_NEWTON_ITERS,
            favard_lines: None,
        }
    }
}

/// Verdict rule. With `relative` unset the experiment passes iff
/// `|LHS − RHS| ≤ z_crit·√(SE_LHS² + err_RHS²) + abs_floor`; with `relative`
/// set it passes iff `|LHS − RHS| ≤ relative·|RHS| + abs_floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancePolicy {
    /// Default 3.
    pub z_crit: f64,
    /// Default 1e-9.
    pub abs_floor: f64,
    /// Default: unset.
    pub relative: Option<f64>,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            z_crit: 3.0,
            abs_floor: 1e-9,
            relative: None,
        }
    }
}

/// One paired experiment. Every field has a default; the empty document
/// `{}` is the single-harmonic process on one period at level 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Default: the current schema version.
    pub schema_version: u32,
    /// Key for seed derivation and output file names. Default `"experiment"`.
    pub id: String,
    /// Default: single harmonic with frequency 1 and unit amplitude.
    pub model: FieldModel,
    /// Default `[0, 2π]`.
    #[serde(rename = "box")]
    pub domain: BoxDomain,
    /// Level `u`, one entry per output component. Default `[0]`.
    pub level: Vec<f64>,
    /// Default: roots.
    pub estimator: Estimator,
    /// Number of realizations. Default: 10⁴, or 10³ for planar Gaussian
    /// and χ² fields.
    pub replications: Option<usize>,
    /// Master seed. Default 0.
    pub seed: u64,
    pub grid: GridSettings,
    /// Outer quadrature of the right-hand side. Default 256 midpoint nodes.
    pub quadrature: Quadrature,
    /// Inner Monte Carlo budget of the right-hand side. Default 10⁴.
    pub inner_mc: usize,
    /// Poisson truncation for shot noise. Default: automatic.
    pub p_max: Option<usize>,
    pub tolerance: TolerancePolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            id: "experiment".into(),
            model: FieldModel::SpectralGaussian1d(SpectralGaussian1D::single_harmonic(1.0, 1.0)),
            domain: BoxDomain::interval(0.0, TAU),
            level: vec![0.0],
            estimator: Estimator::Roots,
            replications: None,
            seed: 0,
            grid: GridSettings::default(),
            quadrature: Quadrature::default(),
            inner_mc: DEFAULT_INNER_MC_HARNESS,
            p_max: None,
            tolerance: TolerancePolicy::default(),
        }
    }
}

/// Fewest realizations accepted for a confidence-interval verdict.
pub const MIN_REPLICATIONS: usize = 30;

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(match &self.model {
            FieldModel::Microlens(_) => 10_000,
            m if m.input_dim() == 2 => 1000,
            _ => 10_000,
        })
    }

    pub fn resolution(&self) -> usize {
        self.grid.resolution.unwrap_or(match (self.domain.dim(), &self.estimator) {
            (1, _) => DEFAULT_GRID_1D,
            (_, Estimator::Length | Estimator::LocalTime { .. }) => DEFAULT_GRID_2D,
            _ => 256,
        })
    }

    /// Checks every field and returns all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        let mut bad = |field: &str, message: String| {
            issues.push(Issue {
                field: field.into(),
                message,
            })
        };
        if self.schema_version != SCHEMA_VERSION {
            bad(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            );
        }
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            bad("id", "must be a nonempty file-name-safe string".into());
        }
        let model_ok = match self.model.validate() {
            Ok(()) => true,
            Err(e) => {
                bad("model", e.to_string());
                false
            }
        };
        let box_ok = match self.domain.validate() {
            Ok(()) if model_ok && self.domain.dim() != self.model.input_dim() => {
                bad(
                    "box",
                    format!(
                        "has {} dimensions, the model lives in R^{}",
                        self.domain.dim(),
                        self.model.input_dim()
                    ),
                );
                false
            }
            Ok(()) => true,
            Err(e) => {
                bad("box", e.to_string());
                false
            }
        };
        let n = self.replications();
        if n < MIN_REPLICATIONS {
            bad(
                "replications",
                format!("at least {MIN_REPLICATIONS} realizations are needed for a verdict, got {n}"),
            );
        }
        if self.inner_mc < MIN_INNER_MC {
            bad("inner_mc", format!("must be at least {MIN_INNER_MC}"));
        }
        if let Err(e) = self.quadrature.validate() {
            bad("quadrature", e.to_string());
        }
        if self.resolution() < 3 {
            bad("grid.resolution", "must be at least 3".into());
        }
        if self.grid.newton_iters == 0 {
            bad("grid.newton_iters", "must be positive".into());
        }
        if let Some(l) = self.grid.favard_lines {
            if l < MIN_LINES {
                bad("grid.favard_lines", format!("must be at least {MIN_LINES}"));
            }
        }
        if self.p_max == Some(0) {
            bad("p_max", "must be at least 1".into());
        }
        let t = &self.tolerance;
        if !(t.z_crit.is_finite() && t.z_crit >= 0.0) {
            bad("tolerance.z_crit", "must be finite and non-negative".into());
        }
        if !(t.abs_floor.is_finite() && t.abs_floor >= 0.0) {
            bad("tolerance.abs_floor", "must be finite and non-negative".into());
        }
        if let Some(r) = t.relative {
            if !(r.is_finite() && r >= 0.0) {
                bad("tolerance.relative", "must be finite and non-negative".into());
            }
        }
        if model_ok {
            let m = &self.model;
            if self.level.len() != m.output_dim() || self.level.iter().any(|u| !u.is_finite()) {
                bad(
                    "level",
                    format!("needs {} finite components", m.output_dim()),
                );
            } else {
                match m {
                    FieldModel::ChiSquare(_) if self.level[0] <= 0.0 => bad(
                        "level",
                        format!("χ² levels must satisfy u > 0, got {}", self.level[0]),
                    ),
                    FieldModel::ShotNoise(_) if self.level[0] == 0.0 => {
                        bad("level", "shot-noise levels must satisfy u ≠ 0".into())
                    }
                    _ => {}
                }
            }
            if let (FieldModel::ShotNoise(s), true) = (m, box_ok) {
                match s.interior() {
                    Ok(i) if i.contains_closed(&self.domain.lo) && i.contains_closed(&self.domain.hi) => {}
                    _ => bad(
                        "box",
                        "must lie at distance ≥ η from the Poisson domain boundary".into(),
                    ),
                }
            }
            if let FieldModel::Microlens(sys) = m {
                if !check_supercritical(sys) {
                    bad("model", "microlensing needs 1 − κ_c + γ < 0".into());
                }
                if sys.star_positions.is_some() {
                    bad("model.star_positions", "star positions must be random".into());
                }
            }
            self.check_estimator(&mut bad);
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    fn check_estimator(&self, bad: &mut impl FnMut(&str, String)) {
        let m = &self.model;
        let (dim, d) = (m.input_dim(), m.output_dim());
        match &self.estimator {
            Estimator::Roots if dim != d => {
                bad("estimator", "root counts need as many outputs as inputs".into())
            }
            Estimator::Length if !(dim == 2 && d == 1) => {
                bad("estimator", "lengths need a scalar field on a planar box".into())
            }
            Estimator::Weighted { weight } => {
                if dim != d {
                    bad("estimator", "weighted sums need as many outputs as inputs".into());
                } else if let Err(e) = weight.check(m) {
                    bad("estimator.weight", e.to_string());
                } else if matches!(m, FieldModel::ShotNoise(_) | FieldModel::Microlens(_)) {
                    bad("estimator", "weights are not supported for this model".into());
                }
            }
            Estimator::LocalTime { delta } => {
                if !(delta.is_finite() && *delta > 0.0) {
                    bad("estimator.delta", "must be positive".into());
                }
                if !matches!(
                    m,
                    FieldModel::SpectralGaussian1d(_)
                        | FieldModel::SpectralGaussian2d(_)
                        | FieldModel::ChiSquare(_)
                ) {
                    bad("estimator", "local time needs a scalar Gaussian or χ² field".into());
                }
            }
            Estimator::Euler if !m.has_hessian() => {
                bad("estimator", "the Euler characteristic needs a C² scalar Gaussian field".into())
            }
            Estimator::Moment2 if !matches!(m, FieldModel::SpectralGaussian1d(_)) => {
                bad("estimator", "the factorial moment needs a Gaussian process on the line".into())
            }
            _ => {}
        }
    }
}
