use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::config::{Estimator, ExperimentConfig, TolerancePolicy};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field_models::{sample_realization, Field, FieldModel, GaussianGradient, Realization};
use crate::integral_geometry::favard_measure_with;
use crate::kac_rice::{
    euler_char_expectation, kacrice_rhs, second_factorial_moment_rhs, shotnoise_rhs,
    weighted_kacrice_rhs_with, IntegrandGap, RhsEvaluation,
};
use crate::level_set::{count_roots_1d, count_roots_2d, local_time, nodal_length, RootSet};
use crate::linalg::{morse_index, normal_cdf};
use crate::rng::derive_seed;
use crate::stats::MeanAccumulator;
use crate::{SCHEMA_VERSION, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Per-realization Crofton cross-check of planar level curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CroftonCheck {
    pub lines: usize,
    pub realizations: usize,
    /// Realizations whose marching length lies within `z_crit` standard
    /// errors of its Favard estimate.
    pub within: usize,
    pub max_abs_z: f64,
}

/// Empirical side of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsSummary {
    pub estimator: String,
    pub replications: usize,
    pub mean: f64,
    pub std_error: f64,
    /// Per-realization values in realization order.
    pub values: Vec<f64>,
    pub crofton: Option<CroftonCheck>,
}

/// Right-hand side value with its error decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsSummary {
    pub quantity: String,
    pub value: f64,
    pub quadrature_error: f64,
    pub mc_std_error: f64,
    pub truncation_error: f64,
    pub total_error: f64,
    pub outer_nodes: usize,
    pub inner_samples: u64,
    pub clamped_mass: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<IntegrandGap>,
}

impl From<&RhsEvaluation> for RhsSummary {
    fn from(r: &RhsEvaluation) -> Self {
        Self {
            quantity: r.quantity.clone(),
            value: r.value,
            quadrature_error: r.quadrature_error,
            mc_std_error: r.mc_std_error,
            truncation_error: r.truncation_error,
            total_error: r.total_error,
            outer_nodes: r.outer_nodes,
            inner_samples: r.inner_samples,
            clamped_mass: r.clamped_mass,
            gaps: r.gaps.clone(),
        }
    }
}

/// Outcome of [`run_experiment`]. The serialized form is a pure function of
/// the config; the wall time is kept out of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub artifact_version: String,
    pub id: String,
    pub estimator: String,
    pub level: Vec<f64>,
    pub replications: usize,
    pub lhs_mean: f64,
    pub lhs_std_error: f64,
    pub rhs: RhsSummary,
    /// `√(SE_LHS² + err_RHS²)`.
    pub combined_error: f64,
    /// `(LHS − RHS) / combined_error`; absent when the combined error is 0.
    pub z_score: Option<f64>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crofton: Option<CroftonCheck>,
    pub config: ExperimentConfig,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Recomputes the verdict from the recorded numbers.
    pub fn recomputed_verdict(&self) -> Verdict {
        verdict(
            self.lhs_mean,
            self.lhs_std_error,
            self.rhs.value,
            self.rhs.total_error,
            &self.config.tolerance,
        )
        .0
    }
}

/// Verdict, combined error and z-score for the recorded numbers.
pub fn verdict(
    lhs: f64,
    lhs_se: f64,
    rhs: f64,
    rhs_err: f64,
    policy: &TolerancePolicy,
) -> (Verdict, f64, Option<f64>) {
    let combined = lhs_se.hypot(rhs_err);
    let diff = lhs - rhs;
    let z = (combined > 0.0).then(|| diff / combined);
    let bound = match policy.relative {
        Some(r) => r * rhs.abs() + policy.abs_floor,
        None => policy.z_crit * combined + policy.abs_floor,
    };
    let v = if diff.abs() <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    (v, combined, z)
}

fn roots(field: &dyn Field, cfg: &ExperimentConfig) -> Result<RootSet> {
    let dom = &cfg.domain;
    let res = cfg.resolution();
    if dom.dim() == 1 {
        count_roots_1d(field, dom, cfg.level[0], res)
    } else {
        count_roots_2d(field, dom, [cfg.level[0], cfg.level[1]], res, cfg.grid.newton_iters)
    }
}

/// Value of the estimator on one realization, plus an optional
/// `(length, favard)` pair.
fn one_realization(
    cfg: &ExperimentConfig,
    index: usize,
) -> Result<(f64, Option<(f64, f64, f64)>)> {
    let seed = derive_seed(cfg.seed, &cfg.id, index as u64);
    let res = cfg.resolution();
    let dom = &cfg.domain;
    match &cfg.estimator {
        Estimator::Roots => {
            let r = sample_realization(&cfg.model, seed)?;
            Ok((roots(&r, cfg)?.len() as f64, None))
        }
        Estimator::Moment2 => {
            let r = sample_realization(&cfg.model, seed)?;
            let n = roots(&r, cfg)?.len() as f64;
            Ok((n * (n - 1.0), None))
        }
        Estimator::Length => {
            let r = sample_realization(&cfg.model, seed)?;
            let curve = nodal_length(&r, dom, cfg.level[0], res)?;
            let len = curve.length();
            let check = match cfg.grid.favard_lines {
                Some(lines) => {
                    let f = favard_measure_with(
                        &curve.polyline,
                        lines,
                        derive_seed(seed, "favard", 0),
                        Exec::Sequential,
                    )?;
                    Some((len, f.value, f.std_error))
                }
                None => None,
            };
            Ok((len, check))
        }
        Estimator::Weighted { weight } => {
            let r = sample_realization(&cfg.model, seed)?;
            let set = roots(&r, cfg)?;
            let d = cfg.model.output_dim();
            let mut sum = 0.0;
            for loc in set.locations() {
                let jet = r.eval(loc)?;
                sum += weight.eval(d, &jet.jacobian);
            }
            Ok((sum, None))
        }
        Estimator::LocalTime { delta } => {
            let r = sample_realization(&cfg.model, seed)?;
            Ok((local_time(&r, dom, &cfg.level, *delta, res)?, None))
        }
        Estimator::Euler => {
            let grad = FieldModel::GaussianGradient(GaussianGradient::new(cfg.model.clone()));
            let r = sample_realization(&grad, seed)?;
            Ok((euler_sum(&r, cfg)?, None))
        }
    }
}

/// `Σ (−1)^(D − index)` over interior critical points with `X ≥ u`.
fn euler_sum(r: &Realization, cfg: &ExperimentConfig) -> Result<f64> {
    let dim = cfg.domain.dim();
    let set = if dim == 1 {
        count_roots_1d(r, &cfg.domain, 0.0, cfg.resolution())?
    } else {
        count_roots_2d(r, &cfg.domain, [0.0, 0.0], cfg.resolution(), cfg.grid.newton_iters)?
    };
    let mut sum = 0.0;
    for loc in set.locations() {
        let x = r.potential(loc).expect("gradient realization");
        if x < cfg.level[0] {
            continue;
        }
        let jet = r.eval(loc)?;
        let index = morse_index(dim, &jet.jacobian);
        sum += if (dim - index) % 2 == 0 { 1.0 } else { -1.0 };
    }
    Ok(sum)
}

/// Simulates the realizations and averages the chosen estimator.
pub fn measure_lhs(cfg: &ExperimentConfig) -> Result<LhsSummary> {
    cfg.validate()?;
    let n = cfg.replications();
    let parts = Exec::default().map(n, |i| one_realization(cfg, i));
    let mut acc = MeanAccumulator::new();
    let mut values = Vec::with_capacity(n);
    let mut pairs = Vec::new();
    for p in parts {
        let (v, c) = p?;
        acc.push(v);
        values.push(v);
        pairs.extend(c);
    }
    let crofton = cfg.grid.favard_lines.map(|lines| {
        let z = cfg.tolerance.z_crit;
        let mut within = 0;
        let mut max_abs_z: f64 = 0.0;
        for &(len, fav, se) in &pairs {
            let diff = (len - fav).abs();
            if diff <= z * se {
                within += 1;
            }
            max_abs_z = max_abs_z.max(if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::MAX
            });
        }
        CroftonCheck {
            lines,
            realizations: pairs.len(),
            within,
            max_abs_z,
        }
    });
    Ok(LhsSummary {
        estimator: cfg.estimator.name().into(),
        replications: n,
        mean: acc.mean(),
        std_error: acc.std_error(),
        values,
        crofton,
    })
}

/// Evaluates the right-hand side matching the configured estimator.
pub fn evaluate_rhs(cfg: &ExperimentConfig) -> Result<RhsEvaluation> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, &cfg.id, u64::MAX);
    let (m, dom, u, q, inner) = (&cfg.model, &cfg.domain, &cfg.level, &cfg.quadrature, cfg.inner_mc);
    match &cfg.estimator {
        Estimator::Roots | Estimator::Length => match m {
            FieldModel::ShotNoise(s) => shotnoise_rhs(s, dom, u[0], cfg.p_max, inner, seed),
            _ => kacrice_rhs(m, dom, u, q, inner, seed),
        },
        Estimator::Weighted { weight } => weighted_kacrice_rhs_with(m, dom, u, weight, q, inner, seed),
        Estimator::Euler => euler_char_expectation(m, dom, u[0], q, inner, seed),
        Estimator::Moment2 => second_factorial_moment_rhs(m, dom, u[0], q, inner, seed),
        Estimator::LocalTime { delta } => local_time_rhs(cfg, *delta, seed),
    }
}

/// `E LT(δ) = σ_D(box) · P(|X(t) − u| ≤ δ) / (2δ)` for stationary scalar
/// fields.
fn local_time_rhs(cfg: &ExperimentConfig, delta: f64, seed: u64) -> Result<RhsEvaluation> {
    let u = cfg.level[0];
    let (lo, hi) = (u - delta, u + delta);
    let mass = match &cfg.model {
        FieldModel::SpectralGaussian1d(_) | FieldModel::SpectralGaussian2d(_) => {
            let sd = cfg.model.spectrum().expect("spectral").variance().sqrt();
            normal_cdf(hi / sd) - normal_cdf(lo / sd)
        }
        FieldModel::ChiSquare(c) => {
            let var = c.base_spectrum()?.variance();
            let law = ChiSquared::new(c.components as f64)
                .map_err(|e| Error::Model(e.to_string()))?;
            law.cdf(hi.max(0.0) / var) - law.cdf(lo.max(0.0) / var)
        }
        other => {
            return Err(Error::Capability(format!(
                "no local-time expectation for the {} model",
                other.family()
            )))
        }
    };
    let mut out = RhsEvaluation::new("local_time", &cfg.model, &cfg.domain, &cfg.level, seed);
    out.value = cfg.domain.volume() * mass / (2.0 * delta);
    out.outer_nodes = 1;
    Ok(out.finish())
}

/// Runs one paired experiment: simulate, measure, evaluate, compare.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let lhs = measure_lhs(cfg)?;
    let rhs = evaluate_rhs(cfg)?;
    let (v, combined, z) = verdict(lhs.mean, lhs.std_error, rhs.value, rhs.total_error, &cfg.tolerance);
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        artifact_version: VERSION.into(),
        id: cfg.id.clone(),
        estimator: cfg.estimator.name().into(),
        level: cfg.level.clone(),
        replications: lhs.replications,
        lhs_mean: lhs.mean,
        lhs_std_error: lhs.std_error,
        rhs: RhsSummary::from(&rhs),
        combined_error: combined,
        z_score: z,
        verdict: v,
        crofton: lhs.crofton,
        config: cfg.clone(),
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kac_rice::WeightSpec;

    fn sine_cosine() -> ExperimentConfig {
        ExperimentConfig {
            replications: Some(1000),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_harmonic_is_exact() {
        let r = run_experiment(&sine_cosine()).unwrap();
        assert_eq!(r.lhs_mean, 2.0);
        assert_eq!(r.lhs_std_error, 0.0);
        assert!((r.rhs.value - 2.0).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn reports_are_byte_identical() {
        let mut c = sine_cosine();
        c.replications = Some(50);
        c.model = FieldModel::SpectralGaussian1d(crate::field_models::SpectralGaussian1D::band(
            8, 0.5, 1.5, 1.0,
        ));
        c.domain = crate::BoxDomain::interval(0.0, 10.0);
        let a = run_experiment(&c).unwrap().to_json().unwrap();
        let b = crate::exec::with_workers(1, || run_experiment(&c)).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let back = ExperimentReport::from_json(&a).unwrap();
        assert_eq!(back.recomputed_verdict(), back.verdict);
        assert_eq!(back.config, c);
    }

    #[test]
    fn verdict_rules() {
        let p = TolerancePolicy::default();
        assert_eq!(verdict(1.0, 0.1, 1.25, 0.0, &p).0, Verdict::Pass);
        assert_eq!(verdict(1.0, 0.1, 1.35, 0.0, &p).0, Verdict::Fail);
        assert_eq!(verdict(2.0, 0.0, 2.0, 0.0, &p), (Verdict::Pass, 0.0, None));
        let rel = TolerancePolicy {
            relative: Some(0.05),
            ..p
        };
        assert_eq!(verdict(1.04, 0.0, 1.0, 0.0, &rel).0, Verdict::Pass);
        assert_eq!(verdict(1.06, 10.0, 1.0, 0.0, &rel).0, Verdict::Fail);
    }

    #[test]
    fn euler_lhs_single_harmonic() {
        let c = ExperimentConfig {
            estimator: Estimator::Euler,
            replications: Some(200),
            ..ExperimentConfig::default()
        };
        let lhs = measure_lhs(&c).unwrap();
        assert!(lhs.values.iter().all(|&v| v == 1.0), "{:?}", &lhs.values[..10]);
    }

    #[test]
    fn weighted_up_crossings_single_harmonic() {
        let c = ExperimentConfig {
            estimator: Estimator::Weighted {
                weight: WeightSpec::UpCrossing,
            },
            replications: Some(100),
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.lhs_mean, 1.0);
        assert!((r.rhs.value - 1.0).abs() < 1e-12);
    }
}
