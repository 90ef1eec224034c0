use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::exit;
use super::run::{run_experiment, ExperimentReport, Verdict};
use crate::error::{Error, Issue, Result};
use crate::SCHEMA_VERSION;

/// The shipped manifest with one entry per acceptance experiment.
pub const PAPER_EXAMPLES_JSON: &str = include_str!("../../manifests/paper-examples.json");

/// A list of experiments run as one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub experiments: Vec<ExperimentConfig>,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}

impl Manifest {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            issues.push(Issue {
                field: "schema_version".into(),
                message: format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            });
        }
        if self.experiments.is_empty() {
            issues.push(Issue {
                field: "experiments".into(),
                message: "manifest is empty".into(),
            });
        }
        let mut seen = HashSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                issues.push(Issue {
                    field: format!("experiments[{i}].id"),
                    message: format!("duplicate id {:?}", e.id),
                });
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(issues))
        }
    }

    /// The subset of experiments whose id is in `ids`, in manifest order.
    pub fn select(&self, ids: &[&str]) -> Self {
        Self {
            schema_version: self.schema_version,
            experiments: self
                .experiments
                .iter()
                .filter(|e| ids.contains(&e.id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// The shipped "paper-examples" manifest.
pub fn paper_examples() -> Manifest {
    Manifest::from_json(PAPER_EXAMPLES_JSON).expect("shipped manifest parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Pass,
    Fail,
    ConfigError,
    RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub schema_version: u32,
    pub id: String,
    pub estimator: String,
    pub level: String,
    pub lhs_mean: Option<f64>,
    pub lhs_std_error: Option<f64>,
    pub rhs_value: Option<f64>,
    pub rhs_total_error: Option<f64>,
    pub z_score: Option<f64>,
    pub status: RowStatus,
    pub message: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
    pub reports: Vec<ExperimentReport>,
}

impl SuiteSummary {
    /// 0 when every experiment passed; otherwise the most severe of
    /// runtime error (3), configuration error (2) and failed verdict (1).
    pub fn exit_code(&self) -> i32 {
        self.rows
            .iter()
            .map(|r| match r.status {
                RowStatus::Pass => exit::PASS,
                RowStatus::Fail => exit::VERDICT_FAIL,
                RowStatus::ConfigError => exit::CONFIG_ERROR,
                RowStatus::RuntimeError => exit::RUNTIME_ERROR,
            })
            .max()
            .unwrap_or(exit::PASS)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs every experiment of the manifest. Failures are recorded per row
/// and the suite continues. With `out` set, writes `<id>.json` per
/// successful experiment and `summary.csv`.
pub fn run_suite(manifest: &Manifest, out: Option<&Path>) -> Result<SuiteSummary> {
    manifest.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for cfg in &manifest.experiments {
        let start = std::time::Instant::now();
        let mut row = SuiteRow {
            schema_version: SCHEMA_VERSION,
            id: cfg.id.clone(),
            estimator: cfg.estimator.name().into(),
            level: cfg
                .level
                .iter()
                .map(|u| u.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            lhs_mean: None,
            lhs_std_error: None,
            rhs_value: None,
            rhs_total_error: None,
            z_score: None,
            status: RowStatus::Pass,
            message: String::new(),
            wall_time_s: 0.0,
        };
        match run_experiment(cfg) {
            Ok(rep) => {
                row.lhs_mean = Some(rep.lhs_mean);
                row.lhs_std_error = Some(rep.lhs_std_error);
                row.rhs_value = Some(rep.rhs.value);
                row.rhs_total_error = Some(rep.rhs.total_error);
                row.z_score = rep.z_score;
                row.status = match rep.verdict {
                    Verdict::Pass => RowStatus::Pass,
                    Verdict::Fail => RowStatus::Fail,
                };
                if let Some(dir) = out {
                    fs::write(dir.join(format!("{}.json", cfg.id)), rep.to_json()?)?;
                }
                reports.push(rep);
            }
            Err(e) => {
                row.status = if e.is_configuration() {
                    RowStatus::ConfigError
                } else {
                    RowStatus::RuntimeError
                };
                row.message = e.to_string();
            }
        }
        row.wall_time_s = start.elapsed().as_secs_f64();
        rows.push(row);
    }
    let summary = SuiteSummary { rows, reports };
    if let Some(dir) = out {
        summary.write_csv(fs::File::create(dir.join("summary.csv"))?)?;
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
struct PlotRow {
    schema_version: u32,
    u: f64,
    lhs: f64,
    lhs_ci_lo: f64,
    lhs_ci_hi: f64,
    rhs: f64,
    rhs_error: f64,
}

/// Writes `(u, LHS, LHS confidence interval, RHS)` rows, sorted by level,
/// for reports of one model family and estimator `quantity`. Returns the
/// number of rows.
pub fn emit_plot_data(reports: &[ExperimentReport], quantity: &str, path: &Path) -> Result<usize> {
    let Some(first) = reports.first() else {
        return Err(Error::Validation(vec![Issue {
            field: "reports".into(),
            message: "no reports".into(),
        }]));
    };
    let family = first.config.model.family();
    let mut issues = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        if r.config.model.family() != family || r.estimator != quantity {
            issues.push(Issue {
                field: format!("reports[{i}]"),
                message: format!(
                    "{} / {} does not match {family} / {quantity}",
                    r.config.model.family(),
                    r.estimator
                ),
            });
        }
        if r.level.len() != 1 {
            issues.push(Issue {
                field: format!("reports[{i}].level"),
                message: "plot data needs scalar levels".into(),
            });
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    let mut rows: Vec<PlotRow> = reports
        .iter()
        .map(|r| {
            let half = r.config.tolerance.z_crit * r.lhs_std_error;
            PlotRow {
                schema_version: SCHEMA_VERSION,
                u: r.level[0],
                lhs: r.lhs_mean,
                lhs_ci_lo: r.lhs_mean - half,
                lhs_ci_hi: r.lhs_mean + half,
                rhs: r.rhs.value,
                rhs_error: r.rhs.total_error,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.u.total_cmp(&b.u));
    let mut wr = csv::Writer::from_path(path)?;
    for r in &rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_manifest_is_valid() {
        let m = paper_examples();
        m.validate().unwrap();
        for e in &m.experiments {
            e.validate().unwrap_or_else(|err| panic!("{}: {err}", e.id));
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let m = Manifest {
            schema_version: SCHEMA_VERSION,
            experiments: vec![],
        };
        assert!(matches!(run_suite(&m, None), Err(Error::Validation(_))));
    }
}
