//! Paired experiments: simulate the empirical side, evaluate the Kac-Rice
//! side, and compare them with a combined-error verdict.

mod config;
mod crofton;
mod run;
mod suite;

pub use config::{
    Estimator, ExperimentConfig, GridSettings, TolerancePolicy, DEFAULT_INNER_MC_HARNESS,
};
pub use crofton::{run_crofton, CroftonConfig, CroftonReport, CroftonShape};
pub use run::{
    evaluate_rhs, measure_lhs, run_experiment, verdict, CroftonCheck, ExperimentReport,
    LhsSummary, RhsSummary, Verdict,
};
pub use suite::{
    emit_plot_data, paper_examples, run_suite, Manifest, RowStatus, SuiteRow, SuiteSummary,
    PAPER_EXAMPLES_JSON,
};

/// Process exit codes shared by the CLI and suite summaries.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VERDICT_FAIL: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RUNTIME_ERROR: i32 = 3;

    /// Exit code for an error raised while running.
    pub fn for_error(e: &crate::Error) -> i32 {
        if e.is_configuration() {
            CONFIG_ERROR
        } else {
            RUNTIME_ERROR
        }
    }
}
