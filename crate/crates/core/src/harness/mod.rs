//! Experiment orchestration: lemma checks, convergence runs, and the thin
//! `norm` / `modulus` / `apply` wrappers behind the command-line tool.

mod config;
mod convergence;
mod fit;
mod lemmas;
mod records;
mod single;

use serde::Serialize;

pub use config::{ExperimentConfig, RadiusRule};
pub use convergence::{run_convergence, ConvergenceReport, FitSummary, PowerIdentityCheck};
pub use fit::{fit_rate, RateFit};
pub use lemmas::{
    cell_identity_row, constant_reproduction_rows, mixed_moment_rows, moment_decay_rows,
    norm_bound_rows, partition_rows, run_verify_lemmas, LemmaReport, MOMENT_DECAY_NS,
};
pub use records::{
    csv_string, read_csv, read_csv_file, write_csv, write_csv_file, ConvergenceRecord, CSV_COLUMNS,
};
pub use single::{run_apply, run_modulus, run_norm, ApplyRow, ModulusReport, NormReport};

/// One pass/fail line of a check suite. `slack = limit - measured`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub detail: String,
    pub measured: f64,
    pub limit: f64,
    pub slack: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRow {
    /// A row that passes when `measured <= limit`.
    pub fn at_most(check: &str, detail: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            check: check.into(),
            detail: detail.into(),
            measured,
            limit,
            slack: limit - measured,
            passed: measured <= limit,
            error: None,
        }
    }

    pub fn failed(check: &str, detail: impl Into<String>, err: impl ToString) -> Self {
        Self {
            check: check.into(),
            detail: detail.into(),
            measured: f64::NAN,
            limit: f64::NAN,
            slack: f64::NAN,
            passed: false,
            error: Some(err.to_string()),
        }
    }

    /// Turns an error into a failed row.
    pub fn capture(check: &str, detail: impl Into<String>, f: impl FnOnce() -> crate::Result<(f64, f64)>) -> Self {
        let detail = detail.into();
        match f() {
            Ok((measured, limit)) => Self::at_most(check, detail, measured, limit),
            Err(e) => Self::failed(check, detail, e),
        }
    }

    /// `PASS check [detail] measured=... limit=...`
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{verdict} {} [{}] error: {e}", self.check, self.detail),
            None => format!(
                "{verdict} {} [{}] measured={:.6e} limit={:.6e} slack={:.3e}",
                self.check, self.detail, self.measured, self.limit, self.slack
            ),
        }
    }
}
