use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::config::Scenario;
use crate::error::{CliError, Result};

/// Pass/fail against a declared tolerance or expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
    pub pass: bool,
}

impl Check {
    /// `value ≤ tolerance`; NaN fails.
    pub fn bound(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value: Some(value),
            tolerance: Some(tolerance),
            expected: None,
            observed: None,
            pass: value <= tolerance,
        }
    }

    pub fn equal(name: &str, expected: impl ToString, observed: impl ToString) -> Self {
        let (e, o) = (expected.to_string(), observed.to_string());
        Self {
            name: name.into(),
            value: None,
            tolerance: None,
            pass: e == o,
            expected: Some(e),
            observed: Some(o),
        }
    }

    pub fn describe(&self) -> String {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        match (self.value, self.tolerance, &self.expected, &self.observed) {
            (Some(v), Some(t), _, _) => format!("{}: {v:.3e} <= {t:.1e} {verdict}", self.name),
            (_, _, Some(e), Some(o)) => format!("{}: expected {e}, got {o} {verdict}", self.name),
            _ => format!("{}: {verdict}", self.name),
        }
    }
}

/// Everything a task produces; files are written by the report owner.
#[derive(Debug, Default)]
pub struct TaskOutput {
    pub results: serde_json::Value,
    pub discrepancies: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub files: Vec<(String, Vec<u8>)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// No tolerance was declared.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub setup_seconds: f64,
    pub task_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub abflux_version: String,
    pub scenario: Scenario,
    pub overrides: Vec<String>,
    pub task: String,
    pub status: Status,
    pub checks: Vec<Check>,
    pub discrepancies: BTreeMap<String, f64>,
    pub results: serde_json::Value,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Writes the task files and `report.json` into `dir`.
    pub fn write(&self, dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
        let fail = |path: &Path, source| CliError::Write {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        for (name, bytes) in files {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| fail(&p, e))?;
        }
        let p = dir.join("report.json");
        std::fs::write(&p, self.to_json()).map_err(|e| fail(&p, e))
    }

    pub fn summary(&self) -> String {
        let mut s = format!("scenario {} ({})\n", self.scenario.name, self.task);
        for w in &self.warnings {
            s += &format!("  warning: {w}\n");
        }
        for (k, v) in &self.discrepancies {
            s += &format!("  {k} = {v:.6e}\n");
        }
        for c in &self.checks {
            s += &format!("  check {}\n", c.describe());
        }
        let status = match self.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Unchecked => "done (no tolerances declared)",
        };
        s += &format!("status: {status}\n");
        s
    }
}

pub fn status_of(checks: &[Check]) -> Status {
    if checks.is_empty() {
        Status::Unchecked
    } else if checks.iter().all(|c| c.pass) {
        Status::Pass
    } else {
        Status::Fail
    }
}
