//! Scenario runner for `abflux`: config ingestion, task execution and
//! report emission.
//!
//! A run is a pure function of the scenario text, the `--set` overrides
//! and the seed it contains. Timings are the only nondeterministic part of
//! a report and are omitted with `--no-timings`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;
pub mod tasks;
pub mod validate;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{parse_scenario, Scenario};
pub use error::{CliError, Result};
pub use report::{Report, Status};
pub use validate::{validate_scenario, validate_text, Diagnostic, Severity};

use report::{status_of, Timings};

/// Exit code of a run that met every declared tolerance.
pub const EXIT_PASS: i32 = 0;
/// Exit code for errors: unreadable or invalid config, failed task.
pub const EXIT_ERROR: i32 = 1;
/// Exit code when a declared tolerance was not met.
pub const EXIT_TOLERANCE: i32 = 2;

/// Scenario text and where it came from: a file path or a built-in name.
pub fn load_source(source: &str) -> Result<(String, String)> {
    let path = Path::new(source);
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Read {
            path: source.to_string(),
            source: e,
        })?;
        return Ok((text, path.display().to_string()));
    }
    match scenarios::find(source) {
        Some(b) => Ok((b.toml.to_string(), format!("built-in {}", b.name))),
        None => Err(CliError::Read {
            path: source.to_string(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "no such file or built-in scenario (see `abflux list-scenarios`)",
            ),
        }),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub overrides: Vec<String>,
    /// Output directory; defaults to the scenario's `output_dir`, then
    /// `abflux-out/<name>`.
    pub out_dir: Option<PathBuf>,
    pub timings: bool,
}

/// Runs a scenario document and writes `report.json` plus task CSVs.
pub fn run_text(text: &str, opts: &RunOptions) -> Result<(Report, PathBuf)> {
    let start = Instant::now();
    let sc = parse_scenario(text, &opts.overrides)?;
    let diags = validate_scenario(&sc);
    if validate::has_errors(&diags) {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(CliError::Rejected(msg.join("\n")));
    }
    let prep = config::Prepared::new(&sc)?;
    let setup = start.elapsed().as_secs_f64();
    let task_start = Instant::now();
    let out = tasks::execute(&sc, &prep)?;
    let task_seconds = task_start.elapsed().as_secs_f64();
    let mut warnings: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    warnings.extend(out.warnings);
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| sc.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("abflux-out").join(&sc.name));
    let mut report = Report {
        abflux_version: env!("CARGO_PKG_VERSION").to_string(),
        task: sc.task.name().to_string(),
        overrides: opts.overrides.clone(),
        status: status_of(&out.checks),
        checks: out.checks,
        discrepancies: out.discrepancies,
        results: out.results,
        outputs: out.files.iter().map(|(n, _)| n.clone()).collect(),
        warnings,
        timings: None,
        scenario: sc,
    };
    if opts.timings {
        report.timings = Some(Timings {
            setup_seconds: setup,
            task_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        });
    }
    report.write(&dir, &out.files)?;
    Ok((report, dir))
}

/// Exit code for a finished run.
pub fn exit_code(report: &Report) -> i32 {
    if report.passed() {
        EXIT_PASS
    } else {
        EXIT_TOLERANCE
    }
}
