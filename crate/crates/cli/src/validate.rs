//! Schema and physical sanity checks without running the task.

use abflux_core::fields::{build_shielded_scenario, ShieldedKind};
use serde::Serialize;

use crate::config::{parse_scenario, LoopSpec, PotentialSpec, Prepared, Scenario, Task};
use crate::error::CliError;
use crate::tasks::pde_setup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        if self.path.is_empty() {
            write!(f, "{sev}: {}", self.message)
        } else {
            write!(f, "{sev}: {}: {}", self.path, self.message)
        }
    }
}

pub fn has_errors(d: &[Diagnostic]) -> bool {
    d.iter().any(|d| d.severity == Severity::Error)
}

fn error(path: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        path: path.into(),
        message: message.into(),
    }
}

fn warning(path: &str, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        path: path.into(),
        message: message.into(),
    }
}

impl From<CliError> for Diagnostic {
    fn from(e: CliError) -> Self {
        match e {
            CliError::ConfigInvalid { path, message } => error(&path, message),
            CliError::Task { context, source } => error(&context, source.to_string()),
            other => error("", other.to_string()),
        }
    }
}

/// Parses and checks a scenario document.
pub fn validate_text(text: &str, overrides: &[String]) -> Vec<Diagnostic> {
    match parse_scenario(text, overrides) {
        Ok(sc) => validate_scenario(&sc),
        Err(e) => vec![e.into()],
    }
}

pub fn validate_scenario(sc: &Scenario) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let prep = match Prepared::new(sc) {
        Ok(p) => p,
        Err(e) => {
            out.push(e.into());
            return out;
        }
    };
    let need = |out: &mut Vec<Diagnostic>, ok: bool, key: &str| {
        if !ok {
            out.push(error(key, format!("required by task `{}`", sc.task.name())));
        }
    };
    let pair = sc.potential_b.is_some() || sc.gauge.is_some();
    let mut tolerances: Vec<(&str, Option<f64>)> = Vec::new();
    match &sc.task {
        Task::TraceRays(_) => need(&mut out, prep.domain.is_some(), "domain"),
        Task::RayTransforms(t) => {
            need(&mut out, prep.domain.is_some(), "domain");
            need(&mut out, prep.potential.is_some(), "potential");
            need(&mut out, pair, "potential_b");
            tolerances.push(("task.mag_tolerance", t.mag_tolerance));
            tolerances.push(("task.elec_tolerance", t.elec_tolerance));
        }
        Task::Holonomy(t) => {
            need(&mut out, prep.potential.is_some(), "potential");
            if t.loops.iter().any(|l| matches!(l, LoopSpec::Generators(_))) {
                need(&mut out, prep.domain.is_some(), "domain");
            }
            if t.tolerance.is_some() && t.expected.is_none() {
                out.push(error("task.expected", "a tolerance needs an expected holonomy"));
            }
            if let Some(s) = &t.flux_sweep {
                if !matches!(sc.potential, Some(PotentialSpec::Vortex(_))) {
                    out.push(error("task.flux_sweep", "flux sweeps need a vortex potential"));
                }
                if s.count < 2 {
                    out.push(error("task.flux_sweep.count", "need at least 2 points"));
                }
            }
            tolerances.push(("task.tolerance", t.tolerance));
        }
        Task::Equivalence(t) => {
            need(&mut out, prep.domain.is_some(), "domain");
            need(&mut out, prep.potential.is_some(), "potential");
            need(&mut out, pair, "potential_b");
            if t.round_trip_tolerance.is_some() && t.reference_gauge.is_none() && sc.gauge.is_none() {
                out.push(error(
                    "task.round_trip_tolerance",
                    "needs `gauge` or `task.reference_gauge`",
                ));
            }
            if t.round_trip_tolerance.is_some() && t.targets == 0 {
                out.push(error("task.targets", "a round-trip check needs targets > 0"));
            }
            if let (Some(r), Some(d)) = (&t.reference_gauge, &prep.domain) {
                if let Err(e) = r.build(Some(d)) {
                    out.push(error("task.reference_gauge", e.to_string()));
                }
            }
            tolerances.push(("task.round_trip_tolerance", t.round_trip_tolerance));
            tolerances.push(("task.witness_tolerance", t.witness_tolerance));
        }
        Task::NonabelianRadon(t) => {
            if t.potential.terms.is_empty() {
                out.push(error("task.potential.terms", "needs at least one term"));
            }
            if let Some(g) = &t.gauge {
                if let Err(e) = g.build() {
                    out.push(error("task.gauge", e.to_string()));
                }
            } else if t.invariance_tolerance.is_some() {
                out.push(error("task.invariance_tolerance", "needs `task.gauge`"));
            }
            if !(t.step > 0.0) {
                out.push(error("task.step", "must be positive"));
            }
            tolerances.push(("task.unitarity_tolerance", t.unitarity_tolerance));
            tolerances.push(("task.invariance_tolerance", t.invariance_tolerance));
        }
        Task::SchrodingerBoundaryData(t) | Task::Dtn(t) => {
            need(&mut out, prep.potential.is_some(), "potential");
            if let Some(domain) = &prep.domain {
                match pde_setup(domain, t) {
                    Ok((grid, _)) => {
                        let h = grid.hx().min(grid.hy());
                        for (j, o) in domain.obstacles().iter().enumerate() {
                            let step = grid.dt * o.motion.max_speed();
                            if step >= h {
                                out.push(error(
                                    &format!("domain.obstacles.{j}.motion"),
                                    format!("obstacle moves {step:.3e} per time step, not less than the grid spacing h = {h:.3e}"),
                                ));
                            }
                        }
                        for w in grid.warnings() {
                            out.push(warning("task.grid", w));
                        }
                    }
                    Err(e) => out.push(e.into()),
                }
            } else {
                need(&mut out, false, "domain");
            }
            if t.tolerance.is_some() && !pair {
                out.push(error("task.tolerance", "needs a pair (`potential_b` or `gauge`)"));
            }
            tolerances.push(("task.tolerance", t.tolerance));
        }
        Task::ShieldedDemo(t) => {
            if let Err(e) = build_shielded_scenario(&t.scenario) {
                out.push(error("task.scenario", e.to_string()));
            }
            if t.scenario.kind == ShieldedKind::Magnetic && !t.cross_sections.is_empty() {
                out.push(error(
                    "task.cross_sections",
                    "cross sections are defined for the electric scenario only",
                ));
            }
            tolerances.push(("task.tolerance", t.tolerance));
        }
    }
    for (path, tol) in tolerances {
        if let Some(v) = tol {
            if !(v > 0.0 && v.is_finite()) {
                out.push(error(path, format!("tolerance must be positive and finite, got {v}")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shielded(delta: f64) -> String {
        format!(
            r#"
schema_version = 1
name = "s"
[task]
kind = "shielded-demo"
spatial = [{{ t = 1.2, radius = 0.8 }}]
[task.scenario]
kind = "electric"
profile = {{ kind = "smooth_step", from = 1.0, to = 2.0, t1 = 1.0, width = 2.0 }}
v0 = 1.0
r1 = 0.25
delta = {delta}
outer_radius = 6.0
t_end = 5.0
"#
        )
    }

    #[test]
    fn mollifier_bound() {
        assert!(validate_text(&shielded(0.0625), &[]).is_empty());
        let d = validate_text(&shielded(0.25), &[]);
        assert!(has_errors(&d));
        assert!(d[0].message.contains("mollifier exceeds shielding bound"), "{d:?}");
    }

    #[test]
    fn obstacle_leaving_reports_time() {
        let text = r#"
schema_version = 1
name = "o"
[domain]
outer = { kind = "disk", center = [0.0, 0.0], radius = 2.0 }
obstacles = [{ shape = { kind = "disk", center = [0.0, 0.0], radius = 0.5 }, motion = { kind = "linear", velocity = [1.875, 0.0] } }]
t_end = 1.0
[task]
kind = "trace-rays"
family = { angles = 4, offsets = 4 }
"#;
        let d = validate_text(text, &[]);
        assert!(has_errors(&d));
        assert!(d[0].message.contains("at t = 0.8"), "{d:?}");
    }
}
