//! Scenario files: a TOML document with `schema_version = 1`.
//!
//! Unknown keys are rejected everywhere. Command-line overrides
//! (`--set task.tolerance=1e-9`) are applied to the parsed TOML tree before
//! it is checked against the schema, so they take precedence over file
//! values and show up in the report's scenario echo.

use std::sync::Arc;

use abflux_core::fields::{
    CoefficientPotential, ConstantPotential, GaussianBump, PauliBumps, SharedPotential, ShieldedElectric,
    ShieldedParams, SumPotential, TimeProfile, Vortex, ZeroPotential,
};
use abflux_core::gauge::{ExpGauge, GaugeElement, PhaseField};
use abflux_core::geometry::{Domain, Obstacle, OuterRegion};
use abflux_core::schrodinger::DirichletSpec;
use abflux_core::transport::{LineFamily, RayFamily};
use abflux_core::{vec2, CMat, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: i64,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    /// Seed for randomized target sets; runs are deterministic given it.
    #[serde(default)]
    pub seed: u64,
    /// Default output directory, overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    /// Second member of a potential pair. When absent, tasks that compare a
    /// pair use `potential` transformed by `gauge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_b: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSpec>,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub outer: OuterRegion,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub t_end: f64,
}

impl DomainSpec {
    pub fn build(&self) -> abflux_core::Result<Domain> {
        Domain::new(self.outer.clone(), self.obstacles.clone(), self.t_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero(Empty),
    Constant(ConstantSpec),
    Vortex(Vortex),
    #[serde(alias = "gaussian-bump")]
    GaussianBump(GaussianBump),
    /// Polynomial/trigonometric coefficient table.
    Coefficients(CoefficientPotential),
    #[serde(alias = "shielded-electric")]
    ShieldedElectric(ShieldedSpec),
    /// Moving regularised vortex with flux b(t) and core δ.
    #[serde(alias = "shielded-magnetic")]
    ShieldedMagnetic(ShieldedSpec),
    Sum(SumSpec),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    #[serde(default)]
    pub a: [f64; 2],
    #[serde(default)]
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShieldedSpec {
    pub v0: f64,
    pub profile: TimeProfile,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumSpec {
    pub parts: Vec<PotentialSpec>,
}

impl PotentialSpec {
    pub fn build(&self) -> abflux_core::Result<SharedPotential> {
        Ok(match self {
            PotentialSpec::Zero(_) => Arc::new(ZeroPotential),
            PotentialSpec::Constant(c) => Arc::new(ConstantPotential {
                a: vec2(c.a[0], c.a[1]),
                v: c.v,
            }),
            PotentialSpec::Vortex(v) => {
                v.flux.validate()?;
                Arc::new(v.clone())
            }
            PotentialSpec::GaussianBump(g) => {
                g.validate()?;
                Arc::new(g.clone())
            }
            PotentialSpec::Coefficients(c) => Arc::new(c.clone()),
            PotentialSpec::ShieldedElectric(s) => Arc::new(ShieldedElectric::new(s.v0, s.profile.clone(), s.delta)?),
            PotentialSpec::ShieldedMagnetic(s) => {
                s.profile.validate()?;
                Arc::new(Vortex::new(vec2(0.0, 0.0), vec2(s.v0, 0.0), s.delta, s.profile.clone()))
            }
            PotentialSpec::Sum(s) => Arc::new(SumPotential::new(
                s.parts.iter().map(|p| p.build()).collect::<abflux_core::Result<_>>()?,
            )),
        })
    }
}

/// `c = exp(i[Σ m_j θ_j + ψ])`; `windings` has one entry per obstacle or
/// is empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    #[serde(default)]
    pub windings: Vec<i64>,
    #[serde(default)]
    pub psi: PhaseField,
}

impl GaugeSpec {
    pub fn build(&self, domain: Option<&Domain>) -> abflux_core::Result<GaugeElement> {
        self.psi.validate()?;
        if self.windings.iter().all(|&m| m == 0) {
            return Ok(GaugeElement::phase(self.psi.clone()));
        }
        let domain = domain.ok_or_else(|| {
            abflux_core::Error::InvalidArgument("a gauge with windings needs a domain with obstacles".into())
        })?;
        GaugeElement::with_windings(domain, &self.windings, self.psi.clone())
    }
}

/// `g = exp(iβ H)` with `H = h0·I + h1σ1 + h2σ2 + h3σ3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixGaugeSpec {
    pub generator: [f64; 4],
    pub beta: PhaseField,
}

impl MatrixGaugeSpec {
    pub fn build(&self) -> abflux_core::Result<ExpGauge> {
        let mut h = CMat::identity(2, 2) * C64::from(self.generator[0]);
        for k in 1..4 {
            h += abflux_core::fields::pauli(k) * C64::from(self.generator[k]);
        }
        ExpGauge::new(h, self.beta.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    TraceRays(TraceRaysTask),
    RayTransforms(RayTransformsTask),
    Holonomy(HolonomyTask),
    Equivalence(EquivalenceTask),
    NonabelianRadon(RadonTask),
    SchrodingerBoundaryData(PdeTask),
    Dtn(PdeTask),
    ShieldedDemo(ShieldedTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::TraceRays(_) => "trace-rays",
            Task::RayTransforms(_) => "ray-transforms",
            Task::Holonomy(_) => "holonomy",
            Task::Equivalence(_) => "equivalence",
            Task::NonabelianRadon(_) => "nonabelian-radon",
            Task::SchrodingerBoundaryData(_) => "schrodinger-boundary-data",
            Task::Dtn(_) => "dtn",
            Task::ShieldedDemo(_) => "shielded-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRaysTask {
    pub family: RayFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayTransformsTask {
    pub family: RayFamily,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    /// Bound on max |exp(iΔmag) − 1|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mag_tolerance: Option<f64>,
    /// Bound on max |Δelec − gauge term|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elec_tolerance: Option<f64>,
}

fn default_quad_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopSpec {
    Circle(CircleLoop),
    /// Closed polygon through spacetime events `[x1, x2, t]`.
    Polygon(PolygonLoop),
    /// One loop around each obstacle of the domain at time `t`.
    Generators(GeneratorLoops),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleLoop {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub t: f64,
    #[serde(default = "default_vertices")]
    pub vertices: usize,
}

fn default_vertices() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonLoop {
    pub events: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorLoops {
    #[serde(default)]
    pub t: f64,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
}

fn default_clearance() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyTask {
    pub loops: Vec<LoopSpec>,
    /// Expected holonomy `[re, im]` on every loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Holonomy of the first loop as the (constant) vortex flux varies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux_sweep: Option<FluxSweep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSweep {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Equivalent,
    Inequivalent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceTask {
    /// Defaults to 16 uniform times over [0, T].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_samples: Option<Vec<f64>>,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    #[serde(default = "default_tol_h")]
    pub tol_h: f64,
    /// Number of random spacetime targets for gauge reconstruction.
    #[serde(default)]
    pub targets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_windings: Option<Vec<i64>>,
    /// Expected witness holonomy `[re, im]` for an inequivalent pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_witness: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_tolerance: Option<f64>,
    /// Known gauge to compare the reconstruction against; defaults to the
    /// scenario `gauge`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_gauge: Option<GaugeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_trip_tolerance: Option<f64>,
}

fn default_tol_h() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadonTask {
    pub potential: PauliBumps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<MatrixGaugeSpec>,
    pub families: Vec<LineFamily>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitarity_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariance_tolerance: Option<f64>,
}

fn default_step() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    /// Smooth ramp over the first 5% of the run.
    #[default]
    Standard,
    /// Smooth envelope over the whole run.
    Full,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Nodes per side on the rectangular outer region.
    pub n: usize,
    pub nt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeTask {
    pub grid: GridConfig,
    pub data: DirichletSpec,
    #[serde(default)]
    pub ramp: Ramp,
    /// Bound on the pair discrepancy (boundary triple and Neumann data).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialFlux {
    pub t: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShieldedTask {
    pub scenario: ShieldedParams,
    /// Positions x10 of cross-section patches (electric case).
    #[serde(default)]
    pub cross_sections: Vec<f64>,
    #[serde(default)]
    pub spatial: Vec<SpatialFlux>,
    /// Relative tolerance against the closed-form fluxes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_samples: Option<FieldSamples>,
}

/// n × n potential and field samples over the outer square at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSamples {
    pub n: usize,
    pub t: Vec<f64>,
}

/// Parses a scenario document, applying `--set` overrides first.
pub fn parse_scenario(text: &str, overrides: &[String]) -> Result<Scenario> {
    let mut tree: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::ConfigInvalid {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    for arg in overrides {
        apply_override(&mut tree, arg)?;
    }
    match tree.get("schema_version") {
        None => {
            return Err(CliError::ConfigInvalid {
                path: "schema_version".into(),
                message: "missing".into(),
            })
        }
        Some(toml::Value::Integer(SCHEMA_VERSION)) => {}
        Some(v) => {
            return Err(CliError::ConfigInvalid {
                path: "schema_version".into(),
                message: format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            })
        }
    }
    let root = toml::Value::Table(tree);
    serde_path_to_error::deserialize(root.clone()).map_err(|e| {
        let message = e.inner().to_string();
        let path = e.path().to_string();
        CliError::ConfigInvalid {
            path: refine_path(&root, &path, &message).unwrap_or(path),
            message,
        }
    })
}

/// Tagged enums hide the position of an unknown key from the deserializer;
/// look for the key below the reported path instead.
fn refine_path(root: &toml::Value, path: &str, message: &str) -> Option<String> {
    let key = message.strip_prefix("unknown field `")?.split('`').next()?;
    let mut node = root;
    let mut prefix = Vec::new();
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        node = match node {
            toml::Value::Table(t) => t.get(seg)?,
            toml::Value::Array(a) => a.get(seg.parse::<usize>().ok()?)?,
            _ => return None,
        };
        prefix.push(seg.to_string());
    }
    fn find(v: &toml::Value, key: &str, at: &mut Vec<String>) -> bool {
        let children: Vec<(String, &toml::Value)> = match v {
            toml::Value::Table(t) => {
                if t.contains_key(key) {
                    return true;
                }
                t.iter().map(|(k, v)| (k.clone(), v)).collect()
            }
            toml::Value::Array(a) => a.iter().enumerate().map(|(i, v)| (i.to_string(), v)).collect(),
            _ => return false,
        };
        for (k, child) in children {
            at.push(k);
            if find(child, key, at) {
                return true;
            }
            at.pop();
        }
        false
    }
    find(node, key, &mut prefix).then(|| prefix.join("."))
}

/// `key.path=value`; the value is read as a TOML literal, falling back to a
/// bare string. Numeric path segments index arrays.
pub fn apply_override(tree: &mut toml::Table, arg: &str) -> Result<()> {
    let bad = |message: String| CliError::Override {
        arg: arg.to_string(),
        message,
    };
    let (key, raw) = arg.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(bad("empty key segment".into()));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let segments: Vec<&str> = key.split('.').collect();
    let mut root = toml::Value::Table(std::mem::take(tree));
    let res = set_path(&mut root, &segments, value);
    if let toml::Value::Table(t) = root {
        *tree = t;
    }
    res.map_err(bad)
}

fn set_path(node: &mut toml::Value, segs: &[&str], value: toml::Value) -> std::result::Result<(), String> {
    let (seg, rest) = segs.split_first().expect("nonempty key");
    let slot = match node {
        toml::Value::Table(t) => {
            if rest.is_empty() {
                t.insert(seg.to_string(), value);
                return Ok(());
            }
            t.entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()))
        }
        toml::Value::Array(a) => {
            let i: usize = seg.parse().map_err(|_| format!("`{seg}` is not an array index"))?;
            let len = a.len();
            let slot = a
                .get_mut(i)
                .ok_or_else(|| format!("index {i} out of range (length {len})"))?;
            if rest.is_empty() {
                *slot = value;
                return Ok(());
            }
            slot
        }
        _ => return Err(format!("`{seg}` is below a non-table value")),
    };
    set_path(slot, rest, value)
}

/// Resolved scenario objects shared by validation and execution.
pub struct Prepared {
    pub domain: Option<Domain>,
    pub potential: Option<SharedPotential>,
    pub potential_b: Option<SharedPotential>,
    pub gauge: Option<GaugeElement>,
}

impl Prepared {
    pub fn new(sc: &Scenario) -> Result<Self> {
        let domain = sc.domain.as_ref().map(|d| d.build()).transpose().context("domain")?;
        let potential = sc
            .potential
            .as_ref()
            .map(|p| p.build())
            .transpose()
            .context("potential")?;
        let potential_b = sc
            .potential_b
            .as_ref()
            .map(|p| p.build())
            .transpose()
            .context("potential_b")?;
        let gauge = sc
            .gauge
            .as_ref()
            .map(|g| g.build(domain.as_ref()))
            .transpose()
            .context("gauge")?;
        Ok(Self {
            domain,
            potential,
            potential_b,
            gauge,
        })
    }

    pub fn domain(&self) -> Result<&Domain> {
        self.domain.as_ref().ok_or_else(|| missing("domain"))
    }

    pub fn potential(&self) -> Result<&SharedPotential> {
        self.potential.as_ref().ok_or_else(|| missing("potential"))
    }

    /// Second potential of a pair: `potential_b`, or `potential` under `gauge`.
    pub fn pair(&self) -> Result<(SharedPotential, SharedPotential)> {
        let a = self.potential()?.clone();
        let b: SharedPotential = match (&self.potential_b, &self.gauge) {
            (Some(b), _) => b.clone(),
            (None, Some(c)) => Arc::new(abflux_core::gauge::apply_gauge(a.clone(), c).context("gauge")?),
            (None, None) => {
                return Err(CliError::ConfigInvalid {
                    path: "potential_b".into(),
                    message: "a pair needs `potential_b` or `gauge`".into(),
                })
            }
        };
        Ok((a, b))
    }
}

pub(crate) fn missing(key: &str) -> CliError {
    CliError::ConfigInvalid {
        path: key.into(),
        message: "required by this task".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"

[task]
kind = "trace-rays"
family = { angles = 2, offsets = 3 }
"#;

    #[test]
    fn parses_minimal() {
        let sc = parse_scenario(MINIMAL, &[]).unwrap();
        assert_eq!(sc.seed, 0);
        assert_eq!(sc.task.name(), "trace-rays");
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = MINIMAL.replace("offsets = 3", "offsets = 3, bogus = 1");
        match parse_scenario(&text, &[]) {
            Err(CliError::ConfigInvalid { path, .. }) => assert_eq!(path, "task.family"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            parse_scenario(&text, &[]),
            Err(CliError::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn overrides_beat_file_values() {
        let sc = parse_scenario(MINIMAL, &["task.family.angles=7".into(), "seed=9".into()]).unwrap();
        let Task::TraceRays(t) = &sc.task else { panic!() };
        assert_eq!(t.family.angles, 7);
        assert_eq!(sc.seed, 9);
    }

    #[test]
    fn override_indexes_arrays_and_creates_tables() {
        let mut tree: toml::Table = "a = [{ x = 1 }, { x = 2 }]".parse().unwrap();
        apply_override(&mut tree, "a.1.x=5.5").unwrap();
        apply_override(&mut tree, "b.c=hello").unwrap();
        assert_eq!(tree["a"][1]["x"].as_float(), Some(5.5));
        assert_eq!(tree["b"]["c"].as_str(), Some("hello"));
        assert!(apply_override(&mut tree, "a.7.x=1").is_err());
        assert!(apply_override(&mut tree, "novalue").is_err());
    }

    #[test]
    fn unknown_potential_field_is_rejected() {
        let text = format!(
            "{MINIMAL}\n[potential]\nkind = \"vortex\"\nflux = {{ kind = \"constant\", value = 1.0 }}\nextra = 2\n"
        );
        assert!(parse_scenario(&text, &[]).is_err());
        let ok = text.replace("extra = 2\n", "");
        assert!(parse_scenario(&ok, &[]).is_ok());
    }
}
