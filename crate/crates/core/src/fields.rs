//! Electromagnetic potentials, their field strengths, spacetime line
//! integrals, surface fluxes and the shielded-field scenarios.
//!
//! Sign conventions used everywhere in the crate:
//!
//! * `E = −∂A/∂t − ∇V`, `B3 = ∂A2/∂x1 − ∂A1/∂x2`;
//! * the line integral of a path is `∫ A·dx − V dt`;
//! * the flux two-form is `F = B3 dx1∧dx2 + E1 dx1∧dt + E2 dx2∧dt`, which is
//!   exactly the exterior derivative of `A·dx − V dt`, so Stokes' theorem
//!   holds for every patch with the boundary orientation induced by its
//!   parameterisation.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::geometry::{Domain, Motion, Obstacle, OuterRegion, Shape};
use crate::quadrature::{integrate, integrate_2d, QuadConfig};
use crate::{vec2, CMat, Error, Result, Vec2, C64};

pub use crate::geometry::{Event, SpacetimePath};

/// Central-difference step used when a potential has no analytic partials.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

fn step_kernel(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// C∞ step: 0 for s ≤ 0, 1 for s ≥ 1.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = step_kernel(s);
        a / (a + step_kernel(1.0 - s))
    }
}

pub fn smooth_step_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let a = step_kernel(s);
    let b = step_kernel(1.0 - s);
    let da = a / (s * s);
    let db = b / ((1.0 - s) * (1.0 - s));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// exp(−1/(1−u²)) on |u| < 1, zero elsewhere.
pub fn bump(u: f64) -> f64 {
    let w = 1.0 - u * u;
    if w <= 0.0 {
        0.0
    } else {
        (-1.0 / w).exp()
    }
}

/// d/du of [`bump`].
pub fn bump_deriv(u: f64) -> f64 {
    let w = 1.0 - u * u;
    if w <= 0.0 {
        0.0
    } else {
        bump(u) * (-2.0 * u / (w * w))
    }
}

/// ∫_{−1}^{1} bump(u) du.
pub fn bump_mass() -> f64 {
    static MASS: OnceLock<f64> = OnceLock::new();
    *MASS.get_or_init(|| {
        integrate(bump, -1.0, 1.0, &QuadConfig::default().with_tol(1e-15)).expect("bump integral converges")
    })
}

/// Normalised C∞ bump of half-width δ standing in for a Dirac delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mollifier {
    pub delta: f64,
}

impl Mollifier {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mollifier width {delta} must be positive"
            )));
        }
        Ok(Self { delta })
    }

    pub fn value(&self, s: f64) -> f64 {
        bump(s / self.delta) / (bump_mass() * self.delta)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        bump_deriv(s / self.delta) / (bump_mass() * self.delta * self.delta)
    }

    /// ∫_{−δ}^{s} η, the smoothed Heaviside step.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= -self.delta {
            return 0.0;
        }
        if s >= self.delta {
            return 1.0;
        }
        integrate(
            |u| self.value(u),
            -self.delta,
            s,
            &QuadConfig::default().with_tol(1e-14),
        )
        .expect("mollifier cdf converges")
    }
}

/// A scalar function of time with its derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        value: f64,
    },
    /// `from` for t ≤ t1, `to` for t ≥ t1 + width, C∞ in between.
    SmoothStep {
        from: f64,
        to: f64,
        t1: f64,
        width: f64,
    },
    /// offset + amplitude·sin(ω t + phase)
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        TimeProfile::Constant { value }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { value } => value,
            TimeProfile::SmoothStep { from, to, t1, width } => from + (to - from) * smooth_step((t - t1) / width),
            TimeProfile::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * t + phase).sin(),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::SmoothStep { from, to, t1, width } => {
                (to - from) * smooth_step_deriv((t - t1) / width) / width
            }
            TimeProfile::Sinusoid {
                amplitude,
                omega,
                phase,
                ..
            } => amplitude * omega * (omega * t + phase).cos(),
        }
    }

    /// Interval outside which the profile is constant, if it has one.
    pub fn transition(&self) -> Option<(f64, f64)> {
        match *self {
            TimeProfile::Constant { .. } => Some((0.0, 0.0)),
            TimeProfile::SmoothStep { t1, width, .. } => Some((t1, t1 + width)),
            TimeProfile::Sinusoid { amplitude, omega, .. } if amplitude == 0.0 || omega == 0.0 => Some((0.0, 0.0)),
            TimeProfile::Sinusoid { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TimeProfile::SmoothStep { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::InvalidArgument(format!("step width {width} must be positive")));
            }
        }
        Ok(())
    }
}

/// Abelian electromagnetic potential pair (A, V) on the plane.
///
/// Derivatives default to central differences with step [`EmPotential::fd_step`];
/// implementors with closed forms override them.
pub trait EmPotential: Send + Sync {
    fn a(&self, x: Vec2, t: f64) -> Vec2;

    fn v(&self, x: Vec2, t: f64) -> f64;

    /// Radius beyond which A and V vanish, when they are compactly supported.
    fn support_radius(&self) -> Option<f64> {
        None
    }

    fn fd_step(&self) -> f64 {
        DEFAULT_FD_STEP
    }

    /// `[∂A/∂x1, ∂A/∂x2]`
    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let h = self.fd_step();
        let dx = vec2(h, 0.0);
        let dy = vec2(0.0, h);
        [
            (self.a(x + dx, t) - self.a(x - dx, t)) / (2.0 * h),
            (self.a(x + dy, t) - self.a(x - dy, t)) / (2.0 * h),
        ]
    }

    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        let h = self.fd_step();
        (self.a(x, t + h) - self.a(x, t - h)) / (2.0 * h)
    }

    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        let h = self.fd_step();
        vec2(
            (self.v(x + vec2(h, 0.0), t) - self.v(x - vec2(h, 0.0), t)) / (2.0 * h),
            (self.v(x + vec2(0.0, h), t) - self.v(x - vec2(0.0, h), t)) / (2.0 * h),
        )
    }

    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        let h = self.fd_step();
        (self.v(x, t + h) - self.v(x, t - h)) / (2.0 * h)
    }

    /// ∇·A
    fn div_a(&self, x: Vec2, t: f64) -> f64 {
        let d = self.da_dx(x, t);
        d[0].x + d[1].y
    }

    fn b3(&self, x: Vec2, t: f64) -> f64 {
        let d = self.da_dx(x, t);
        d[0].y - d[1].x
    }

    fn e(&self, x: Vec2, t: f64) -> Vec2 {
        -self.dv_dx(x, t) - self.da_dt(x, t)
    }
}

macro_rules! forward_potential {
    ($($ty:ty),*) => {$(
        impl<P: EmPotential + ?Sized> EmPotential for $ty {
            fn a(&self, x: Vec2, t: f64) -> Vec2 { (**self).a(x, t) }
            fn v(&self, x: Vec2, t: f64) -> f64 { (**self).v(x, t) }
            fn support_radius(&self) -> Option<f64> { (**self).support_radius() }
            fn fd_step(&self) -> f64 { (**self).fd_step() }
            fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] { (**self).da_dx(x, t) }
            fn da_dt(&self, x: Vec2, t: f64) -> Vec2 { (**self).da_dt(x, t) }
            fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 { (**self).dv_dx(x, t) }
            fn dv_dt(&self, x: Vec2, t: f64) -> f64 { (**self).dv_dt(x, t) }
            fn div_a(&self, x: Vec2, t: f64) -> f64 { (**self).div_a(x, t) }
            fn b3(&self, x: Vec2, t: f64) -> f64 { (**self).b3(x, t) }
            fn e(&self, x: Vec2, t: f64) -> Vec2 { (**self).e(x, t) }
        }
    )*};
}

forward_potential!(&P, Arc<P>, Box<P>);

/// Shared, type-erased potential.
pub type SharedPotential = Arc<dyn EmPotential>;

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl EmPotential for ZeroPotential {
    fn a(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn v(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }
    fn support_radius(&self) -> Option<f64> {
        Some(0.0)
    }
    fn da_dx(&self, _: Vec2, _: f64) -> [Vec2; 2] {
        [Vec2::zeros(); 2]
    }
    fn da_dt(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn dv_dx(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn dv_dt(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPotential {
    pub a: Vec2,
    pub v: f64,
}

impl EmPotential for ConstantPotential {
    fn a(&self, _: Vec2, _: f64) -> Vec2 {
        self.a
    }
    fn v(&self, _: Vec2, _: f64) -> f64 {
        self.v
    }
    fn da_dx(&self, _: Vec2, _: f64) -> [Vec2; 2] {
        [Vec2::zeros(); 2]
    }
    fn da_dt(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn dv_dx(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }
    fn dv_dt(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }
}

/// Potential given by closures; derivatives by finite differences.
pub struct FnPotential<FA, FV> {
    a: FA,
    v: FV,
    support: Option<f64>,
}

impl<FA, FV> FnPotential<FA, FV>
where
    FA: Fn(Vec2, f64) -> Vec2 + Send + Sync,
    FV: Fn(Vec2, f64) -> f64 + Send + Sync,
{
    pub fn new(a: FA, v: FV) -> Self {
        Self { a, v, support: None }
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support = Some(radius);
        self
    }
}

impl<FA, FV> EmPotential for FnPotential<FA, FV>
where
    FA: Fn(Vec2, f64) -> Vec2 + Send + Sync,
    FV: Fn(Vec2, f64) -> f64 + Send + Sync,
{
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        (self.a)(x, t)
    }
    fn v(&self, x: Vec2, t: f64) -> f64 {
        (self.v)(x, t)
    }
    fn support_radius(&self) -> Option<f64> {
        self.support
    }
}

/// Gaussian envelope exp(−r²/σ²) multiplied by a C∞ cutoff that is 1 for
/// r ≤ R/2 and 0 for r ≥ R; returns (g, g').
fn windowed_gaussian(r: f64, sigma: f64, cutoff: f64) -> (f64, f64) {
    if r >= cutoff {
        return (0.0, 0.0);
    }
    let gauss = (-(r * r) / (sigma * sigma)).exp();
    let dgauss = -2.0 * r / (sigma * sigma) * gauss;
    let s = 2.0 * r / cutoff - 1.0;
    let w = 1.0 - smooth_step(s);
    let dw = -smooth_step_deriv(s) * 2.0 / cutoff;
    (gauss * w, dgauss * w + gauss * dw)
}

/// Smooth compactly supported potential:
/// `A = T_a(t)·g(|x−c|)·(a + swirl·(−y2, y1))`, `V = T_v(t)·v·g(|x−c|)`
/// with `y = x − c` and `g` a windowed Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: [f64; 2],
    pub sigma: f64,
    /// Support radius about the centre.
    pub cutoff: f64,
    #[serde(default)]
    pub a: [f64; 2],
    #[serde(default)]
    pub swirl: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default = "unit_profile")]
    pub a_time: TimeProfile,
    #[serde(default = "unit_profile")]
    pub v_time: TimeProfile,
}

fn unit_profile() -> TimeProfile {
    TimeProfile::constant(1.0)
}

impl GaussianBump {
    pub fn new(center: Vec2, sigma: f64, cutoff: f64) -> Self {
        Self {
            center: [center.x, center.y],
            sigma,
            cutoff,
            a: [0.0, 0.0],
            swirl: 0.0,
            v: 0.0,
            a_time: unit_profile(),
            v_time: unit_profile(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.cutoff > 0.0) {
            return Err(Error::InvalidArgument(
                "gaussian bump needs sigma > 0 and cutoff > 0".into(),
            ));
        }
        self.a_time.validate()?;
        self.v_time.validate()
    }

    fn local(&self, x: Vec2) -> (Vec2, f64, f64, f64) {
        let y = x - vec2(self.center[0], self.center[1]);
        let r = y.norm();
        let (g, dg) = windowed_gaussian(r, self.sigma, self.cutoff);
        (y, r, g, dg)
    }

    fn direction(&self, y: Vec2) -> Vec2 {
        vec2(self.a[0] - self.swirl * y.y, self.a[1] + self.swirl * y.x)
    }

    fn grad_g(y: Vec2, r: f64, dg: f64) -> Vec2 {
        if r > 0.0 {
            y * (dg / r)
        } else {
            Vec2::zeros()
        }
    }
}

impl EmPotential for GaussianBump {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        let (y, _, g, _) = self.local(x);
        self.direction(y) * (g * self.a_time.value(t))
    }

    fn v(&self, x: Vec2, t: f64) -> f64 {
        let (_, _, g, _) = self.local(x);
        self.v * g * self.v_time.value(t)
    }

    fn support_radius(&self) -> Option<f64> {
        Some(vec2(self.center[0], self.center[1]).norm() + self.cutoff)
    }

    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let (y, r, g, dg) = self.local(x);
        let grad = Self::grad_g(y, r, dg);
        let w = self.direction(y);
        let ta = self.a_time.value(t);
        [
            (w * grad.x + vec2(0.0, self.swirl) * g) * ta,
            (w * grad.y + vec2(-self.swirl, 0.0) * g) * ta,
        ]
    }

    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        let (y, _, g, _) = self.local(x);
        self.direction(y) * (g * self.a_time.deriv(t))
    }

    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        let (y, r, _, dg) = self.local(x);
        Self::grad_g(y, r, dg) * (self.v * self.v_time.value(t))
    }

    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        let (_, _, g, _) = self.local(x);
        self.v * g * self.v_time.deriv(t)
    }
}

/// Sum of potentials.
pub struct SumPotential {
    parts: Vec<SharedPotential>,
}

impl SumPotential {
    pub fn new(parts: Vec<SharedPotential>) -> Self {
        Self { parts }
    }
}

impl EmPotential for SumPotential {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        self.parts.iter().fold(Vec2::zeros(), |s, p| s + p.a(x, t))
    }
    fn v(&self, x: Vec2, t: f64) -> f64 {
        self.parts.iter().map(|p| p.v(x, t)).sum()
    }
    fn support_radius(&self) -> Option<f64> {
        self.parts
            .iter()
            .map(|p| p.support_radius())
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }
    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        self.parts.iter().fold([Vec2::zeros(); 2], |s, p| {
            let d = p.da_dx(x, t);
            [s[0] + d[0], s[1] + d[1]]
        })
    }
    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        self.parts.iter().fold(Vec2::zeros(), |s, p| s + p.da_dt(x, t))
    }
    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        self.parts.iter().fold(Vec2::zeros(), |s, p| s + p.dv_dx(x, t))
    }
    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        self.parts.iter().map(|p| p.dv_dt(x, t)).sum()
    }
}

/// Which component a coefficient term contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    A1,
    A2,
    V,
}

/// `coef · x1^p1 · x2^p2 · t^pt · cos(k1 x1 + k2 x2 + kt t + phase)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientTerm {
    pub component: Component,
    pub coef: f64,
    #[serde(default)]
    pub powers: [u32; 3],
    #[serde(default)]
    pub wave: [f64; 4],
}

impl CoefficientTerm {
    /// Value and partials (∂1, ∂2, ∂t).
    fn eval(&self, x: Vec2, t: f64) -> (f64, [f64; 3]) {
        let z = [x.x, x.y, t];
        let mono = |k: usize, d: bool| -> f64 {
            let p = self.powers[k] as i32;
            if d {
                if p == 0 {
                    0.0
                } else {
                    p as f64 * z[k].powi(p - 1)
                }
            } else {
                z[k].powi(p)
            }
        };
        let m = [mono(0, false), mono(1, false), mono(2, false)];
        let dm = [mono(0, true), mono(1, true), mono(2, true)];
        let arg = self.wave[0] * z[0] + self.wave[1] * z[1] + self.wave[2] * z[2] + self.wave[3];
        let (c, s) = (arg.cos(), arg.sin());
        let prod = m[0] * m[1] * m[2];
        let value = self.coef * prod * c;
        let mut grad = [0.0; 3];
        for k in 0..3 {
            let dprod = dm[k] * (0..3).filter(|&j| j != k).map(|j| m[j]).product::<f64>();
            grad[k] = self.coef * (dprod * c - prod * s * self.wave[k]);
        }
        (value, grad)
    }
}

/// Potential from a table of polynomial/trigonometric terms, with exact
/// partials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPotential {
    pub terms: Vec<CoefficientTerm>,
}

impl CoefficientPotential {
    pub fn new(terms: Vec<CoefficientTerm>) -> Self {
        Self { terms }
    }

    /// Adds the term `coef · x1^p1 x2^p2 t^pt` to a component.
    pub fn monomial(mut self, component: Component, coef: f64, powers: [u32; 3]) -> Self {
        self.terms.push(CoefficientTerm {
            component,
            coef,
            powers,
            wave: [0.0; 4],
        });
        self
    }

    fn collect(&self, x: Vec2, t: f64, comp: Component) -> (f64, [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 3];
        for term in self.terms.iter().filter(|term| term.component == comp) {
            let (tv, tg) = term.eval(x, t);
            v += tv;
            for k in 0..3 {
                g[k] += tg[k];
            }
        }
        (v, g)
    }
}

impl EmPotential for CoefficientPotential {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        vec2(self.collect(x, t, Component::A1).0, self.collect(x, t, Component::A2).0)
    }
    fn v(&self, x: Vec2, t: f64) -> f64 {
        self.collect(x, t, Component::V).0
    }
    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let (_, g1) = self.collect(x, t, Component::A1);
        let (_, g2) = self.collect(x, t, Component::A2);
        [vec2(g1[0], g2[0]), vec2(g1[1], g2[1])]
    }
    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        let (_, g1) = self.collect(x, t, Component::A1);
        let (_, g2) = self.collect(x, t, Component::A2);
        vec2(g1[2], g2[2])
    }
    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        let (_, g) = self.collect(x, t, Component::V);
        vec2(g[0], g[1])
    }
    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        self.collect(x, t, Component::V).1[2]
    }
}

/// Aharonov–Bohm vortex `A = b(t)/2π · M(ρ)/ρ² · (−y2, y1)`, `V = 0`, with
/// `y = x − c0 − vt`, ρ = |y| and `M(ρ) = S(ρ²/δ²)` a C∞ core regulariser
/// (δ = 0 gives the point vortex). Its field is `B3 = b S'(ρ²/δ²)/(πδ²)`,
/// supported in ρ < δ and of total flux b(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vortex {
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default)]
    pub core: f64,
    pub flux: TimeProfile,
}

impl Vortex {
    pub fn new(center: Vec2, velocity: Vec2, core: f64, flux: TimeProfile) -> Self {
        Self {
            center: [center.x, center.y],
            velocity: [velocity.x, velocity.y],
            core,
            flux,
        }
    }

    /// Static vortex at `center` with constant flux.
    pub fn fixed(center: Vec2, core: f64, flux: f64) -> Self {
        Self::new(center, Vec2::zeros(), core, TimeProfile::constant(flux))
    }

    pub fn center_at(&self, t: f64) -> Vec2 {
        vec2(self.center[0], self.center[1]) + vec2(self.velocity[0], self.velocity[1]) * t
    }

    /// (G, G') with G(q) = S(q/δ²)/q.
    fn profile(&self, q: f64) -> (f64, f64) {
        if q < 1e-300 {
            return (0.0, 0.0);
        }
        if self.core <= 0.0 {
            return (1.0 / q, -1.0 / (q * q));
        }
        let d2 = self.core * self.core;
        let s = smooth_step(q / d2);
        let ds = smooth_step_deriv(q / d2) / d2;
        (s / q, ds / q - s / (q * q))
    }

    fn spatial_partials(&self, y: Vec2, k: f64) -> [Vec2; 2] {
        let q = y.norm_squared();
        let (g, dg) = self.profile(q);
        let w = vec2(-y.y, y.x);
        [
            (w * (2.0 * y.x * dg) + vec2(0.0, g)) * k,
            (w * (2.0 * y.y * dg) + vec2(-g, 0.0)) * k,
        ]
    }
}

impl EmPotential for Vortex {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        let y = x - self.center_at(t);
        let (g, _) = self.profile(y.norm_squared());
        vec2(-y.y, y.x) * (g * self.flux.value(t) / (2.0 * PI))
    }

    fn v(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }

    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let y = x - self.center_at(t);
        self.spatial_partials(y, self.flux.value(t) / (2.0 * PI))
    }

    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        let y = x - self.center_at(t);
        let (g, _) = self.profile(y.norm_squared());
        let d = self.spatial_partials(y, self.flux.value(t) / (2.0 * PI));
        let vel = vec2(self.velocity[0], self.velocity[1]);
        vec2(-y.y, y.x) * (g * self.flux.deriv(t) / (2.0 * PI)) - d[0] * vel.x - d[1] * vel.y
    }

    fn dv_dx(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }

    fn dv_dt(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }

    fn b3(&self, x: Vec2, t: f64) -> f64 {
        if self.core <= 0.0 {
            return 0.0;
        }
        let y = x - self.center_at(t);
        let d2 = self.core * self.core;
        self.flux.value(t) * smooth_step_deriv(y.norm_squared() / d2) / (PI * d2)
    }
}

/// Potentials of the mollified shielded electric field travelling with an
/// obstacle along the x1-axis at speed v0:
///
/// `A = (0, A2)`, `V = 0`,
/// `A2(x, t) = −(1/v0) η(x2) ∫_{−∞}^{x1−v0t} η(u) e((x1−u)/v0) du`.
///
/// Then `E2 = −∂A2/∂t = −η(x1−v0t) η(x2) e(t)`, so the cross-section flux
/// through `{x1 = x10}` with (t, x2) orientation is `+(1/v0)e(x10/v0)` up to
/// mollification error, and
/// `B3 = −(1/v0)η(x1−v0t)η(x2)e(t) − (1/v0)η(x2)∫_t^∞ η(x1−v0s)e'(s) ds`,
/// the mollified form of the point-source pair.
#[derive(Debug, Clone)]
pub struct ShieldedElectric {
    pub v0: f64,
    pub profile: TimeProfile,
    pub eta: Mollifier,
    inner: QuadConfig,
}

impl ShieldedElectric {
    pub fn new(v0: f64, profile: TimeProfile, delta: f64) -> Result<Self> {
        if !(v0 > 0.0) {
            return Err(Error::InvalidScenario(format!("speed v0 = {v0} must be positive")));
        }
        profile.validate()?;
        Ok(Self {
            v0,
            profile,
            eta: Mollifier::new(delta)?,
            inner: QuadConfig::default().with_tol(1e-13),
        })
    }

    /// ∫_{−δ}^{min(δ, x1−v0t)} η(u) e((x1−u)/v0) du
    fn history(&self, x1: f64, t: f64) -> f64 {
        let d = self.eta.delta;
        let hi = (x1 - self.v0 * t).min(d);
        if hi <= -d {
            return 0.0;
        }
        integrate(
            |u| self.eta.value(u) * self.profile.value((x1 - u) / self.v0),
            -d,
            hi,
            &self.inner,
        )
        .expect("smooth integrand")
    }

    /// ∫_t^∞ η(x1 − v0 s) e'(s) ds
    fn future(&self, x1: f64, t: f64) -> f64 {
        let d = self.eta.delta;
        let mut lo = ((x1 - d) / self.v0).max(t);
        let mut hi = (x1 + d) / self.v0;
        if let Some((a, b)) = self.profile.transition() {
            lo = lo.max(a);
            hi = hi.min(b);
        }
        if hi <= lo {
            return 0.0;
        }
        integrate(
            |s| self.eta.value(x1 - self.v0 * s) * self.profile.deriv(s),
            lo,
            hi,
            &self.inner,
        )
        .expect("smooth integrand")
    }
}

impl EmPotential for ShieldedElectric {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        let ey = self.eta.value(x.y);
        if ey == 0.0 {
            return Vec2::zeros();
        }
        vec2(0.0, -ey * self.history(x.x, t) / self.v0)
    }

    fn v(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }

    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let ey = self.eta.value(x.y);
        let dey = self.eta.deriv(x.y);
        if ey == 0.0 && dey == 0.0 {
            return [Vec2::zeros(); 2];
        }
        let d1 = -ey / self.v0 * (self.eta.value(x.x - self.v0 * t) * self.profile.value(t) + self.future(x.x, t));
        let d2 = -dey * self.history(x.x, t) / self.v0;
        [vec2(0.0, d1), vec2(0.0, d2)]
    }

    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        vec2(
            0.0,
            self.eta.value(x.y) * self.eta.value(x.x - self.v0 * t) * self.profile.value(t),
        )
    }

    fn b3(&self, x: Vec2, t: f64) -> f64 {
        let ey = self.eta.value(x.y);
        if ey == 0.0 {
            return 0.0;
        }
        -ey / self.v0 * (self.eta.value(x.x - self.v0 * t) * self.profile.value(t) + self.future(x.x, t))
    }

    fn dv_dx(&self, _: Vec2, _: f64) -> Vec2 {
        Vec2::zeros()
    }

    fn dv_dt(&self, _: Vec2, _: f64) -> f64 {
        0.0
    }
}

/// Yang–Mills potential: m×m matrices A1, A2 (self-adjoint) and V.
pub trait MatrixPotential: Send + Sync {
    fn dim(&self) -> usize;
    fn a(&self, x: Vec2, t: f64) -> [CMat; 2];
    fn v(&self, x: Vec2, t: f64) -> CMat;
    fn support_radius(&self) -> Option<f64> {
        None
    }
}

macro_rules! forward_matrix_potential {
    ($($ty:ty),*) => {$(
        impl<P: MatrixPotential + ?Sized> MatrixPotential for $ty {
            fn dim(&self) -> usize { (**self).dim() }
            fn a(&self, x: Vec2, t: f64) -> [CMat; 2] { (**self).a(x, t) }
            fn v(&self, x: Vec2, t: f64) -> CMat { (**self).v(x, t) }
            fn support_radius(&self) -> Option<f64> { (**self).support_radius() }
        }
    )*};
}

forward_matrix_potential!(&P, Arc<P>, Box<P>);

/// Identity (k = 0) and the Pauli matrices σx, σy, σz (k = 1, 2, 3).
pub fn pauli(k: usize) -> CMat {
    let (o, z, i) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let m = match k {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        3 => [o, z, z, -o],
        _ => panic!("pauli index {k} out of range"),
    };
    CMat::from_row_slice(2, 2, &m)
}

fn pauli_combination(c: &[f64; 4], scale: f64) -> CMat {
    (0..4).fold(CMat::zeros(2, 2), |acc, k| acc + pauli(k) * C64::from(c[k] * scale))
}

/// `Σ_k c_k σ_k · bump(|x − center|/radius)·cos(ω t)` per component, with
/// the bump normalised to 1 at its centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliBump {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub a1: [f64; 4],
    #[serde(default)]
    pub a2: [f64; 4],
    #[serde(default)]
    pub v: [f64; 4],
    #[serde(default)]
    pub omega: f64,
}

impl PauliBump {
    fn weight(&self, x: Vec2, t: f64) -> f64 {
        let r = (x - vec2(self.center[0], self.center[1])).norm() / self.radius;
        bump(r) * std::f64::consts::E * (self.omega * t).cos()
    }
}

/// Sum of [`PauliBump`]s: a smooth, compactly supported su(2)⊕u(1) field.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliBumps {
    pub terms: Vec<PauliBump>,
}

impl MatrixPotential for PauliBumps {
    fn dim(&self) -> usize {
        2
    }
    fn a(&self, x: Vec2, t: f64) -> [CMat; 2] {
        self.terms
            .iter()
            .fold([CMat::zeros(2, 2), CMat::zeros(2, 2)], |[a1, a2], b| {
                let w = b.weight(x, t);
                [a1 + pauli_combination(&b.a1, w), a2 + pauli_combination(&b.a2, w)]
            })
    }
    fn v(&self, x: Vec2, t: f64) -> CMat {
        self.terms.iter().fold(CMat::zeros(2, 2), |acc, b| {
            acc + pauli_combination(&b.v, b.weight(x, t))
        })
    }
    fn support_radius(&self) -> Option<f64> {
        Some(
            self.terms
                .iter()
                .map(|b| vec2(b.center[0], b.center[1]).norm() + b.radius)
                .fold(0.0, f64::max),
        )
    }
}

/// diag(p_1, …, p_m) built from abelian potentials.
pub struct DiagonalMatrixPotential {
    pub entries: Vec<SharedPotential>,
}

impl MatrixPotential for DiagonalMatrixPotential {
    fn dim(&self) -> usize {
        self.entries.len()
    }
    fn a(&self, x: Vec2, t: f64) -> [CMat; 2] {
        let vals: Vec<Vec2> = self.entries.iter().map(|p| p.a(x, t)).collect();
        [
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().map(|v| C64::from(v.x)),
            )),
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().map(|v| C64::from(v.y)),
            )),
        ]
    }
    fn v(&self, x: Vec2, t: f64) -> CMat {
        CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|p| C64::from(p.v(x, t))),
        ))
    }
    fn support_radius(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|p| p.support_radius())
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }
}

/// Matrix potential given by closures.
pub struct FnMatrixPotential<FA, FV> {
    dim: usize,
    a: FA,
    v: FV,
    support: Option<f64>,
}

impl<FA, FV> FnMatrixPotential<FA, FV>
where
    FA: Fn(Vec2, f64) -> [CMat; 2] + Send + Sync,
    FV: Fn(Vec2, f64) -> CMat + Send + Sync,
{
    pub fn new(dim: usize, a: FA, v: FV) -> Self {
        Self {
            dim,
            a,
            v,
            support: None,
        }
    }

    pub fn with_support(mut self, radius: f64) -> Self {
        self.support = Some(radius);
        self
    }
}

impl<FA, FV> MatrixPotential for FnMatrixPotential<FA, FV>
where
    FA: Fn(Vec2, f64) -> [CMat; 2] + Send + Sync,
    FV: Fn(Vec2, f64) -> CMat + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn a(&self, x: Vec2, t: f64) -> [CMat; 2] {
        (self.a)(x, t)
    }
    fn v(&self, x: Vec2, t: f64) -> CMat {
        (self.v)(x, t)
    }
    fn support_radius(&self) -> Option<f64> {
        self.support
    }
}

/// The field-strength pair (B3, E).
pub trait FieldStrength: Send + Sync {
    fn b3(&self, x: Vec2, t: f64) -> f64;
    fn e(&self, x: Vec2, t: f64) -> Vec2;
}

/// Field strengths derived from a potential.
#[derive(Debug, Clone)]
pub struct DerivedFields<P>(pub P);

impl<P: EmPotential> FieldStrength for DerivedFields<P> {
    fn b3(&self, x: Vec2, t: f64) -> f64 {
        self.0.b3(x, t)
    }
    fn e(&self, x: Vec2, t: f64) -> Vec2 {
        self.0.e(x, t)
    }
}

pub fn derived_fields<P: EmPotential>(p: P) -> DerivedFields<P> {
    DerivedFields(p)
}

/// Field strengths given directly by closures.
pub struct FnFields<FB, FE> {
    pub b3: FB,
    pub e: FE,
}

impl<FB, FE> FieldStrength for FnFields<FB, FE>
where
    FB: Fn(Vec2, f64) -> f64 + Send + Sync,
    FE: Fn(Vec2, f64) -> Vec2 + Send + Sync,
{
    fn b3(&self, x: Vec2, t: f64) -> f64 {
        (self.b3)(x, t)
    }
    fn e(&self, x: Vec2, t: f64) -> Vec2 {
        (self.e)(x, t)
    }
}

/// `∫_γ A·dx − V dt` over a piecewise-linear spacetime path.
pub fn line_integral_em<P: EmPotential + ?Sized>(p: &P, path: &SpacetimePath, quad: &QuadConfig) -> Result<f64> {
    let lengths: Vec<f64> = path
        .segments()
        .map(|(a, b)| ((b.x - a.x).norm_squared() + (b.t - a.t).powi(2)).sqrt())
        .collect();
    let total: f64 = lengths.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for ((a, b), len) in path.segments().zip(&lengths) {
        if *len == 0.0 {
            continue;
        }
        let dx = (b.x - a.x) / *len;
        let dt = (b.t - a.t) / *len;
        let cfg = QuadConfig {
            abs_tol: quad.abs_tol * len / total,
            ..*quad
        };
        sum += integrate(
            |s| {
                let x = a.x + dx * s;
                let t = a.t + dt * s;
                p.a(x, t).dot(&dx) - p.v(x, t) * dt
            },
            0.0,
            *len,
            &cfg,
        )?;
    }
    Ok(sum)
}

/// Oriented two-dimensional patch in (x1, x2, t)-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Patch {
    /// Disk at fixed t, oriented dx1∧dx2.
    SpatialDisk { center: Vec2, radius: f64, t: f64 },
    /// Axis-aligned rectangle at fixed t, oriented dx1∧dx2.
    SpatialRect { min: Vec2, max: Vec2, t: f64 },
    /// Rectangle in the plane x1 = const, parameterised by (t, x2), hence
    /// oriented dt∧dx2.
    CrossSection { x1: f64, t: [f64; 2], x2: [f64; 2] },
    /// Graph `t = t0 + height·(1 − |x−c|²/R²)` over a disk, oriented like
    /// the disk; shares its boundary circle with `SpatialDisk`.
    Dome {
        center: Vec2,
        radius: f64,
        t: f64,
        height: f64,
    },
    /// Cone from `apex` over a closed piecewise-linear loop; its boundary is
    /// exactly the loop.
    Cone { apex: Event, rim: SpacetimePath },
    /// Triangles of points (x1, x2, t), each oriented by its vertex order.
    Triangulated {
        vertices: Vec<[f64; 3]>,
        triangles: Vec<[usize; 3]>,
    },
}

fn evt(p: [f64; 3]) -> Event {
    Event::new(vec2(p[0], p[1]), p[2])
}

/// F(a, b) for tangent vectors (dx1, dx2, dt).
fn two_form<F: FieldStrength + ?Sized>(f: &F, at: Event, a: [f64; 3], b: [f64; 3]) -> f64 {
    let e = f.e(at.x, at.t);
    f.b3(at.x, at.t) * (a[0] * b[1] - a[1] * b[0])
        + e.x * (a[0] * b[2] - a[2] * b[0])
        + e.y * (a[1] * b[2] - a[2] * b[1])
}

fn triangle_flux<F: FieldStrength + ?Sized>(f: &F, p: [[f64; 3]; 3], quad: &QuadConfig) -> Result<f64> {
    let e1: [f64; 3] = std::array::from_fn(|k| p[1][k] - p[0][k]);
    let e2: [f64; 3] = std::array::from_fn(|k| p[2][k] - p[1][k]);
    // collapsed square: X = P0 + u·e1 + u·v·e2
    integrate_2d(
        |u, v| {
            let x: [f64; 3] = std::array::from_fn(|k| p[0][k] + u * e1[k] + u * v * e2[k]);
            let du: [f64; 3] = std::array::from_fn(|k| e1[k] + v * e2[k]);
            let dv: [f64; 3] = std::array::from_fn(|k| u * e2[k]);
            two_form(f, evt(x), du, dv)
        },
        0.0,
        1.0,
        |_| 0.0,
        |_| 1.0,
        quad,
    )
}

impl Patch {
    /// Boundary loop with the induced orientation. Curved boundaries are
    /// approximated by inscribed n-gons.
    pub fn boundary(&self, n: usize) -> SpacetimePath {
        match self {
            Patch::SpatialDisk { center, radius, t } | Patch::Dome { center, radius, t, .. } => {
                let verts: Vec<Vec2> = (0..n)
                    .map(|k| {
                        let a = 2.0 * PI * k as f64 / n as f64;
                        center + vec2(a.cos(), a.sin()) * *radius
                    })
                    .collect();
                SpacetimePath::spatial_polygon(&verts, *t)
            }
            Patch::SpatialRect { min, max, t } => {
                SpacetimePath::spatial_polygon(&[*min, vec2(max.x, min.y), *max, vec2(min.x, max.y)], *t)
            }
            Patch::CrossSection { x1, t, x2 } => SpacetimePath::closed(vec![
                Event::new(vec2(*x1, x2[0]), t[0]),
                Event::new(vec2(*x1, x2[0]), t[1]),
                Event::new(vec2(*x1, x2[1]), t[1]),
                Event::new(vec2(*x1, x2[1]), t[0]),
            ]),
            Patch::Cone { rim, .. } => rim.clone(),
            Patch::Triangulated { vertices, triangles } => {
                // boundary edges appear once; chain them from the first one
                let mut edges: Vec<(usize, usize)> = Vec::new();
                for tri in triangles {
                    for k in 0..3 {
                        let (a, b) = (tri[k], tri[(k + 1) % 3]);
                        if let Some(pos) = edges.iter().position(|&(c, d)| c == b && d == a) {
                            edges.swap_remove(pos);
                        } else {
                            edges.push((a, b));
                        }
                    }
                }
                let mut chain = Vec::new();
                if let Some(&(start, mut next)) = edges.first() {
                    chain.push(evt(vertices[start]));
                    while next != start && chain.len() <= edges.len() {
                        chain.push(evt(vertices[next]));
                        next = edges.iter().find(|e| e.0 == next).map(|e| e.1).unwrap_or(start);
                    }
                }
                SpacetimePath::closed(chain)
            }
        }
    }
}

/// ∫∫ f(x, r, φ) dr dφ over the disk in polar coordinates about `center`;
/// panel bounds are scaled so arcs at the rim respect `max_panel_len`.
fn polar_integral<G: Fn(Vec2, f64, f64) -> f64>(g: G, center: Vec2, radius: f64, quad: &QuadConfig) -> Result<f64> {
    let cfg = QuadConfig {
        max_panel_len: quad.max_panel_len.map(|l| l / radius.max(1.0)),
        ..*quad
    };
    integrate_2d(
        |phi, r| g(center + vec2(phi.cos(), phi.sin()) * r, r, phi),
        0.0,
        2.0 * PI,
        |_| 0.0,
        |_| radius,
        &cfg,
    )
}

/// Integral of F = B3 dx1∧dx2 + E1 dx1∧dt + E2 dx2∧dt over an oriented patch.
pub fn surface_flux<F: FieldStrength + ?Sized>(f: &F, surface: &Patch, quad: &QuadConfig) -> Result<f64> {
    match surface {
        Patch::SpatialDisk { center, radius, t } => polar_integral(|x, r, _| r * f.b3(x, *t), *center, *radius, quad),
        Patch::SpatialRect { min, max, t } => integrate_2d(
            |x1, x2| f.b3(vec2(x1, x2), *t),
            min.x,
            max.x,
            |_| min.y,
            |_| max.y,
            quad,
        ),
        Patch::CrossSection { x1, t, x2 } => {
            // (∂t, ∂x2) orientation: F(∂t, ∂x2) = −E2
            integrate_2d(|s, y| -f.e(vec2(*x1, y), s).y, t[0], t[1], |_| x2[0], |_| x2[1], quad)
        }
        Patch::Dome {
            center,
            radius,
            t,
            height,
        } => {
            let r2 = radius * radius;
            polar_integral(
                |x, r, _| {
                    let y = x - center;
                    let tt = t + height * (1.0 - y.norm_squared() / r2);
                    let g = -y * (2.0 * height / r2);
                    let e = f.e(x, tt);
                    r * (f.b3(x, tt) + e.x * g.y - e.y * g.x)
                },
                *center,
                *radius,
                quad,
            )
        }
        Patch::Cone { apex, rim } => {
            let n = rim.samples.len().saturating_sub(1).max(1);
            let cfg = QuadConfig {
                abs_tol: quad.abs_tol / n as f64,
                ..*quad
            };
            let a = [apex.x.x, apex.x.y, apex.t];
            rim.segments()
                .map(|(p, q)| triangle_flux(f, [a, [p.x.x, p.x.y, p.t], [q.x.x, q.x.y, q.t]], &cfg))
                .sum()
        }
        Patch::Triangulated { vertices, triangles } => {
            let cfg = QuadConfig {
                abs_tol: quad.abs_tol / triangles.len().max(1) as f64,
                ..*quad
            };
            triangles
                .iter()
                .map(|tri| {
                    let p = tri.map(|k| vertices[k]);
                    triangle_flux(f, p, &cfg)
                })
                .sum()
        }
    }
}

/// Which shielded example to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShieldedKind {
    Electric,
    Magnetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShieldedParams {
    pub kind: ShieldedKind,
    /// e(t) for the electric case, b(t) for the magnetic one.
    pub profile: TimeProfile,
    pub v0: f64,
    pub r1: f64,
    pub delta: f64,
    pub outer_radius: f64,
    pub t_end: f64,
}

/// Potential, fields and domain of a shielded-field example.
#[derive(Clone)]
pub struct ShieldedScenario {
    pub params: ShieldedParams,
    pub potential: SharedPotential,
    pub domain: Domain,
    /// Quadrature settings resolving the δ-wide features.
    pub quad: QuadConfig,
}

/// Builds the shielded electric or magnetic example with a disk obstacle of
/// radius r1 centred at (v0 t, 0).
pub fn build_shielded_scenario(params: &ShieldedParams) -> Result<ShieldedScenario> {
    let ShieldedParams {
        kind,
        ref profile,
        v0,
        r1,
        delta,
        outer_radius,
        t_end,
    } = *params;
    if !(r1 > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "obstacle radius r1 = {r1} must be positive"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "mollifier width δ = {delta} must be positive"
        )));
    }
    if delta > 0.25 * r1 * (1.0 + 1e-12) {
        return Err(Error::InvalidScenario(format!(
            "mollifier exceeds shielding bound: δ = {delta} > r1/4 = {}",
            0.25 * r1
        )));
    }
    profile.validate()?;
    let obstacle = Obstacle::new(Shape::disk(Vec2::zeros(), r1), Motion::linear(vec2(v0, 0.0)));
    let domain = Domain::new(OuterRegion::disk(Vec2::zeros(), outer_radius), vec![obstacle], t_end)
        .map_err(|e| Error::InvalidScenario(e.to_string()))?;
    let potential: SharedPotential = match kind {
        ShieldedKind::Electric => {
            if profile.transition().is_none() {
                return Err(Error::InvalidScenario(
                    "e(t) must be constant outside a finite transition window".into(),
                ));
            }
            Arc::new(ShieldedElectric::new(v0, profile.clone(), delta)?)
        }
        ShieldedKind::Magnetic => Arc::new(Vortex::new(Vec2::zeros(), vec2(v0, 0.0), delta, profile.clone())),
    };
    Ok(ShieldedScenario {
        params: params.clone(),
        potential,
        domain,
        quad: QuadConfig::default().with_max_panel_len(0.5 * delta),
    })
}

impl ShieldedScenario {
    pub fn fields(&self) -> DerivedFields<SharedPotential> {
        derived_fields(self.potential.clone())
    }

    pub fn obstacle_center(&self, t: f64) -> Vec2 {
        vec2(self.params.v0 * t, 0.0)
    }

    /// Rectangle in the plane x1 = x10 enclosing the obstacle's
    /// cross-section with a margin of r1/2 in x2 and r1/(2 v0) in t.
    pub fn cross_section_patch(&self, x10: f64) -> Result<Patch> {
        let ShieldedParams { v0, r1, t_end, .. } = self.params;
        if !(v0 > 0.0) {
            return Err(Error::InvalidArgument("cross sections need v0 > 0".into()));
        }
        let t0 = (x10 - 1.5 * r1) / v0;
        let t1 = (x10 + 1.5 * r1) / v0;
        if t0 < 0.0 || t1 > t_end {
            return Err(Error::InvalidArgument(format!(
                "cross section at x1 = {x10} needs times [{t0}, {t1}] inside [0, {t_end}]"
            )));
        }
        Ok(Patch::CrossSection {
            x1: x10,
            t: [t0, t1],
            x2: [-1.5 * r1, 1.5 * r1],
        })
    }

    /// (1/v0)·e(x10/v0)
    pub fn expected_cross_section_flux(&self, x10: f64) -> f64 {
        self.params.profile.value(x10 / self.params.v0) / self.params.v0
    }

    /// Spatial disk of the given radius about the obstacle at time t.
    pub fn spatial_patch(&self, t: f64, radius: f64) -> Patch {
        Patch::SpatialDisk {
            center: self.obstacle_center(t),
            radius,
            t,
        }
    }

    /// −(1/v0)·e(x̃1/v0) with x̃1 = v0 t + radius (electric) or b(t) (magnetic).
    pub fn expected_spatial_flux(&self, t: f64, radius: f64) -> f64 {
        let p = &self.params;
        match p.kind {
            ShieldedKind::Electric => -p.profile.value((p.v0 * t + radius) / p.v0) / p.v0,
            ShieldedKind::Magnetic => p.profile.value(t),
        }
    }
}

/// Writes `x1,x2,t,A1,A2,V,B3,E1,E2` rows for the given sample events.
pub fn write_field_csv<P: EmPotential + ?Sized, W: Write>(p: &P, samples: &[Event], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x1,x2,t,A1,A2,V,B3,E1,E2")?;
    for s in samples {
        let a = p.a(s.x, s.t);
        let e = p.e(s.x, s.t);
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.x.x,
            s.x.y,
            s.t,
            a.x,
            a.y,
            p.v(s.x, s.t),
            p.b3(s.x, s.t),
            e.x,
            e.y
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-0.1), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        assert_abs_diff_eq!(smooth_step(0.5), 0.5, epsilon = 1e-15);
        let h = 1e-6;
        for s in [0.1, 0.3, 0.7, 0.95] {
            let fd = (smooth_step(s + h) - smooth_step(s - h)) / (2.0 * h);
            assert_abs_diff_eq!(smooth_step_deriv(s), fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn mollifier_normalised() {
        for delta in [0.05, 0.3, 2.0] {
            let m = Mollifier::new(delta).unwrap();
            let mass = integrate(|s| m.value(s), -delta, delta, &quad().with_tol(1e-14)).unwrap();
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
            assert_eq!(m.value(delta), 0.0);
            assert_abs_diff_eq!(m.cdf(0.0), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn line_integral_examples() {
        let seg = SpacetimePath::open(vec![Event::new(vec2(0.0, 0.0), 0.0), Event::new(vec2(2.0, 0.0), 0.0)]);
        assert_eq!(line_integral_em(&ZeroPotential, &seg, &quad()).unwrap(), 0.0);
        let c = ConstantPotential {
            a: vec2(0.3, 0.0),
            v: 0.0,
        };
        assert_abs_diff_eq!(line_integral_em(&c, &seg, &quad()).unwrap(), 0.6, epsilon = 1e-14);

        let v = CoefficientPotential::default().monomial(Component::V, 1.0, [1, 0, 0]);
        let rect = SpacetimePath::closed(vec![
            Event::new(vec2(0.0, 0.0), 0.0),
            Event::new(vec2(1.0, 0.0), 0.0),
            Event::new(vec2(1.0, 0.0), 2.0),
            Event::new(vec2(0.0, 0.0), 2.0),
        ]);
        assert_abs_diff_eq!(line_integral_em(&v, &rect, &quad()).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn derived_field_examples() {
        let vortex_gauge = CoefficientPotential::default()
            .monomial(Component::A1, -0.5, [0, 1, 0])
            .monomial(Component::A2, 0.5, [1, 0, 0]);
        let x = vec2(0.3, -1.2);
        assert_abs_diff_eq!(vortex_gauge.b3(x, 0.7), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vortex_gauge.e(x, 0.7), Vec2::zeros(), epsilon = 1e-14);

        let v = CoefficientPotential::default().monomial(Component::V, 1.0, [1, 0, 0]);
        assert_abs_diff_eq!(v.e(x, 0.2), vec2(-1.0, 0.0), epsilon = 1e-14);
        assert_eq!(v.b3(x, 0.2), 0.0);

        let p = CoefficientPotential::default().monomial(Component::A2, 1.0, [1, 0, 1]);
        let fd = FnPotential::new(|x: Vec2, t: f64| vec2(0.0, t * x.x), |_, _| 0.0);
        for k in 0..10 {
            let x = vec2(0.37 * k as f64 - 1.0, 0.11 * k as f64);
            let t = 0.05 * k as f64;
            assert_abs_diff_eq!(p.b3(x, t), t, epsilon = 1e-14);
            assert_abs_diff_eq!(p.e(x, t), vec2(0.0, -x.x), epsilon = 1e-14);
            assert_abs_diff_eq!(fd.b3(x, t), t, epsilon = 1e-9);
            assert_abs_diff_eq!(fd.e(x, t), vec2(0.0, -x.x), epsilon = 1e-9);
        }
    }

    #[test]
    fn analytic_partials_match_differences() {
        let mut g = GaussianBump::new(vec2(0.2, -0.1), 0.6, 1.5);
        g.a = [0.7, -0.4];
        g.swirl = 1.3;
        g.v = 0.9;
        g.a_time = TimeProfile::Sinusoid {
            offset: 1.0,
            amplitude: 0.5,
            omega: 2.0,
            phase: 0.1,
        };
        let vx = Vortex::new(vec2(0.1, 0.0), vec2(0.4, 0.2), 0.3, g.a_time.clone());
        let fd_g = FnPotential::new(|x, t| g.a(x, t), |x, t| g.v(x, t));
        let fd_v = FnPotential::new(|x, t| vx.a(x, t), |x, t| vx.v(x, t));
        for k in 0..12 {
            let x = vec2(-0.9 + 0.17 * k as f64, 0.6 - 0.1 * k as f64);
            let t = 0.13 * k as f64;
            assert_abs_diff_eq!(g.b3(x, t), fd_g.b3(x, t), epsilon = 1e-8);
            assert_abs_diff_eq!(g.e(x, t), fd_g.e(x, t), epsilon = 1e-8);
            assert_abs_diff_eq!(vx.b3(x, t), fd_v.b3(x, t), epsilon = 1e-6);
            assert_abs_diff_eq!(vx.e(x, t), fd_v.e(x, t), epsilon = 1e-6);
        }
    }

    #[test]
    fn spatial_flux_examples() {
        let f = FnFields {
            b3: |_: Vec2, _: f64| 2.0,
            e: |_: Vec2, _: f64| Vec2::zeros(),
        };
        let disk = Patch::SpatialDisk {
            center: Vec2::zeros(),
            radius: 0.5,
            t: 0.0,
        };
        assert_abs_diff_eq!(surface_flux(&f, &disk, &quad()).unwrap(), PI / 2.0, epsilon = 1e-8);

        // E2 = 1 through {x1 = 0} with (t, x2) orientation gives −3
        let f = FnFields {
            b3: |_: Vec2, _: f64| 0.0,
            e: |_: Vec2, _: f64| vec2(0.0, 1.0),
        };
        let cs = Patch::CrossSection {
            x1: 0.0,
            t: [0.0, 3.0],
            x2: [0.0, 1.0],
        };
        assert_abs_diff_eq!(surface_flux(&f, &cs, &quad()).unwrap(), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn vortex_circulation() {
        let v = Vortex::fixed(Vec2::zeros(), 0.2, 2.0 * PI);
        let lp = SpacetimePath::circle(Vec2::zeros(), 1.0, 0.0, 64);
        assert_abs_diff_eq!(line_integral_em(&v, &lp, &quad()).unwrap(), 2.0 * PI, epsilon = 1e-9);
    }

    #[test]
    fn scenario_rejects_wide_mollifier() {
        let params = ShieldedParams {
            kind: ShieldedKind::Electric,
            profile: TimeProfile::constant(1.0),
            v0: 1.0,
            r1: 0.4,
            delta: 0.4,
            outer_radius: 4.0,
            t_end: 2.0,
        };
        let err = build_shielded_scenario(&params).err().unwrap();
        assert!(err.to_string().contains("mollifier exceeds shielding bound"));
        let leaving = ShieldedParams {
            delta: 0.1,
            t_end: 10.0,
            ..params
        };
        assert!(matches!(
            build_shielded_scenario(&leaving),
            Err(Error::InvalidScenario(_))
        ));
    }
}
