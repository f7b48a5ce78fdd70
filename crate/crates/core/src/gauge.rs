//! Gauge transformations, holonomies, equivalence testing on generator
//! loops, and reconstruction of the gauge function by path integration.
//!
//! An abelian gauge `c = e^{iφ}` acts by `A' = A − ∇φ`, `V' = V + ∂φ/∂t`,
//! `u' = c⁻¹u`. The holonomy of a closed spacetime loop is
//! `R = exp(−i ∫ A·dx − V dt)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fields::{bump, bump_deriv, line_integral_em, EmPotential, MatrixPotential};
use crate::geometry::{generator_loops_with, Domain, Event, Motion, SpacetimePath};
use crate::parallel::{self, Exec};
use crate::quadrature::QuadConfig;
use crate::{vec2, CMat, Error, Result, Vec2, C64};

/// Value and partial derivatives of a real phase φ(x, t).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseJet {
    pub value: f64,
    pub grad: Vec2,
    pub dt: f64,
    /// `[∂1∇φ, ∂2∇φ]`
    pub hess: [Vec2; 2],
    pub grad_dt: Vec2,
    pub dtt: f64,
}

impl std::ops::Add for PhaseJet {
    type Output = PhaseJet;
    fn add(self, o: PhaseJet) -> PhaseJet {
        PhaseJet {
            value: self.value + o.value,
            grad: self.grad + o.grad,
            dt: self.dt + o.dt,
            hess: [self.hess[0] + o.hess[0], self.hess[1] + o.hess[1]],
            grad_dt: self.grad_dt + o.grad_dt,
            dtt: self.dtt + o.dtt,
        }
    }
}

impl std::ops::Mul<f64> for PhaseJet {
    type Output = PhaseJet;
    fn mul(self, s: f64) -> PhaseJet {
        PhaseJet {
            value: self.value * s,
            grad: self.grad * s,
            dt: self.dt * s,
            hess: [self.hess[0] * s, self.hess[1] * s],
            grad_dt: self.grad_dt * s,
            dtt: self.dtt * s,
        }
    }
}

fn bump_second(u: f64) -> f64 {
    let w = 1.0 - u * u;
    if w <= 0.0 {
        return 0.0;
    }
    bump(u) * (4.0 * u * u / w.powi(4) - 2.0 / (w * w) - 8.0 * u * u / w.powi(3))
}

/// Smooth single-valued phase ψ(x, t).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseField {
    #[default]
    Zero,
    /// k·x + ω t + offset
    Linear {
        k: [f64; 2],
        #[serde(default)]
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    /// amplitude · sin(k·x + ω t + phase)
    Wave {
        k: [f64; 2],
        omega: f64,
        amplitude: f64,
        phase: f64,
    },
    /// amplitude · bump(|x − center|/radius) · cos(ω t + phase), with the
    /// bump normalised to 1 at its centre; vanishes for |x − center| ≥ radius.
    Bump {
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
        #[serde(default)]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Sum {
        terms: Vec<PhaseField>,
    },
}

impl PhaseField {
    pub fn jet(&self, x: Vec2, t: f64) -> PhaseJet {
        match self {
            PhaseField::Zero => PhaseJet::default(),
            PhaseField::Linear { k, omega, offset } => {
                let k = vec2(k[0], k[1]);
                PhaseJet {
                    value: k.dot(&x) + omega * t + offset,
                    grad: k,
                    dt: *omega,
                    ..Default::default()
                }
            }
            PhaseField::Wave {
                k,
                omega,
                amplitude,
                phase,
            } => {
                let k = vec2(k[0], k[1]);
                let u = k.dot(&x) + omega * t + phase;
                let (s, c) = u.sin_cos();
                PhaseJet {
                    value: amplitude * s,
                    grad: k * (amplitude * c),
                    dt: amplitude * c * omega,
                    hess: [k * (-amplitude * s * k.x), k * (-amplitude * s * k.y)],
                    grad_dt: k * (-amplitude * s * omega),
                    dtt: -amplitude * s * omega * omega,
                }
            }
            PhaseField::Bump {
                center,
                radius,
                amplitude,
                omega,
                phase,
            } => {
                let y = x - vec2(center[0], center[1]);
                let r = y.norm();
                let u = r / radius;
                if u >= 1.0 {
                    return PhaseJet::default();
                }
                let e = std::f64::consts::E;
                let f = bump(u) * e;
                let f1 = bump_deriv(u) * e / radius;
                let f2 = bump_second(u) * e / (radius * radius);
                let (grad_f, hess_f) = if r > 1e-12 {
                    let n = y / r;
                    let radial = f2;
                    let tang = f1 / r;
                    (
                        n * f1,
                        [
                            n * (radial * n.x) + (vec2(1.0, 0.0) - n * n.x) * tang,
                            n * (radial * n.y) + (vec2(0.0, 1.0) - n * n.y) * tang,
                        ],
                    )
                } else {
                    (Vec2::zeros(), [vec2(f2, 0.0), vec2(0.0, f2)])
                };
                let arg = omega * t + phase;
                let (s, c) = arg.sin_cos();
                let tv = amplitude * c;
                let td = -amplitude * omega * s;
                let tdd = -amplitude * omega * omega * c;
                PhaseJet {
                    value: f * tv,
                    grad: grad_f * tv,
                    dt: f * td,
                    hess: [hess_f[0] * tv, hess_f[1] * tv],
                    grad_dt: grad_f * td,
                    dtt: f * tdd,
                }
            }
            PhaseField::Sum { terms } => terms.iter().fold(PhaseJet::default(), |acc, p| acc + p.jet(x, t)),
        }
    }

    pub fn value(&self, x: Vec2, t: f64) -> f64 {
        self.jet(x, t).value
    }

    /// Radius about the origin outside which ψ ≡ 0, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            PhaseField::Zero => Some(0.0),
            PhaseField::Bump { center, radius, .. } => Some(vec2(center[0], center[1]).norm() + radius),
            PhaseField::Sum { terms } => terms
                .iter()
                .map(|p| p.support_radius())
                .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r))),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseField::Bump { radius, .. } if !(*radius > 0.0) => Err(Error::InvalidArgument(format!(
                "phase bump radius {radius} must be positive"
            ))),
            PhaseField::Sum { terms } => terms.iter().try_for_each(|p| p.validate()),
            _ => Ok(()),
        }
    }
}

/// Multivalued part m·θ_j about the reference point of obstacle j.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Winding {
    pub obstacle: usize,
    pub m: i64,
    pub center: Vec2,
    pub motion: Motion,
}

impl Winding {
    fn jet(&self, x: Vec2, t: f64) -> PhaseJet {
        let c = self.center + self.motion.offset(t);
        let cd = self.motion.velocity(t);
        let cdd = self.motion.acceleration(t);
        let y = x - c;
        let q = y.norm_squared();
        if q < 1e-300 {
            return PhaseJet::default();
        }
        let q2 = q * q;
        let grad = vec2(-y.y, y.x) / q;
        let hess = [
            vec2(2.0 * y.x * y.y / q2, (y.y * y.y - y.x * y.x) / q2),
            vec2((y.y * y.y - y.x * y.x) / q2, -2.0 * y.x * y.y / q2),
        ];
        let grad_dt = -(hess[0] * cd.x + hess[1] * cd.y);
        let jet = PhaseJet {
            value: y.y.atan2(y.x),
            grad,
            dt: -cd.dot(&grad),
            hess,
            grad_dt,
            dtt: -cdd.dot(&grad) - cd.dot(&grad_dt),
        };
        jet * self.m as f64
    }
}

/// Abelian gauge element `c = exp(i[Σ_j m_j θ_j + ψ])`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GaugeElement {
    pub windings: Vec<Winding>,
    pub psi: PhaseField,
}

impl GaugeElement {
    /// Single-valued gauge e^{iψ}.
    pub fn phase(psi: PhaseField) -> Self {
        Self {
            windings: Vec::new(),
            psi,
        }
    }

    /// Gauge with winding `m[j]` about obstacle j (angles measured from the
    /// obstacle's co-moving reference point).
    pub fn with_windings(domain: &Domain, m: &[i64], psi: PhaseField) -> Result<Self> {
        if m.len() != domain.obstacles().len() {
            return Err(Error::InvalidArgument(format!(
                "{} windings given for {} obstacles",
                m.len(),
                domain.obstacles().len()
            )));
        }
        let windings = domain
            .obstacles()
            .iter()
            .zip(m)
            .enumerate()
            .filter(|(_, (_, &m))| m != 0)
            .map(|(j, (o, &m))| Winding {
                obstacle: j,
                m,
                center: o.shape.reference_point(),
                motion: o.motion.clone(),
            })
            .collect();
        Ok(Self { windings, psi })
    }

    /// Jet of the total phase φ = Σ m_j θ_j + ψ (θ_j in (−π, π]).
    pub fn jet(&self, x: Vec2, t: f64) -> PhaseJet {
        self.windings
            .iter()
            .fold(self.psi.jet(x, t), |acc, w| acc + w.jet(x, t))
    }

    pub fn value(&self, x: Vec2, t: f64) -> C64 {
        C64::from_polar(1.0, self.jet(x, t).value)
    }

    /// True if |c − 1| ≤ 1e-12 at `n` boundary points for each sample time.
    pub fn is_boundary_trivial(&self, domain: &Domain, n: usize, times: &[f64]) -> bool {
        let pts = boundary_points(domain, n);
        times
            .iter()
            .all(|&t| pts.iter().all(|&x| (self.value(x, t) - 1.0).norm() <= 1e-12))
    }
}

fn boundary_points(domain: &Domain, n: usize) -> Vec<Vec2> {
    let outer = domain.outer();
    let c = match outer {
        crate::geometry::OuterRegion::Disk { center, .. } => vec2(center[0], center[1]),
        crate::geometry::OuterRegion::Rect { min, max } => vec2(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])),
    };
    (0..n)
        .filter_map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            let d = vec2(a.cos(), a.sin());
            outer.chord(c, d).map(|(_, s)| c + d * s)
        })
        .collect()
}

/// `(A − ∇φ, V + ∂φ/∂t)` for a base potential and gauge element.
#[derive(Debug, Clone)]
pub struct GaugedPotential<P> {
    pub base: P,
    pub gauge: GaugeElement,
}

/// Abelian gauge action.
pub fn apply_gauge<P: EmPotential>(p: P, c: &GaugeElement) -> Result<GaugedPotential<P>> {
    c.psi.validate()?;
    Ok(GaugedPotential {
        base: p,
        gauge: c.clone(),
    })
}

impl<P: EmPotential> EmPotential for GaugedPotential<P> {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        self.base.a(x, t) - self.gauge.jet(x, t).grad
    }
    fn v(&self, x: Vec2, t: f64) -> f64 {
        self.base.v(x, t) + self.gauge.jet(x, t).dt
    }
    fn support_radius(&self) -> Option<f64> {
        if !self.gauge.windings.is_empty() {
            return None;
        }
        match (self.base.support_radius(), self.gauge.psi.support_radius()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        }
    }
    fn fd_step(&self) -> f64 {
        self.base.fd_step()
    }
    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let d = self.base.da_dx(x, t);
        let j = self.gauge.jet(x, t);
        [d[0] - j.hess[0], d[1] - j.hess[1]]
    }
    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        self.base.da_dt(x, t) - self.gauge.jet(x, t).grad_dt
    }
    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        self.base.dv_dx(x, t) + self.gauge.jet(x, t).grad_dt
    }
    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        self.base.dv_dt(x, t) + self.gauge.jet(x, t).dtt
    }
}

/// Matrix gauge field g(x, t) with its partials `[∂1 g, ∂2 g, ∂t g]`.
pub trait MatrixGauge: Send + Sync {
    fn dim(&self) -> usize;
    fn g(&self, x: Vec2, t: f64) -> CMat;
    fn dg(&self, x: Vec2, t: f64) -> [CMat; 3];
    /// Radius about the origin outside which g is the identity, if any.
    fn support_radius(&self) -> Option<f64> {
        None
    }
}

/// `g = exp(i β(x, t) H)` for a fixed Hermitian generator H; unitary, and
/// equal to the identity wherever β vanishes.
#[derive(Debug, Clone)]
pub struct ExpGauge {
    generator: CMat,
    beta: PhaseField,
    vectors: CMat,
    values: Vec<f64>,
}

impl ExpGauge {
    pub fn new(generator: CMat, beta: PhaseField) -> Result<Self> {
        if !generator.is_square() {
            return Err(Error::InvalidArgument("gauge generator must be square".into()));
        }
        if (&generator - generator.adjoint()).norm() > 1e-12 {
            return Err(Error::InvalidArgument("gauge generator must be Hermitian".into()));
        }
        beta.validate()?;
        let eig = nalgebra::linalg::SymmetricEigen::new(generator.clone());
        Ok(Self {
            generator,
            beta,
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
        })
    }

    fn exp(&self, beta: f64) -> CMat {
        let d = nalgebra::DVector::from_iterator(
            self.values.len(),
            self.values.iter().map(|&l| C64::from_polar(1.0, beta * l)),
        );
        &self.vectors * CMat::from_diagonal(&d) * self.vectors.adjoint()
    }
}

impl MatrixGauge for ExpGauge {
    fn dim(&self) -> usize {
        self.generator.nrows()
    }
    fn g(&self, x: Vec2, t: f64) -> CMat {
        self.exp(self.beta.value(x, t))
    }
    fn dg(&self, x: Vec2, t: f64) -> [CMat; 3] {
        let j = self.beta.jet(x, t);
        let ihg = &self.generator * self.exp(j.value) * C64::i();
        [
            &ihg * C64::from(j.grad.x),
            &ihg * C64::from(j.grad.y),
            &ihg * C64::from(j.dt),
        ]
    }
    fn support_radius(&self) -> Option<f64> {
        self.beta.support_radius()
    }
}

/// Potentials transformed by a matrix gauge:
/// `A_j' = g⁻¹A_j g + i g⁻¹ ∂_j g`, `V' = g⁻¹ V g − i g⁻¹ ∂_t g`.
pub struct MatrixGauged<P, G> {
    pub base: P,
    pub gauge: G,
}

impl<P: MatrixPotential, G: MatrixGauge> MatrixGauged<P, G> {
    fn inverse(&self, x: Vec2, t: f64) -> CMat {
        self.gauge.g(x, t).try_inverse().expect("gauge checked invertible")
    }
}

/// Matrix gauge action; checks |det g| ≥ 1e-9 on a 65×65 grid over the
/// support box of the potential (or [−1, 1]² when unbounded) at `t_probe`.
pub fn apply_matrix_gauge<P: MatrixPotential, G: MatrixGauge>(
    p: P,
    g: G,
    t_probe: &[f64],
) -> Result<MatrixGauged<P, G>> {
    if p.dim() != g.dim() {
        return Err(Error::InvalidArgument(format!(
            "gauge dimension {} does not match potential dimension {}",
            g.dim(),
            p.dim()
        )));
    }
    let r = p.support_radius().unwrap_or(1.0).max(1e-6);
    let n = 65;
    for &t in t_probe {
        for i in 0..n {
            for j in 0..n {
                let x = vec2(
                    -r + 2.0 * r * i as f64 / (n - 1) as f64,
                    -r + 2.0 * r * j as f64 / (n - 1) as f64,
                );
                let det = g.g(x, t).determinant().norm();
                if !(det >= 1e-9) {
                    return Err(Error::SingularGauge(format!(
                        "|det g| = {det:.3e} at x = ({:.4}, {:.4}), t = {t}",
                        x.x, x.y
                    )));
                }
            }
        }
    }
    Ok(MatrixGauged { base: p, gauge: g })
}

impl<P: MatrixPotential, G: MatrixGauge> MatrixPotential for MatrixGauged<P, G> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn a(&self, x: Vec2, t: f64) -> [CMat; 2] {
        let g = self.gauge.g(x, t);
        let gi = self.inverse(x, t);
        let dg = self.gauge.dg(x, t);
        let a = self.base.a(x, t);
        [
            &gi * &a[0] * &g + &gi * &dg[0] * C64::i(),
            &gi * &a[1] * &g + &gi * &dg[1] * C64::i(),
        ]
    }
    fn v(&self, x: Vec2, t: f64) -> CMat {
        let g = self.gauge.g(x, t);
        let gi = self.inverse(x, t);
        let dg = self.gauge.dg(x, t);
        &gi * self.base.v(x, t) * &g - &gi * &dg[2] * C64::i()
    }
    fn support_radius(&self) -> Option<f64> {
        Some(self.base.support_radius()?.max(self.gauge.support_radius()?))
    }
}

/// R = exp(−i ∫_γ A·dx − V dt) for a closed loop.
pub fn holonomy<P: EmPotential + ?Sized>(p: &P, lp: &SpacetimePath, quad: &QuadConfig) -> Result<C64> {
    check_closed(lp)?;
    Ok(C64::from_polar(1.0, -line_integral_em(p, lp, quad)?))
}

fn check_closed(lp: &SpacetimePath) -> Result<()> {
    let (Some(a), Some(b)) = (lp.samples.first(), lp.samples.last()) else {
        return Err(Error::InvalidArgument("empty loop".into()));
    };
    if !lp.closed || (a.x - b.x).norm() > 1e-12 || (a.t - b.t).abs() > 1e-12 {
        return Err(Error::InvalidArgument("holonomy needs a closed loop".into()));
    }
    Ok(())
}

/// Number of turns of a nonvanishing complex function sampled in order
/// around a closed loop (the last sample connects back to the first).
pub fn winding_number(samples: &[C64]) -> Result<i64> {
    let n = samples.len();
    if let Some(k) = samples.iter().position(|c| !(c.norm() >= 1e-9)) {
        return Err(Error::SingularGauge(format!(
            "|c| = {:.3e} at sample {k}",
            samples[k].norm()
        )));
    }
    let mut total = 0.0;
    for k in 0..n {
        let jump = (samples[(k + 1) % n] / samples[k]).arg();
        if jump.abs() >= PI - 0.1 {
            return Err(Error::UndersampledLoop { index: k, jump });
        }
        total += jump;
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// The connection `(A_b − A_a, V_b − V_a)`.
pub struct Difference<'a, A: ?Sized, B: ?Sized> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<A: EmPotential + ?Sized, B: EmPotential + ?Sized> EmPotential for Difference<'_, A, B> {
    fn a(&self, x: Vec2, t: f64) -> Vec2 {
        self.b.a(x, t) - self.a.a(x, t)
    }
    fn v(&self, x: Vec2, t: f64) -> f64 {
        self.b.v(x, t) - self.a.v(x, t)
    }
    fn da_dx(&self, x: Vec2, t: f64) -> [Vec2; 2] {
        let (p, q) = (self.b.da_dx(x, t), self.a.da_dx(x, t));
        [p[0] - q[0], p[1] - q[1]]
    }
    fn da_dt(&self, x: Vec2, t: f64) -> Vec2 {
        self.b.da_dt(x, t) - self.a.da_dt(x, t)
    }
    fn dv_dx(&self, x: Vec2, t: f64) -> Vec2 {
        self.b.dv_dx(x, t) - self.a.dv_dx(x, t)
    }
    fn dv_dt(&self, x: Vec2, t: f64) -> f64 {
        self.b.dv_dt(x, t) - self.a.dv_dt(x, t)
    }
}

/// Settings for [`test_gauge_equivalence_with`] and
/// [`construct_gauge_function`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceOptions {
    pub clearance: f64,
    /// Holonomies within this distance of 1 count as trivial.
    pub tol_h: f64,
    pub quad: QuadConfig,
    pub loop_vertices: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            clearance: 0.1,
            tol_h: 1e-6,
            quad: QuadConfig::default(),
            loop_vertices: 256,
            exec: Exec::default(),
        }
    }
}

/// 16 uniform times over [0, T].
pub fn default_t_samples(domain: &Domain) -> Vec<f64> {
    (0..16).map(|k| domain.t_end() * k as f64 / 15.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    /// Spatial loop around one obstacle at a fixed time.
    Generator,
    /// Base point → obstacle at t_k, across to t_{k+1}, and back to the base
    /// point along the outer boundary.
    TimeRectangle,
}

/// Holonomy of the difference connection on one test loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopCheck {
    pub kind: LoopKind,
    pub obstacle: usize,
    pub times: [f64; 2],
    /// ∫ (A_b − A_a)·dx − (V_b − V_a) dt
    pub flux: f64,
    #[serde(serialize_with = "ser_complex")]
    pub holonomy: C64,
    pub defect: f64,
}

fn ser_complex<S: serde::Serializer>(c: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Equivalent {
        /// Flux quanta Δflux_j / 2π per obstacle.
        windings: Vec<i64>,
        max_defect: f64,
        loops_checked: usize,
    },
    Inequivalent {
        witness: LoopCheck,
        witness_loop: SpacetimePath,
        #[serde(serialize_with = "ser_complex")]
        holonomy_value: C64,
    },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }
}

pub fn test_gauge_equivalence<A, B>(
    p_a: &A,
    p_b: &B,
    domain: &Domain,
    t_samples: &[f64],
    clearance: f64,
) -> Result<Verdict>
where
    A: EmPotential + ?Sized,
    B: EmPotential + ?Sized,
{
    test_gauge_equivalence_with(
        p_a,
        p_b,
        domain,
        t_samples,
        &EquivalenceOptions {
            clearance,
            ..Default::default()
        },
    )
}

/// Decides whether the two potentials are gauge equivalent on the domain by
/// checking holonomies of their difference on generator loops at every
/// sample time and on time rectangles between consecutive samples.
pub fn test_gauge_equivalence_with<A, B>(
    p_a: &A,
    p_b: &B,
    domain: &Domain,
    t_samples: &[f64],
    opts: &EquivalenceOptions,
) -> Result<Verdict>
where
    A: EmPotential + ?Sized,
    B: EmPotential + ?Sized,
{
    let diff = Difference { a: p_a, b: p_b };
    let mut loops: Vec<(LoopKind, usize, [f64; 2], SpacetimePath)> = Vec::new();
    let mut per_time = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let gens = generator_loops_with(domain, t, opts.clearance, opts.loop_vertices)?;
        for (j, l) in gens.iter().enumerate() {
            loops.push((LoopKind::Generator, j, [t, t], l.clone()));
        }
        per_time.push(gens);
    }
    let base = domain.outer().base_point();
    for (pair, w) in per_time.windows(2).zip(t_samples.windows(2)) {
        for (j, (g0, g1)) in pair[0].iter().zip(&pair[1]).enumerate() {
            let q0 = g0.samples[0].x;
            let q1 = g1.samples[0].x;
            let out = route(domain, w[0], base, q0, opts.clearance)?;
            let back = route(domain, w[1], q1, base, opts.clearance)?;
            let mut pts: Vec<Event> = out.iter().map(|&x| Event::new(x, w[0])).collect();
            pts.extend(back.iter().map(|&x| Event::new(x, w[1])));
            loops.push((LoopKind::TimeRectangle, j, [w[0], w[1]], SpacetimePath::closed(pts)));
        }
    }
    let checks = parallel::try_map(opts.exec, &loops, |(kind, j, times, lp)| {
        let flux = line_integral_em(&diff, lp, &opts.quad)?;
        let h = C64::from_polar(1.0, -flux);
        Ok(LoopCheck {
            kind: *kind,
            obstacle: *j,
            times: *times,
            flux,
            holonomy: h,
            defect: (h - 1.0).norm(),
        })
    })?;
    if let Some(i) = checks.iter().position(|c| !(c.defect <= opts.tol_h)) {
        return Ok(Verdict::Inequivalent {
            witness: checks[i].clone(),
            witness_loop: loops[i].3.clone(),
            holonomy_value: checks[i].holonomy,
        });
    }
    let windings = (0..domain.obstacles().len())
        .map(|j| {
            checks
                .iter()
                .find(|c| c.kind == LoopKind::Generator && c.obstacle == j)
                .map_or(0, |c| (c.flux / (2.0 * PI)).round() as i64)
        })
        .collect();
    Ok(Verdict::Equivalent {
        windings,
        max_defect: checks.iter().map(|c| c.defect).fold(0.0, f64::max),
        loops_checked: checks.len(),
    })
}

/// c at each target such that `p_b = apply_gauge(p_a, c)` with `c(base) = 1`:
/// `c(x, t) = exp(−i ∫_γ (A_b − A_a)·dx − (V_b − V_a) dt)` along the path
/// γ that runs in time along the fixed boundary point `base.x` and then in
/// space at time t along a shortest obstacle-avoiding polyline.
///
/// Requires an `Equivalent` verdict for the same pair.
pub fn construct_gauge_function<A, B>(
    p_a: &A,
    p_b: &B,
    domain: &Domain,
    verdict: &Verdict,
    base: Event,
    targets: &[Event],
    opts: &EquivalenceOptions,
) -> Result<Vec<C64>>
where
    A: EmPotential + ?Sized,
    B: EmPotential + ?Sized,
{
    if !verdict.is_equivalent() {
        return Err(Error::PreconditionViolated(
            "gauge reconstruction needs the pair to pass the holonomy test".into(),
        ));
    }
    if domain.outer().inner_distance(base.x).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "base point must lie on the outer boundary".into(),
        ));
    }
    let diff = Difference { a: p_a, b: p_b };
    parallel::try_map(opts.exec, targets, |target| {
        let path = gauge_path(domain, base, *target, opts.clearance)?;
        Ok(C64::from_polar(1.0, -line_integral_em(&diff, &path, &opts.quad)?))
    })
}

/// The spacetime path used by [`construct_gauge_function`].
pub fn gauge_path(domain: &Domain, base: Event, target: Event, clearance: f64) -> Result<SpacetimePath> {
    let mut pts = vec![base];
    if target.t != base.t {
        pts.push(Event::new(base.x, target.t));
    }
    let leg = route(domain, target.t, base.x, target.x, clearance)?;
    pts.extend(leg.iter().skip(1).map(|&x| Event::new(x, target.t)));
    Ok(SpacetimePath::open(pts))
}

#[derive(Clone, Copy, PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest polyline from `from` to `to` in the slice t over a visibility
/// graph of obstacle snapshots inflated by `clearance`; edges keep at least
/// min(clearance/2, half the endpoints' obstacle distance) from obstacles.
pub fn route(domain: &Domain, t: f64, from: Vec2, to: Vec2, clearance: f64) -> Result<Vec<Vec2>> {
    let blocked = || Error::PathBlocked { x1: to.x, x2: to.y, t };
    let snaps = domain.snapshot(t);
    let gap = |p: Vec2| snaps.iter().map(|s| s.signed_distance(p)).fold(f64::INFINITY, f64::min);
    let (g_from, g_to) = (gap(from), gap(to));
    if g_from <= 0.0 || g_to <= 0.0 || domain.outer().inner_distance(to) < -1e-9 {
        return Err(blocked());
    }
    let margin = (0.5 * clearance).min(0.5 * g_from).min(0.5 * g_to);
    let clear = |a: Vec2, b: Vec2| snaps.iter().all(|s| s.segment_distance(a, b) >= margin * (1.0 - 1e-9));
    if clear(from, to) {
        return Ok(vec![from, to]);
    }
    let mut verts: Vec<Vec2> = snaps
        .iter()
        .flat_map(|s| s.inflated_vertices(clearance, 24))
        .filter(|v| domain.outer().inner_distance(*v) > 0.0 && gap(*v) >= margin)
        .collect();
    verts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut nodes = vec![from, to];
    nodes.extend(verts);
    let n = nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(Node(0.0, 0));
    while let Some(Node(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == 1 {
            break;
        }
        for v in 1..n {
            if done[v] || v == u {
                continue;
            }
            let nd = d + (nodes[v] - nodes[u]).norm();
            if nd < dist[v] && clear(nodes[u], nodes[v]) {
                dist[v] = nd;
                prev[v] = u;
                heap.push(Node(nd, v));
            }
        }
    }
    if !dist[1].is_finite() {
        return Err(blocked());
    }
    let mut path = vec![to];
    let mut k = 1;
    while prev[k] != usize::MAX {
        k = prev[k];
        path.push(nodes[k]);
    }
    path.reverse();
    Ok(path)
}

/// Writes `x1,x2,t,re,im` rows of gauge samples.
pub fn write_gauge_csv<W: Write>(targets: &[Event], values: &[C64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "x1,x2,t,re,im")?;
    for (e, c) in targets.iter().zip(values) {
        writeln!(w, "{},{},{},{},{}", e.x.x, e.x.y, e.t, c.re, c.im)?;
    }
    Ok(())
}
