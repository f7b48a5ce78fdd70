//! Abelian broken-ray transforms, matrix transport along lines, the
//! non-abelian Radon transform and the leading geometric-optics amplitude.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fields::{bump, EmPotential, MatrixPotential};
use crate::gauge::GaugeElement;
use crate::geometry::{trace_broken_ray_with, BrokenRay, Domain, Leg, OuterRegion, TraceOptions};
use crate::parallel::{self, Exec};
use crate::quadrature::{integrate, QuadConfig};
use crate::{vec2, CMat, Error, Result, Vec2, C64};

/// Unitarity defect above which matrix transport reports `StepTooLarge`.
pub const UNITARITY_LIMIT: f64 = 1e-4;

/// Default arclength step for matrix transport.
pub const DEFAULT_STEP: f64 = 1e-3;

/// ∫ A(x(s), t0)·θ ds over one leg.
pub fn magnetic_leg_transform<P: EmPotential + ?Sized>(p: &P, leg: &Leg, t0: f64, quad: &QuadConfig) -> Result<f64> {
    integrate(|s| p.a(leg.point(s), t0).dot(&leg.direction), 0.0, leg.length, quad)
}

/// ∫ V(x(s), t0) ds over one leg.
pub fn electric_leg_transform<P: EmPotential + ?Sized>(p: &P, leg: &Leg, t0: f64, quad: &QuadConfig) -> Result<f64> {
    integrate(|s| p.v(leg.point(s), t0), 0.0, leg.length, quad)
}

/// Σ_j ∫_{γ_j} A·θ_j ds along a broken ray in its time slice.
pub fn magnetic_ray_transform<P: EmPotential + ?Sized>(p: &P, ray: &BrokenRay, quad: &QuadConfig) -> Result<f64> {
    ray.legs
        .iter()
        .map(|l| magnetic_leg_transform(p, l, ray.t0, quad))
        .sum()
}

/// Σ_j ∫_{γ_j} V ds along a broken ray in its time slice.
pub fn electric_ray_transform<P: EmPotential + ?Sized>(p: &P, ray: &BrokenRay, quad: &QuadConfig) -> Result<f64> {
    ray.legs
        .iter()
        .map(|l| electric_leg_transform(p, l, ray.t0, quad))
        .sum()
}

/// Straight line x(s) = start + s ω, 0 ≤ s ≤ length, in the slice t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub start: Vec2,
    pub direction: Vec2,
    pub length: f64,
    pub t: f64,
}

impl Line {
    pub fn point(&self, s: f64) -> Vec2 {
        self.start + self.direction * s
    }
}

/// Solution of dc/ds = i(A·ω)c, c(0) = I.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub endpoint_matrix: CMat,
    pub trace_samples: Option<Vec<(f64, CMat)>>,
    /// Step actually used (length / number of steps).
    pub h: f64,
}

impl TransportResult {
    /// ‖c†c − I‖_F at the endpoint.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.endpoint_matrix)
    }
}

pub fn unitarity_defect(c: &CMat) -> f64 {
    (c.adjoint() * c - CMat::identity(c.nrows(), c.ncols())).norm()
}

fn generator<P: MatrixPotential + ?Sized>(p: &P, line: &Line, s: f64) -> CMat {
    let [a1, a2] = p.a(line.point(s), line.t);
    (a1 * C64::from(line.direction.x) + a2 * C64::from(line.direction.y)) * C64::i()
}

fn steps_for(line: &Line, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !(line.length >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "transport needs h > 0 and length ≥ 0 (h = {h}, length = {})",
            line.length
        )));
    }
    let n = ((line.length / h) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((n, line.length / n as f64))
}

/// Classical RK4 with fixed step for the matrix transport equation.
pub fn nonabelian_transport<P: MatrixPotential + ?Sized>(p: &P, line: &Line, h: f64) -> Result<TransportResult> {
    transport_impl(p, line, h, None)
}

/// As [`nonabelian_transport`], recording c every `every` steps.
pub fn nonabelian_transport_traced<P: MatrixPotential + ?Sized>(
    p: &P,
    line: &Line,
    h: f64,
    every: usize,
) -> Result<TransportResult> {
    transport_impl(p, line, h, Some(every.max(1)))
}

fn transport_impl<P: MatrixPotential + ?Sized>(
    p: &P,
    line: &Line,
    h: f64,
    every: Option<usize>,
) -> Result<TransportResult> {
    let (n, h) = steps_for(line, h)?;
    let m = p.dim();
    let mut c = CMat::identity(m, m);
    let mut trace = every.map(|_| vec![(0.0, c.clone())]);
    let hc = C64::from(h);
    let mut m0 = generator(p, line, 0.0);
    for k in 0..n {
        let s = k as f64 * h;
        let mh = generator(p, line, s + 0.5 * h);
        let m1 = generator(p, line, s + h);
        let k1 = &m0 * &c;
        let k2 = &mh * (&c + &k1 * (hc * 0.5));
        let k3 = &mh * (&c + &k2 * (hc * 0.5));
        let k4 = &m1 * (&c + &k3 * hc);
        c += (k1 + (k2 + k3) * C64::from(2.0) + k4) * (hc / 6.0);
        m0 = m1;
        if (k + 1) % 64 == 0 || k + 1 == n {
            let d = unitarity_defect(&c);
            if !(d <= UNITARITY_LIMIT) {
                return Err(Error::StepTooLarge {
                    defect: d,
                    arclength: s + h,
                });
            }
        }
        if let (Some(tr), Some(e)) = (trace.as_mut(), every) {
            if (k + 1) % e == 0 || k + 1 == n {
                tr.push((s + h, c.clone()));
            }
        }
    }
    Ok(TransportResult {
        endpoint_matrix: c,
        trace_samples: trace,
        h,
    })
}

/// Parallel lines {y ω⊥ + s ω} at direction angle `angle`, slice `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineFamily {
    pub offsets: Vec<f64>,
    pub angle: f64,
    #[serde(default)]
    pub t: f64,
}

impl LineFamily {
    pub fn direction(&self) -> Vec2 {
        vec2(self.angle.cos(), self.angle.sin())
    }

    /// Lines running from −R to +R along ω with R = support radius + 1.
    pub fn lines(&self, support_radius: f64) -> Vec<Line> {
        let w = self.direction();
        let wp = vec2(-w.y, w.x);
        let r = support_radius + 1.0;
        self.offsets
            .iter()
            .map(|&y| Line {
                start: wp * y - w * r,
                direction: w,
                length: 2.0 * r,
                t: self.t,
            })
            .collect()
    }
}

/// c(+∞) for each line of the family.
pub fn nonabelian_radon<P: MatrixPotential + ?Sized>(
    p: &P,
    family: &LineFamily,
    h: f64,
    exec: Exec,
) -> Result<Vec<CMat>> {
    let r = p.support_radius().ok_or_else(|| {
        Error::InvalidArgument("non-abelian Radon transform needs a compactly supported potential".into())
    })?;
    parallel::try_map(exec, &family.lines(r), |l| {
        nonabelian_transport(p, l, h).map(|t| t.endpoint_matrix)
    })
}

/// ∫ c⁻¹(s)(V1 − V4)(x(s), t) c(s) ds with c the transport of `p1`; RK4 on
/// (c, c⁻¹, W) with the same fixed step.
pub fn weighted_potential_transform<P1, P4>(p1: &P1, p4: &P4, line: &Line, h: f64) -> Result<CMat>
where
    P1: MatrixPotential + ?Sized,
    P4: MatrixPotential + ?Sized,
{
    if p1.dim() != p4.dim() {
        return Err(Error::InvalidArgument(format!(
            "matrix dimensions differ: {} vs {}",
            p1.dim(),
            p4.dim()
        )));
    }
    let (n, h) = steps_for(line, h)?;
    let m = p1.dim();
    let dv = |s: f64| {
        let x = line.point(s);
        p1.v(x, line.t) - p4.v(x, line.t)
    };
    let mut c = CMat::identity(m, m);
    let mut ci = CMat::identity(m, m);
    let mut w = CMat::zeros(m, m);
    let hc = C64::from(h);
    let half = hc * 0.5;
    for k in 0..n {
        let s = k as f64 * h;
        let (g0, gh, g1) = (
            generator(p1, line, s),
            generator(p1, line, s + 0.5 * h),
            generator(p1, line, s + h),
        );
        let (d0, dh, d1) = (dv(s), dv(s + 0.5 * h), dv(s + h));
        let rhs = |g: &CMat, d: &CMat, c: &CMat, ci: &CMat| (g * c, -(ci * g), ci * d * c);
        let (a1, b1, w1) = rhs(&g0, &d0, &c, &ci);
        let (c2, i2) = (&c + &a1 * half, &ci + &b1 * half);
        let (a2, b2, w2) = rhs(&gh, &dh, &c2, &i2);
        let (c3, i3) = (&c + &a2 * half, &ci + &b2 * half);
        let (a3, b3, w3) = rhs(&gh, &dh, &c3, &i3);
        let (c4, i4) = (&c + &a3 * hc, &ci + &b3 * hc);
        let (a4, b4, w4) = rhs(&g1, &d1, &c4, &i4);
        let two = C64::from(2.0);
        c += (a1 + (a2 + a3) * two + a4) * (hc / 6.0);
        ci += (b1 + (b2 + b3) * two + b4) * (hc / 6.0);
        w += (w1 + (w2 + w3) * two + w4) * (hc / 6.0);
        if (k + 1) % 64 == 0 || k + 1 == n {
            let d = unitarity_defect(&c);
            if !(d <= UNITARITY_LIMIT) {
                return Err(Error::StepTooLarge {
                    defect: d,
                    arclength: s + h,
                });
            }
        }
    }
    Ok(w)
}

/// Concentration profile χ0(u) = bump(u)/‖bump‖₂ scaled as
/// χ1(t) = ε^{−1/2} χ0((t − t0)/ε), χ2(τ) = ε^{−1/2} χ0((τ − τ0)/ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffProfile {
    pub eps: f64,
    pub t0: f64,
    pub tau0: f64,
}

impl CutoffProfile {
    pub fn new(eps: f64, t0: f64, tau0: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff width ε = {eps} must be positive"
            )));
        }
        Ok(Self { eps, t0, tau0 })
    }

    /// χ0 with ∫χ0² = 1, supported in [−1, 1].
    pub fn chi0(u: f64) -> f64 {
        bump(u) / bump_l2_norm()
    }

    pub fn chi1(&self, t: f64) -> f64 {
        Self::chi0((t - self.t0) / self.eps) / self.eps.sqrt()
    }

    pub fn chi2(&self, tau: f64) -> f64 {
        Self::chi0((tau - self.tau0) / self.eps) / self.eps.sqrt()
    }
}

fn bump_l2_norm() -> f64 {
    static NORM: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *NORM.get_or_init(|| {
        integrate(|u| bump(u).powi(2), -1.0, 1.0, &QuadConfig::default().with_tol(1e-16))
            .expect("bump² integral converges")
            .sqrt()
    })
}

/// Leading amplitude
/// a00(s, τ, t) = χ1(t) χ2(τ) exp(i ∫_{s0}^{s} A(τ ω⊥ + s' ω, t)·ω ds').
pub struct GoAmplitude<'a, P: ?Sized> {
    pub potential: &'a P,
    pub direction: Vec2,
    pub s0: f64,
    pub cutoff: CutoffProfile,
    pub quad: QuadConfig,
}

impl<P: EmPotential + ?Sized> GoAmplitude<'_, P> {
    pub fn normal(&self) -> Vec2 {
        vec2(-self.direction.y, self.direction.x)
    }

    /// Point with ray coordinates (s, τ).
    pub fn point(&self, s: f64, tau: f64) -> Vec2 {
        self.normal() * tau + self.direction * s
    }

    /// Ray coordinates (s, τ) = (ω·x, ω⊥·x).
    pub fn coords(&self, x: Vec2) -> (f64, f64) {
        (self.direction.dot(&x), self.normal().dot(&x))
    }

    pub fn phase(&self, s: f64, tau: f64, t: f64) -> Result<f64> {
        integrate(
            |u| self.potential.a(self.point(u, tau), t).dot(&self.direction),
            self.s0,
            s,
            &self.quad,
        )
    }

    pub fn eval(&self, s: f64, tau: f64, t: f64) -> Result<C64> {
        let m = self.cutoff.chi1(t) * self.cutoff.chi2(tau);
        Ok(C64::from_polar(m, self.phase(s, tau, t)?))
    }

    /// ω·(−i∇ − A)a00 at x by central differences of step h along ω.
    pub fn transport_residual(&self, x: Vec2, t: f64, h: f64) -> Result<C64> {
        let (s, tau) = self.coords(x);
        let ds = (self.eval(s + h, tau, t)? - self.eval(s - h, tau, t)?) / (2.0 * h);
        let a = self.eval(s, tau, t)?;
        Ok(-C64::i() * ds - a * self.potential.a(x, t).dot(&self.direction))
    }
}

/// Geometric-optics amplitude along the straight leg `leg` in the slice of
/// `cutoff.t0`; s0 is the start of the leg, so ω·x = s0 there.
pub fn go_amplitude<'a, P: EmPotential + ?Sized>(p: &'a P, leg: &Leg, cutoff: CutoffProfile) -> GoAmplitude<'a, P> {
    GoAmplitude {
        potential: p,
        direction: leg.direction,
        s0: leg.direction.dot(&leg.start),
        cutoff,
        quad: QuadConfig::default().with_tol(1e-13),
    }
}

/// Incoming parallel-beam ray family: `angles` directions evenly spread
/// over [0, 2π) (offset by half a step) and `offsets` impact parameters
/// across the outer region, traced in each slice of `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayFamily {
    pub angles: usize,
    pub offsets: usize,
    #[serde(default = "default_t0")]
    pub t0: Vec<f64>,
    #[serde(default = "default_max_reflections")]
    pub max_reflections: usize,
}

fn default_t0() -> Vec<f64> {
    vec![0.0]
}

fn default_max_reflections() -> usize {
    crate::geometry::DEFAULT_MAX_REFLECTIONS
}

/// Rays of a family together with those that could not be traced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracedFamily {
    pub rays: Vec<BrokenRay>,
    pub skipped: Vec<SkippedRay>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRay {
    pub origin: Vec2,
    pub direction: Vec2,
    pub t0: f64,
    pub reason: String,
}

fn enclosing_circle(outer: &OuterRegion) -> (Vec2, f64) {
    match outer {
        OuterRegion::Disk { center, radius } => (vec2(center[0], center[1]), *radius),
        OuterRegion::Rect { min, max } => {
            let c = vec2(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]));
            (c, 0.5 * vec2(max[0] - min[0], max[1] - min[1]).norm())
        }
    }
}

impl RayFamily {
    /// (origin, direction, t0) of every ray, in family order.
    pub fn launches(&self, domain: &Domain) -> Vec<(Vec2, Vec2, f64)> {
        let (c, r) = enclosing_circle(domain.outer());
        let mut out = Vec::with_capacity(self.angles * self.offsets * self.t0.len());
        for &t in &self.t0 {
            for i in 0..self.angles {
                let phi = 2.0 * PI * (i as f64 + 0.5) / self.angles as f64;
                let w = vec2(phi.cos(), phi.sin());
                let wp = vec2(-w.y, w.x);
                for k in 0..self.offsets {
                    let y = r * (2.0 * (k as f64 + 0.5) / self.offsets as f64 - 1.0) * 0.95;
                    out.push((c - w * (r + 1.0) + wp * y, w, t));
                }
            }
        }
        out
    }

    pub fn trace(&self, domain: &Domain, exec: Exec) -> TracedFamily {
        let opts = TraceOptions {
            max_reflections: self.max_reflections,
            ..Default::default()
        };
        let launches = self.launches(domain);
        let traced = parallel::map(exec, &launches, |&(o, w, t)| {
            trace_broken_ray_with(o, w, t, domain, &opts)
        });
        let mut fam = TracedFamily {
            rays: Vec::new(),
            skipped: Vec::new(),
        };
        for ((o, w, t), r) in launches.into_iter().zip(traced) {
            match r {
                Ok(ray) => fam.rays.push(ray),
                Err(e) => fam.skipped.push(SkippedRay {
                    origin: o,
                    direction: w,
                    t0: t,
                    reason: e.to_string(),
                }),
            }
        }
        fam
    }
}

/// Per-ray transform values for a pair of potentials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayRow {
    pub id: usize,
    pub t0: f64,
    pub start: [f64; 2],
    pub direction: [f64; 2],
    pub reflections: usize,
    pub mag_a: f64,
    pub mag_b: f64,
    pub elec_a: f64,
    pub elec_b: f64,
    /// Σ∫ ∂φ/∂t ds for the declared gauge (0 without one).
    pub gauge_term: f64,
    /// |exp(i(mag_b − mag_a)) − 1|
    pub mag_discrepancy: f64,
    /// |elec_b − elec_a − gauge_term|
    pub elec_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub max_mag_discrepancy: f64,
    pub max_elec_discrepancy: f64,
    pub rows: Vec<RayRow>,
}

impl DiscrepancyReport {
    /// CSV with columns id,t0,start_x1,start_x2,dir_x1,dir_x2,reflections,d_mag,d_elec.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,t0,start_x1,start_x2,dir_x1,dir_x2,reflections,d_mag,d_elec")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.id,
                r.t0,
                r.start[0],
                r.start[1],
                r.direction[0],
                r.direction[1],
                r.reflections,
                r.mag_b - r.mag_a,
                r.elec_b - r.elec_a - r.gauge_term
            )?;
        }
        Ok(())
    }
}

/// Evaluates both transforms for both potentials on every ray. With a
/// `gauge` relating the pair (`p_b = apply_gauge(p_a, c)`), the electric
/// discrepancy is corrected by Σ∫ ∂φ/∂t ds, the `−i c⁻¹ ∂c/∂t` term.
pub fn transform_dataset<A, B>(
    p_a: &A,
    p_b: &B,
    rays: &[BrokenRay],
    gauge: Option<&GaugeElement>,
    quad: &QuadConfig,
    exec: Exec,
) -> Result<DiscrepancyReport>
where
    A: EmPotential + ?Sized,
    B: EmPotential + ?Sized,
{
    let ids: Vec<usize> = (0..rays.len()).collect();
    let rows = parallel::try_map(exec, &ids, |&id| {
        let ray = &rays[id];
        let mag_a = magnetic_ray_transform(p_a, ray, quad)?;
        let mag_b = magnetic_ray_transform(p_b, ray, quad)?;
        let elec_a = electric_ray_transform(p_a, ray, quad)?;
        let elec_b = electric_ray_transform(p_b, ray, quad)?;
        let gauge_term = match gauge {
            Some(g) => ray
                .legs
                .iter()
                .map(|l| integrate(|s| g.jet(l.point(s), ray.t0).dt, 0.0, l.length, quad))
                .sum::<Result<f64>>()?,
            None => 0.0,
        };
        Ok(RayRow {
            id,
            t0: ray.t0,
            start: [ray.start().x, ray.start().y],
            direction: [ray.legs[0].direction.x, ray.legs[0].direction.y],
            reflections: ray.reflections.len(),
            mag_a,
            mag_b,
            elec_a,
            elec_b,
            gauge_term,
            mag_discrepancy: (C64::from_polar(1.0, mag_b - mag_a) - 1.0).norm(),
            elec_discrepancy: (elec_b - elec_a - gauge_term).abs(),
        })
    })?;
    Ok(DiscrepancyReport {
        max_mag_discrepancy: rows.iter().map(|r| r.mag_discrepancy).fold(0.0, f64::max),
        max_elec_discrepancy: rows.iter().map(|r| r.elec_discrepancy).fold(0.0, f64::max),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ConstantPotential, FnPotential, Vortex, ZeroPotential};
    use crate::geometry::{Obstacle, Shape};
    use approx::assert_abs_diff_eq;

    fn q() -> QuadConfig {
        QuadConfig::default().with_tol(1e-12)
    }

    #[test]
    fn magnetic_examples() {
        let ray = BrokenRay::straight(vec2(0.0, 0.0), vec2(2.0, 0.0), 0.0);
        assert_eq!(magnetic_ray_transform(&ZeroPotential, &ray, &q()).unwrap(), 0.0);
        let p = ConstantPotential {
            a: vec2(0.3, 0.0),
            v: 0.0,
        };
        assert_abs_diff_eq!(magnetic_ray_transform(&p, &ray, &q()).unwrap(), 0.6, epsilon = 1e-14);
    }

    #[test]
    fn retroreflected_vortex_cancels() {
        let d = Domain::new(
            OuterRegion::disk(Vec2::zeros(), 4.0),
            vec![Obstacle::fixed(Shape::disk(Vec2::zeros(), 1.0))],
            1.0,
        )
        .unwrap();
        let ray = trace_broken_ray_with(vec2(-6.0, 0.0), vec2(1.0, 0.0), 0.0, &d, &TraceOptions::default()).unwrap();
        assert_eq!(ray.reflections.len(), 1);
        let v = Vortex::fixed(Vec2::zeros(), 0.3, 2.0 * PI);
        assert_abs_diff_eq!(magnetic_ray_transform(&v, &ray, &q()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn electric_examples() {
        let p = ConstantPotential {
            a: Vec2::zeros(),
            v: 0.5,
        };
        let mut ray = BrokenRay::straight(vec2(0.0, 0.0), vec2(3.0, 0.0), 0.0);
        ray.legs.push(Leg {
            start: vec2(3.0, 0.0),
            direction: vec2(0.0, 1.0),
            length: 4.0,
            entry_arclength: 3.0,
        });
        assert_abs_diff_eq!(electric_ray_transform(&p, &ray, &q()).unwrap(), 3.5, epsilon = 1e-14);
        let g = FnPotential::new(|_, _| Vec2::zeros(), |x: Vec2, _| (-x.norm_squared()).exp());
        let ray = BrokenRay::straight(vec2(-3.0, 0.0), vec2(3.0, 0.0), 0.0);
        // √π·erf(3)
        assert_abs_diff_eq!(
            electric_ray_transform(&g, &ray, &q()).unwrap(),
            1.772_414_696_519_042,
            epsilon = 1e-11
        );
    }

    #[test]
    fn transport_commuting_case() {
        let a = |_: Vec2, _: f64| {
            let d = nalgebra::DVector::from_vec(vec![C64::from(0.5), C64::from(-0.25)]);
            [CMat::from_diagonal(&d), CMat::zeros(2, 2)]
        };
        let p = crate::fields::FnMatrixPotential::new(2, a, |_, _| CMat::zeros(2, 2));
        let line = Line {
            start: Vec2::zeros(),
            direction: vec2(1.0, 0.0),
            length: 2.0,
            t: 0.0,
        };
        let c = nonabelian_transport(&p, &line, DEFAULT_STEP).unwrap().endpoint_matrix;
        assert!((c[(0, 0)] - C64::from_polar(1.0, 1.0)).norm() < 1e-12);
        assert!((c[(1, 1)] - C64::from_polar(1.0, -0.5)).norm() < 1e-12);
        assert!(c[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn transport_step_too_large() {
        let a = |_: Vec2, _: f64| {
            [
                crate::fields::pauli(1) * C64::from(50.0),
                crate::fields::pauli(3) * C64::from(0.0),
            ]
        };
        let p = crate::fields::FnMatrixPotential::new(2, a, |_, _| CMat::zeros(2, 2));
        let line = Line {
            start: Vec2::zeros(),
            direction: vec2(1.0, 0.0),
            length: 1.0,
            t: 0.0,
        };
        assert!(matches!(
            nonabelian_transport(&p, &line, 0.1),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn cutoff_is_normalised() {
        let v = integrate(
            |u| CutoffProfile::chi0(u).powi(2),
            -1.0,
            1.0,
            &QuadConfig::default().with_tol(1e-14),
        )
        .unwrap();
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        assert_eq!(CutoffProfile::chi0(1.0), 0.0);
    }

    #[test]
    fn zero_potential_amplitude_is_real() {
        let leg = BrokenRay::straight(vec2(-2.0, 0.1), vec2(2.0, 0.1), 0.0).legs[0];
        let cut = CutoffProfile::new(0.5, 0.0, 0.1).unwrap();
        let a = go_amplitude(&ZeroPotential, &leg, cut);
        let v = a.eval(0.3, 0.2, 0.1).unwrap();
        assert_eq!(v.im, 0.0);
        assert_abs_diff_eq!(v.re, cut.chi1(0.1) * cut.chi2(0.2), epsilon = 1e-15);
    }
}
