use std::f64::consts::PI;
use std::sync::Arc;

use abflux_core::fields::{
    pauli, DiagonalMatrixPotential, EmPotential, FnMatrixPotential, GaussianBump, MatrixPotential, PauliBump,
    PauliBumps, SharedPotential, Vortex,
};
use abflux_core::gauge::{apply_gauge, apply_matrix_gauge, ExpGauge, GaugeElement, PhaseField};
use abflux_core::geometry::{trace_broken_ray_with, BrokenRay, Domain, Obstacle, OuterRegion, Shape, TraceOptions};
use abflux_core::parallel::Exec;
use abflux_core::quadrature::{integrate, QuadConfig};
use abflux_core::transport::{
    go_amplitude, magnetic_leg_transform, magnetic_ray_transform, nonabelian_radon, nonabelian_transport,
    transform_dataset, unitarity_defect, weighted_potential_transform, CutoffProfile, Line, LineFamily, RayFamily,
    DEFAULT_STEP,
};
use abflux_core::{vec2, CMat, Vec2, C64};
use proptest::prelude::*;

/// exp(i s H) for a 2×2 Hermitian H = a0 I + a·σ.
fn exp_i_herm2(hm: &CMat, s: f64) -> CMat {
    let coef = |k: usize| (hm * pauli(k)).trace().re * 0.5;
    let a0 = coef(0);
    let a = [coef(1), coef(2), coef(3)];
    let r = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let mut out = pauli(0) * C64::from((s * r).cos());
    if r > 0.0 {
        let n = (1..4).fold(CMat::zeros(2, 2), |acc, k| acc + pauli(k) * C64::from(a[k - 1] / r));
        out += n * C64::new(0.0, (s * r).sin());
    }
    out * C64::from_polar(1.0, s * a0)
}

fn a_dot<P: MatrixPotential + ?Sized>(p: &P, line: &Line, s: f64) -> CMat {
    let a = p.a(line.point(s), line.t);
    &a[0] * C64::from(line.direction.x) + &a[1] * C64::from(line.direction.y)
}

/// Ordered product of exp(i h A(mid)·ω) factors.
fn product_integral<P: MatrixPotential + ?Sized>(p: &P, line: &Line, h: f64) -> CMat {
    let n = (line.length / h).round() as usize;
    let h = line.length / n as f64;
    (0..n).fold(CMat::identity(2, 2), |c, k| {
        exp_i_herm2(&a_dot(p, line, (k as f64 + 0.5) * h), h) * c
    })
}

fn two_bumps(c: [f64; 8]) -> PauliBumps {
    PauliBumps {
        terms: vec![
            PauliBump {
                center: [-0.2, 0.05],
                radius: 0.45,
                a1: [c[0], c[1], 0.0, c[2]],
                a2: [0.0, c[3], 0.4, 0.0],
                v: [0.0, 0.0, 0.0, 0.0],
                omega: 0.0,
            },
            PauliBump {
                center: [0.25, -0.05],
                radius: 0.4,
                a1: [c[4], 0.0, c[5], c[6]],
                a2: [c[7], 0.3, 0.0, -0.2],
                v: [0.0, 0.0, 0.0, 0.0],
                omega: 0.0,
            },
        ],
    }
}

fn unit_line() -> Line {
    Line {
        start: vec2(-0.5, 0.0),
        direction: vec2(1.0, 0.0),
        length: 1.0,
        t: 0.0,
    }
}

/// Non-commuting field with entire coefficients.
fn analytic_field() -> impl MatrixPotential {
    let a = |x: Vec2, _: f64| {
        let g = (-6.0 * (x.x + 0.1).powi(2) - x.y * x.y).exp();
        [
            pauli(1) * C64::from(1.5 * g)
                + pauli(3) * C64::from((2.0 * x.x).cos())
                + pauli(2) * C64::from(0.7 * (3.0 * x.x + x.y).sin()),
            pauli(2) * C64::from(0.5 * g),
        ]
    };
    FnMatrixPotential::new(2, a, |_, _| CMat::zeros(2, 2))
}

const DEFAULT_COEFS: [f64; 8] = [0.3, 1.2, -0.7, 0.5, -0.4, 1.5, 0.8, 0.6];

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn transport_is_unitary(c in prop::array::uniform8(-2.0f64..2.0), angle in 0.0f64..(2.0 * PI)) {
        let p = two_bumps(c);
        let w = vec2(angle.cos(), angle.sin());
        let line = Line { start: -w * 0.5, direction: w, length: 1.0, t: 0.0 };
        let r = nonabelian_transport(&p, &line, DEFAULT_STEP).unwrap();
        prop_assert!(r.unitarity_defect() <= 1e-8, "{}", r.unitarity_defect());
    }

    #[test]
    fn reversing_a_leg_negates_the_transform(
        x0 in -2.0f64..2.0, y0 in -2.0f64..2.0, x1 in -2.0f64..2.0, y1 in -2.0f64..2.0, t in 0.0f64..1.0,
    ) {
        prop_assume!((x1 - x0).hypot(y1 - y0) > 1e-3);
        let mut p = GaussianBump::new(vec2(0.3, -0.2), 0.7, 2.0);
        p.a = [0.9, -0.4];
        p.swirl = 1.1;
        let ray = BrokenRay::straight(vec2(x0, y0), vec2(x1, y1), t);
        let q = QuadConfig::default().with_tol(1e-12);
        let f = magnetic_ray_transform(&p, &ray, &q).unwrap();
        let b = magnetic_ray_transform(&p, &ray.reversed(), &q).unwrap();
        prop_assert!((f + b).abs() <= 1e-10, "{} vs {}", f, b);
    }

    #[test]
    fn ray_transform_is_sum_over_legs(angle in 0.3f64..1.2, offset in -0.6f64..0.6, t in 0.0f64..1.0) {
        let domain = Domain::new(
            OuterRegion::disk(vec2(0.0, 0.0), 3.0),
            vec![Obstacle::fixed(Shape::disk(vec2(0.0, 0.0), 0.8))],
            1.0,
        ).unwrap();
        let w = vec2(angle.cos(), angle.sin());
        let origin = -w * 4.0 + vec2(-w.y, w.x) * offset;
        let ray = trace_broken_ray_with(origin, w, t, &domain, &TraceOptions::default()).unwrap();
        prop_assert!(!ray.reflections.is_empty());
        let v = Vortex::fixed(vec2(0.0, 0.0), 0.3, 1.7);
        let q = QuadConfig::default();
        let total = magnetic_ray_transform(&v, &ray, &q).unwrap();
        let legs: f64 = ray.legs.iter().map(|l| magnetic_leg_transform(&v, l, t, &q).unwrap()).sum();
        prop_assert!((total - legs).abs() <= 1e-12);
    }
}

#[test]
fn rk4_matches_product_integral() {
    let p = two_bumps(DEFAULT_COEFS);
    let line = unit_line();
    let oracle = product_integral(&p, &line, 1e-5);
    let c = nonabelian_transport(&p, &line, DEFAULT_STEP).unwrap().endpoint_matrix;
    let err = (&c - &oracle).norm();
    assert!(err <= 1e-7, "{err}");
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let p = analytic_field();
    let line = unit_line();
    let oracle = product_integral(&p, &line, 1e-5);
    let err = |h: f64| (nonabelian_transport(&p, &line, h).unwrap().endpoint_matrix - &oracle).norm();
    let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
    println!("errors {e1:.3e} {e2:.3e} {e3:.3e}");
    for f in [e1 / e2, e2 / e3] {
        assert!((12.0..=20.0).contains(&f), "factor {f}");
    }
}

#[test]
fn radon_transform_is_gauge_invariant() {
    let p = two_bumps(DEFAULT_COEFS);
    let beta = PhaseField::Bump {
        center: [0.1, 0.1],
        radius: 0.6,
        amplitude: 1.3,
        omega: 0.0,
        phase: 0.0,
    };
    let generator = pauli(1) * C64::from(0.6) + pauli(3) * C64::from(0.8);
    let pg = apply_matrix_gauge(p.clone(), ExpGauge::new(generator, beta).unwrap(), &[0.0]).unwrap();
    for angle in [0.0, 0.7, 2.1, 4.0] {
        let family = LineFamily {
            offsets: (0..15).map(|k| -0.7 + 0.1 * k as f64).collect(),
            angle,
            t: 0.0,
        };
        let r = nonabelian_radon(&p, &family, DEFAULT_STEP, Exec::default()).unwrap();
        let rg = nonabelian_radon(&pg, &family, DEFAULT_STEP, Exec::default()).unwrap();
        for (a, b) in r.iter().zip(&rg) {
            assert!((a - b).norm() <= 1e-7, "{}", (a - b).norm());
        }
    }
}

#[test]
fn zero_field_radon_is_identity() {
    let p = PauliBumps {
        terms: vec![PauliBump {
            center: [0.0, 0.0],
            radius: 0.5,
            a1: [0.0; 4],
            a2: [0.0; 4],
            v: [0.0; 4],
            omega: 0.0,
        }],
    };
    let family = LineFamily {
        offsets: vec![-0.3, 0.0, 0.4],
        angle: 1.0,
        t: 0.0,
    };
    for c in nonabelian_radon(&p, &family, DEFAULT_STEP, Exec::default()).unwrap() {
        assert_eq!(c, CMat::identity(2, 2));
    }
}

#[test]
fn diagonal_field_matches_scalar_quadrature() {
    let mut b1 = GaussianBump::new(vec2(0.1, 0.0), 0.3, 0.8);
    b1.a = [1.4, 0.0];
    let mut b2 = GaussianBump::new(vec2(-0.2, 0.1), 0.4, 0.9);
    b2.a = [-0.8, 0.0];
    let entries: Vec<SharedPotential> = vec![Arc::new(b1.clone()), Arc::new(b2.clone())];
    let p = DiagonalMatrixPotential { entries };
    let family = LineFamily {
        offsets: vec![-0.2, 0.05, 0.3],
        angle: 0.0,
        t: 0.0,
    };
    let r = p.support_radius().unwrap();
    let ends = nonabelian_radon(&p, &family, DEFAULT_STEP, Exec::default()).unwrap();
    let q = QuadConfig::default().with_tol(1e-13);
    for (line, c) in family.lines(r).iter().zip(&ends) {
        for (k, b) in [&b1, &b2].iter().enumerate() {
            let phase = integrate(|s| b.a(line.point(s), 0.0).x, 0.0, line.length, &q).unwrap();
            assert!((c[(k, k)] - C64::from_polar(1.0, phase)).norm() <= 1e-10);
        }
        assert!(c[(0, 1)].norm() < 1e-15 && c[(1, 0)].norm() < 1e-15);
    }
}

fn with_potential(base: PauliBumps, v: impl Fn(Vec2) -> CMat + Send + Sync) -> impl MatrixPotential {
    FnMatrixPotential::new(2, move |x, t| base.a(x, t), move |x, _| v(x))
}

#[test]
fn weighted_transform_trivial_cases() {
    let line = unit_line();
    let p = two_bumps(DEFAULT_COEFS);
    let w = weighted_potential_transform(&p, &p, &line, DEFAULT_STEP).unwrap();
    assert_eq!(w, CMat::zeros(2, 2));
    let zero = PauliBumps::default();
    let f = |x: Vec2| pauli(0) * C64::from((3.0 * x.x).cos());
    let p1 = with_potential(zero.clone(), f);
    let w = weighted_potential_transform(&p1, &zero, &line, DEFAULT_STEP).unwrap();
    let exact = (1.5f64.sin() - (-1.5f64).sin()) / 3.0;
    assert!((w - pauli(0) * C64::from(exact)).norm() <= 1e-12);
}

#[test]
fn weighted_transform_matches_fine_oracle() {
    let line = unit_line();
    let base = two_bumps(DEFAULT_COEFS);
    let dv = |x: Vec2| pauli(2) * C64::from((-4.0 * x.norm_squared()).exp()) + pauli(3) * C64::from(0.5 * x.x);
    let p1 = with_potential(base.clone(), dv);
    let p4 = PauliBumps::default();
    let w = weighted_potential_transform(&p1, &p4, &line, DEFAULT_STEP).unwrap();
    let n = 100_000;
    let h = line.length / n as f64;
    let mut c = CMat::identity(2, 2);
    let mut oracle = CMat::zeros(2, 2);
    for k in 0..n {
        let s = (k as f64 + 0.5) * h;
        let half = exp_i_herm2(&a_dot(&base, &line, s), 0.5 * h);
        let cm = &half * &c;
        let ci = cm.adjoint();
        oracle += ci * dv(line.point(s)) * &cm * C64::from(h);
        c = half * cm;
    }
    let err = (&w - &oracle).norm();
    assert!(err <= 1e-7, "{err}");
    assert!(unitarity_defect(&c) < 1e-12);
}

fn smooth_em() -> GaussianBump {
    let mut p = GaussianBump::new(vec2(0.2, 0.1), 0.6, 2.0);
    p.a = [0.8, -0.5];
    p.swirl = 0.9;
    p
}

#[test]
fn amplitude_modulus_and_transport_residual() {
    let p = smooth_em();
    let leg = BrokenRay::straight(vec2(-3.0, 0.2), vec2(3.0, -0.4), 0.0).legs[0];
    let cut = CutoffProfile::new(0.5, 0.0, 0.1).unwrap();
    let amp = go_amplitude(&p, &leg, cut);
    let mut worst = 0.0f64;
    for (k, s) in [-0.8, -0.2, 0.4, 1.1].iter().enumerate() {
        let tau = 0.1 + 0.15 * (k as f64 - 1.5);
        let t = 0.1 * k as f64;
        let a = amp.eval(*s, tau, t).unwrap();
        let m = cut.chi1(t) * cut.chi2(tau);
        assert!((a.norm() - m).abs() <= 4.0 * f64::EPSILON * m, "{} vs {m}", a.norm());
        let x = amp.point(*s, tau);
        let r1 = amp.transport_residual(x, t, 1e-2).unwrap().norm();
        let r2 = amp.transport_residual(x, t, 5e-3).unwrap().norm();
        let r4 = amp.transport_residual(x, t, 1e-4).unwrap().norm();
        worst = worst.max(r4);
        let order = (r1 / r2).log2();
        assert!((1.8..2.2).contains(&order), "order {order}");
    }
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn gauge_pairs_have_equal_transforms() {
    let domain = Domain::new(
        OuterRegion::disk(vec2(0.0, 0.0), 3.0),
        vec![Obstacle::fixed(Shape::disk(vec2(0.3, 0.2), 0.7))],
        1.0,
    )
    .unwrap();
    let parts: Vec<SharedPotential> = vec![Arc::new(smooth_em()), Arc::new(Vortex::fixed(vec2(0.3, 0.2), 0.3, 1.1))];
    let p = abflux_core::fields::SumPotential::new(parts);
    let c = GaugeElement::phase(PhaseField::Sum {
        terms: vec![
            PhaseField::Bump {
                center: [-0.5, 0.4],
                radius: 2.0,
                amplitude: 2.5,
                omega: 3.0,
                phase: 0.2,
            },
            PhaseField::Bump {
                center: [1.0, -1.0],
                radius: 1.2,
                amplitude: -1.0,
                omega: -1.0,
                phase: 0.0,
            },
        ],
    });
    assert!(c.is_boundary_trivial(&domain, 256, &[0.0, 0.4]));
    let pg = apply_gauge(&p, &c).unwrap();
    let fam = RayFamily {
        angles: 20,
        offsets: 10,
        t0: vec![0.4],
        max_reflections: 16,
    }
    .trace(&domain, Exec::default());
    assert_eq!(fam.rays.len(), 200);
    assert!(fam.rays.iter().filter(|r| !r.reflections.is_empty()).count() >= 20);
    let q = QuadConfig::default();
    let rep = transform_dataset(&p, &pg, &fam.rays, Some(&c), &q, Exec::default()).unwrap();
    assert!(rep.max_mag_discrepancy <= 1e-6, "{}", rep.max_mag_discrepancy);
    assert!(rep.max_elec_discrepancy <= 1e-6, "{}", rep.max_elec_discrepancy);
    let same = transform_dataset(&p, &p, &fam.rays, None, &q, Exec::default()).unwrap();
    assert_eq!(same.max_mag_discrepancy, 0.0);
    assert_eq!(same.max_elec_discrepancy, 0.0);
}

#[test]
fn half_quantum_shows_on_opposite_sides() {
    let pa = Vortex::fixed(vec2(0.0, 0.0), 0.3, 0.4);
    let pb = Vortex::fixed(vec2(0.0, 0.0), 0.3, 0.4 + PI);
    let q = QuadConfig::default().with_tol(1e-12);
    let l = 50.0;
    let delta = |y: f64| {
        let ray = BrokenRay::straight(vec2(-l, y), vec2(l, y), 0.0);
        magnetic_ray_transform(&pb, &ray, &q).unwrap() - magnetic_ray_transform(&pa, &ray, &q).unwrap()
    };
    // swept angle of each chord as seen from the vortex
    let sweep = |y: f64| y.atan2(l) - y.atan2(-l);
    let expected = 0.5 * (sweep(1.0) - sweep(-1.0));
    let got = delta(1.0) - delta(-1.0);
    assert!((got - expected).abs() <= 1e-9, "{got} vs {expected}");
    assert!((got.abs() - PI).abs() < 0.05);
}
