use std::hint::black_box;

use abflux_core::fields::{GaussianBump, PauliBump, PauliBumps, Vortex};
use abflux_core::geometry::{Domain, Obstacle, OuterRegion, Shape};
use abflux_core::parallel::Exec;
use abflux_core::quadrature::QuadConfig;
use abflux_core::schrodinger::{solve_ibvp, GridSpec, SolveOptions};
use abflux_core::transport::{nonabelian_radon, transform_dataset, LineFamily, RayFamily, DEFAULT_STEP};
use abflux_core::{vec2, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const POLICIES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn domain() -> Domain {
    Domain::new(
        OuterRegion::disk(vec2(0.0, 0.0), 3.0),
        vec![Obstacle::fixed(Shape::disk(vec2(0.3, 0.2), 0.7))],
        1.0,
    )
    .unwrap()
}

fn ray_transforms(c: &mut Criterion) {
    let d = domain();
    let mut g = c.benchmark_group("ray_transforms");
    g.sample_size(10);
    let pa = Vortex::fixed(vec2(0.3, 0.2), 0.3, 1.0);
    let mut pb = GaussianBump::new(vec2(-0.5, 0.5), 0.5, 1.5);
    pb.a = [0.7, -0.2];
    pb.v = 1.0;
    for (name, exec) in POLICIES {
        let rays = RayFamily {
            angles: 16,
            offsets: 16,
            t0: vec![0.0],
            max_reflections: 16,
        }
        .trace(&d, exec)
        .rays;
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| transform_dataset(&pa, &pb, black_box(&rays), None, &QuadConfig::default(), exec).unwrap())
        });
    }
    g.finish();
}

fn radon(c: &mut Criterion) {
    let p = PauliBumps {
        terms: vec![PauliBump {
            center: [0.0, 0.1],
            radius: 0.6,
            a1: [0.2, 1.0, 0.0, -0.5],
            a2: [0.0, 0.3, 0.8, 0.0],
            v: [0.0; 4],
            omega: 0.0,
        }],
    };
    let family = LineFamily {
        offsets: (0..32).map(|k| -0.8 + 0.05 * k as f64).collect(),
        angle: 0.4,
        t: 0.0,
    };
    let mut g = c.benchmark_group("nonabelian_radon");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| nonabelian_radon(&p, black_box(&family), DEFAULT_STEP, exec).unwrap())
        });
    }
    g.finish();
}

fn schrodinger(c: &mut Criterion) {
    let d = Domain::new(OuterRegion::rect(vec2(-1.0, -1.0), vec2(1.0, 1.0)), vec![], 0.05).unwrap();
    let grid = GridSpec::square(vec2(-1.0, -1.0), vec2(1.0, 1.0), 128, 0.05, 10).unwrap();
    let mut p = GaussianBump::new(vec2(0.0, 0.0), 0.4, 0.9);
    p.a = [1.0, 0.5];
    let f = |x: abflux_core::Vec2, t: f64| C64::from_polar(t * 20.0, 2.0 * x.x);
    let mut g = c.benchmark_group("crank_nicolson_128");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = SolveOptions {
            exec,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| solve_ibvp(&p, &d, &grid, f, None, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, ray_transforms, radon, schrodinger);
criterion_main!(benches);
