//! Task runners. Each returns a [`TaskOutput`]; nothing here touches disk.

use std::fmt::Write as _;

use abflux_core::fields::{
    build_shielded_scenario, line_integral_em, smooth_step, surface_flux, write_field_csv, MatrixPotential,
    ShieldedKind, TimeProfile,
};
use abflux_core::gauge::{
    apply_matrix_gauge, construct_gauge_function, default_t_samples, holonomy, test_gauge_equivalence_with,
    write_gauge_csv, EquivalenceOptions, GaugeElement, Verdict,
};
use abflux_core::geometry::{generator_loops, Domain, Event, OuterRegion, SpacetimePath};
use abflux_core::parallel::{self, Exec};
use abflux_core::quadrature::QuadConfig;
use abflux_core::schrodinger::{
    boundary_data, dtn_apply, dtn_conjugate, neumann_trace, solve_ibvp, GridSpec, NeumannData, SolveOptions,
};
use abflux_core::transport::{nonabelian_radon, transform_dataset, unitarity_defect};
use abflux_core::{vec2, Vec2, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::*;
use crate::error::{CliError, Context, Result};
use crate::report::{Check, TaskOutput};

pub fn execute(sc: &Scenario, prep: &Prepared) -> Result<TaskOutput> {
    match &sc.task {
        Task::TraceRays(t) => trace_rays(prep, t),
        Task::RayTransforms(t) => ray_transforms(sc, prep, t),
        Task::Holonomy(t) => holonomy_task(sc, prep, t),
        Task::Equivalence(t) => equivalence(sc, prep, t),
        Task::NonabelianRadon(t) => radon(t),
        Task::SchrodingerBoundaryData(t) => pde_boundary_data(prep, t),
        Task::Dtn(t) => pde_dtn(prep, t),
        Task::ShieldedDemo(t) => shielded(t),
    }
}

fn csv(name: &str, body: String) -> (String, Vec<u8>) {
    (name.to_string(), body.into_bytes())
}

fn csv_from(name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(String, Vec<u8>)> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|source| CliError::Write {
        path: name.to_string(),
        source,
    })?;
    Ok((name.to_string(), buf))
}

fn trace_rays(prep: &Prepared, t: &TraceRaysTask) -> Result<TaskOutput> {
    let domain = prep.domain()?;
    let fam = t.family.trace(domain, Exec::default());
    let mut table = String::from("id,t0,start_x1,start_x2,dir_x1,dir_x2,reflections,length\n");
    let mut poly = String::from("ray,t0,vertex,x1,x2\n");
    let mut rows = Vec::with_capacity(fam.rays.len());
    for (id, ray) in fam.rays.iter().enumerate() {
        let (s, d) = (ray.start(), ray.legs[0].direction);
        let len = ray.total_length();
        let _ = writeln!(
            table,
            "{id},{},{},{},{},{},{},{len}",
            ray.t0,
            s.x,
            s.y,
            d.x,
            d.y,
            ray.reflections.len()
        );
        for (k, v) in ray.vertices().iter().enumerate() {
            let _ = writeln!(poly, "{id},{},{k},{},{}", ray.t0, v.x, v.y);
        }
        rows.push(json!({
            "id": id,
            "t0": ray.t0,
            "start": [s.x, s.y],
            "direction": [d.x, d.y],
            "reflections": ray.reflections.len(),
            "length": len,
        }));
    }
    let skipped: Vec<_> = fam
        .skipped
        .iter()
        .map(|s| json!({"origin": [s.origin.x, s.origin.y], "direction": [s.direction.x, s.direction.y], "t0": s.t0, "reason": s.reason}))
        .collect();
    let reflected = fam.rays.iter().filter(|r| !r.reflections.is_empty()).count();
    let max_refl = fam.rays.iter().map(|r| r.reflections.len()).max().unwrap_or(0);
    Ok(TaskOutput {
        results: json!({
            "rays": fam.rays.len(),
            "reflected_rays": reflected,
            "max_reflections": max_refl,
            "skipped": skipped,
            "table": rows,
        }),
        files: vec![csv("rays.csv", table), csv("ray_polylines.csv", poly)],
        ..Default::default()
    })
}

fn ray_transforms(sc: &Scenario, prep: &Prepared, t: &RayTransformsTask) -> Result<TaskOutput> {
    let domain = prep.domain()?;
    let (a, b) = prep.pair()?;
    // the c-term correction applies only when the pair is related by the declared gauge
    let gauge = if sc.potential_b.is_none() {
        prep.gauge.as_ref()
    } else {
        None
    };
    let fam = t.family.trace(domain, Exec::default());
    let quad = QuadConfig::default().with_tol(t.quad_tol);
    let rep = transform_dataset(&*a, &*b, &fam.rays, gauge, &quad, Exec::default()).context("ray transforms")?;
    let mut out = TaskOutput::default();
    out.discrepancies
        .insert("max_mag_discrepancy".into(), rep.max_mag_discrepancy);
    out.discrepancies
        .insert("max_elec_discrepancy".into(), rep.max_elec_discrepancy);
    if let Some(tol) = t.mag_tolerance {
        out.checks
            .push(Check::bound("max_mag_discrepancy", rep.max_mag_discrepancy, tol));
    }
    if let Some(tol) = t.elec_tolerance {
        out.checks
            .push(Check::bound("max_elec_discrepancy", rep.max_elec_discrepancy, tol));
    }
    let boundary_trivial = gauge.map(|g| g.is_boundary_trivial(domain, 256, &default_t_samples(domain)));
    if boundary_trivial == Some(false) {
        out.warnings.push("gauge is not 1 on the outer boundary".into());
    }
    out.files.push(csv_from("transforms.csv", |w| rep.write_csv(w))?);
    out.results = json!({
        "rays": rep.rows.len(),
        "reflected_rays": rep.rows.iter().filter(|r| r.reflections > 0).count(),
        "skipped_rays": fam.skipped.len(),
        "gauge_boundary_trivial": boundary_trivial,
        "table": rep.rows,
    });
    Ok(out)
}

fn build_loops(prep: &Prepared, specs: &[LoopSpec]) -> Result<Vec<(String, SpacetimePath)>> {
    let mut loops = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        match s {
            LoopSpec::Circle(c) => loops.push((
                format!("circle{i}"),
                SpacetimePath::circle(vec2(c.center[0], c.center[1]), c.radius, c.t, c.vertices),
            )),
            LoopSpec::Polygon(p) => loops.push((
                format!("polygon{i}"),
                SpacetimePath::closed(p.events.iter().map(|e| Event::new(vec2(e[0], e[1]), e[2])).collect()),
            )),
            LoopSpec::Generators(g) => {
                let gens = generator_loops(prep.domain()?, g.t, g.clearance).context("generator loops")?;
                for (j, l) in gens.into_iter().enumerate() {
                    loops.push((format!("generator{i}.obstacle{j}"), l));
                }
            }
        }
    }
    Ok(loops)
}

fn holonomy_task(sc: &Scenario, prep: &Prepared, t: &HolonomyTask) -> Result<TaskOutput> {
    let p = prep.potential()?;
    let loops = build_loops(prep, &t.loops)?;
    let quad = QuadConfig::default();
    let values = parallel::try_map(Exec::default(), &loops, |(_, lp)| {
        Ok((line_integral_em(&**p, lp, &quad)?, holonomy(&**p, lp, &quad)?))
    })
    .context("holonomy")?;
    let expected = t.expected.map(|e| C64::new(e[0], e[1]));
    let mut table = String::from("loop,vertices,flux,re,im,defect\n");
    let mut rows = Vec::new();
    let mut max_defect = 0.0f64;
    for ((name, lp), (flux, r)) in loops.iter().zip(&values) {
        let defect = expected.map(|e| (r - e).norm());
        if let Some(d) = defect {
            max_defect = max_defect.max(d);
        }
        let _ = writeln!(
            table,
            "{name},{},{flux},{},{},{}",
            lp.samples.len(),
            r.re,
            r.im,
            defect.map_or(String::new(), |d| d.to_string())
        );
        rows.push(json!({"loop": name, "vertices": lp.samples.len(), "flux": flux, "holonomy": [r.re, r.im], "defect": defect}));
    }
    let mut out = TaskOutput::default();
    if expected.is_some() {
        out.discrepancies.insert("max_holonomy_defect".into(), max_defect);
        if let Some(tol) = t.tolerance {
            out.checks.push(Check::bound("max_holonomy_defect", max_defect, tol));
        }
    }
    out.files.push(csv("holonomy.csv", table));
    if let Some(sweep) = &t.flux_sweep {
        let Some(PotentialSpec::Vortex(v)) = &sc.potential else {
            return Err(CliError::ConfigInvalid {
                path: "task.flux_sweep".into(),
                message: "flux sweeps need a vortex potential".into(),
            });
        };
        let Some((_, lp)) = loops.first() else {
            return Err(CliError::ConfigInvalid {
                path: "task.loops".into(),
                message: "flux sweeps need at least one loop".into(),
            });
        };
        let fluxes: Vec<f64> = (0..sweep.count)
            .map(|k| sweep.from + (sweep.to - sweep.from) * k as f64 / (sweep.count.max(2) - 1) as f64)
            .collect();
        let curve = parallel::try_map(Exec::default(), &fluxes, |&b| {
            let mut vb = v.clone();
            vb.flux = TimeProfile::constant(b);
            holonomy(&vb, lp, &quad)
        })
        .context("flux sweep")?;
        let mut body = String::from("flux,re,im,arg\n");
        for (b, r) in fluxes.iter().zip(&curve) {
            let _ = writeln!(body, "{b},{},{},{}", r.re, r.im, r.arg());
        }
        out.files.push(csv("holonomy_vs_flux.csv", body));
    }
    out.results = json!({ "loops": rows });
    Ok(out)
}

fn random_targets(domain: &Domain, n: usize, clearance: f64, seed: u64) -> Result<Vec<Event>> {
    let (lo, hi) = match domain.outer() {
        OuterRegion::Disk { center, radius } => (
            vec2(center[0] - radius, center[1] - radius),
            vec2(center[0] + radius, center[1] + radius),
        ),
        OuterRegion::Rect { min, max } => (vec2(min[0], min[1]), vec2(max[0], max[1])),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n.max(1) {
            return Err(CliError::ConfigInvalid {
                path: "task.targets".into(),
                message: "could not place targets away from the obstacles".into(),
            });
        }
        let x = vec2(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        let t = rng.gen_range(0.0..domain.t_end());
        let clear = domain
            .snapshot(t)
            .iter()
            .all(|s| s.signed_distance(x) > 1.5 * clearance);
        if domain.outer().inner_distance(x) > 0.5 * clearance && clear {
            out.push(Event::new(x, t));
        }
    }
    Ok(out)
}

fn equivalence(sc: &Scenario, prep: &Prepared, t: &EquivalenceTask) -> Result<TaskOutput> {
    let domain = prep.domain()?;
    let (a, b) = prep.pair()?;
    let t_samples = t.t_samples.clone().unwrap_or_else(|| default_t_samples(domain));
    let opts = EquivalenceOptions {
        clearance: t.clearance,
        tol_h: t.tol_h,
        ..Default::default()
    };
    let verdict = test_gauge_equivalence_with(&*a, &*b, domain, &t_samples, &opts).context("equivalence test")?;
    let mut out = TaskOutput::default();
    let observed = if verdict.is_equivalent() {
        "equivalent"
    } else {
        "inequivalent"
    };
    if let Some(e) = t.expect {
        let expected = match e {
            Expectation::Equivalent => "equivalent",
            Expectation::Inequivalent => "inequivalent",
        };
        out.checks.push(Check::equal("verdict", expected, observed));
    }
    let mut results = json!({ "verdict": observed, "t_samples": t_samples });
    match &verdict {
        Verdict::Equivalent {
            windings,
            max_defect,
            loops_checked,
        } => {
            results["windings"] = json!(windings);
            results["loops_checked"] = json!(loops_checked);
            out.discrepancies.insert("max_loop_defect".into(), *max_defect);
            if let Some(w) = &t.expected_windings {
                out.checks
                    .push(Check::equal("windings", format!("{w:?}"), format!("{windings:?}")));
            }
            if t.expected_witness.is_some() {
                out.checks.push(Check::equal("witness", "inequivalent", observed));
            }
        }
        Verdict::Inequivalent {
            witness,
            holonomy_value,
            ..
        } => {
            results["witness"] = json!(witness);
            if let Some(w) = &t.expected_windings {
                out.checks.push(Check::equal("windings", format!("{w:?}"), "none"));
            }
            if let Some(w) = t.expected_witness {
                let d = (holonomy_value - C64::new(w[0], w[1])).norm();
                out.discrepancies.insert("witness_error".into(), d);
                if let Some(tol) = t.witness_tolerance {
                    out.checks.push(Check::bound("witness_error", d, tol));
                }
            }
        }
    }
    if t.targets > 0 {
        if verdict.is_equivalent() {
            let targets = random_targets(domain, t.targets, t.clearance, sc.seed)?;
            let base = Event::new(domain.outer().base_point(), 0.0);
            let c = construct_gauge_function(&*a, &*b, domain, &verdict, base, &targets, &opts)
                .context("gauge reconstruction")?;
            out.files
                .push(csv_from("gauge.csv", |w| write_gauge_csv(&targets, &c, w))?);
            let reference = t.reference_gauge.as_ref().or(sc.gauge.as_ref());
            if let Some(r) = reference {
                let cs = r.build(Some(domain)).context("reference gauge")?;
                let c0 = cs.value(base.x, base.t);
                let err = targets
                    .iter()
                    .zip(&c)
                    .map(|(e, c)| (c - cs.value(e.x, e.t) / c0).norm())
                    .fold(0.0, f64::max);
                out.discrepancies.insert("round_trip_error".into(), err);
                if let Some(tol) = t.round_trip_tolerance {
                    out.checks.push(Check::bound("round_trip_error", err, tol));
                }
            } else if t.round_trip_tolerance.is_some() {
                return Err(CliError::ConfigInvalid {
                    path: "task.round_trip_tolerance".into(),
                    message: "needs `gauge` or `task.reference_gauge`".into(),
                });
            }
            results["targets"] = json!(targets.len());
            results["base"] = json!([base.x.x, base.x.y, base.t]);
        } else {
            out.warnings
                .push("pair is inequivalent; gauge reconstruction skipped".into());
            if t.round_trip_tolerance.is_some() {
                out.checks.push(Check::equal("round_trip", "equivalent", observed));
            }
        }
    }
    out.results = results;
    Ok(out)
}

fn radon(t: &RadonTask) -> Result<TaskOutput> {
    let p = &t.potential;
    if p.support_radius().is_none() {
        return Err(CliError::ConfigInvalid {
            path: "task.potential".into(),
            message: "needs at least one term".into(),
        });
    }
    let gauged = match &t.gauge {
        Some(g) => {
            let times: Vec<f64> = t.families.iter().map(|f| f.t).collect();
            Some(apply_matrix_gauge(p.clone(), g.build().context("matrix gauge")?, &times).context("matrix gauge")?)
        }
        None => None,
    };
    let mut body = String::from(
        "family,offset,angle,t,c11_re,c11_im,c12_re,c12_im,c21_re,c21_im,c22_re,c22_im,defect,invariance\n",
    );
    let mut rows = Vec::new();
    let (mut max_defect, mut max_inv) = (0.0f64, 0.0f64);
    for (fi, fam) in t.families.iter().enumerate() {
        let cs = nonabelian_radon(p, fam, t.step, Exec::default()).context("non-abelian Radon transform")?;
        let cg = match &gauged {
            Some(g) => Some(nonabelian_radon(g, fam, t.step, Exec::default()).context("gauged Radon transform")?),
            None => None,
        };
        for (k, c) in cs.iter().enumerate() {
            let defect = unitarity_defect(c);
            let inv = cg.as_ref().map(|cg| (&cg[k] - c).norm());
            max_defect = max_defect.max(defect);
            if let Some(d) = inv {
                max_inv = max_inv.max(d);
            }
            let y = fam.offsets[k];
            let _ = write!(body, "{fi},{y},{},{}", fam.angle, fam.t);
            for z in [c[(0, 0)], c[(0, 1)], c[(1, 0)], c[(1, 1)]] {
                let _ = write!(body, ",{},{}", z.re, z.im);
            }
            let _ = writeln!(body, ",{defect},{}", inv.map_or(String::new(), |d| d.to_string()));
            rows.push(json!({"family": fi, "offset": y, "unitarity_defect": defect, "invariance": inv}));
        }
    }
    let mut out = TaskOutput::default();
    out.discrepancies.insert("max_unitarity_defect".into(), max_defect);
    if let Some(tol) = t.unitarity_tolerance {
        out.checks.push(Check::bound("max_unitarity_defect", max_defect, tol));
    }
    if gauged.is_some() {
        out.discrepancies.insert("max_invariance_discrepancy".into(), max_inv);
        if let Some(tol) = t.invariance_tolerance {
            out.checks
                .push(Check::bound("max_invariance_discrepancy", max_inv, tol));
        }
    } else if t.invariance_tolerance.is_some() {
        return Err(CliError::ConfigInvalid {
            path: "task.invariance_tolerance".into(),
            message: "needs `task.gauge`".into(),
        });
    }
    out.files.push(csv("radon.csv", body));
    out.results = json!({ "lines": rows.len(), "table": rows });
    Ok(out)
}

/// Grid, solver options and Dirichlet data of a PDE task.
pub(crate) fn pde_setup(domain: &Domain, t: &PdeTask) -> Result<(GridSpec, SolveOptions)> {
    let OuterRegion::Rect { min, max } = domain.outer() else {
        return Err(CliError::ConfigInvalid {
            path: "domain.outer".into(),
            message: "boundary data need a rectangular outer region".into(),
        });
    };
    let grid = GridSpec::square(
        vec2(min[0], min[1]),
        vec2(max[0], max[1]),
        t.grid.n,
        domain.t_end(),
        t.grid.nt,
    )
    .context("grid")?;
    let opts = SolveOptions {
        ramp: t.ramp == Ramp::Standard,
        ..Default::default()
    };
    Ok((grid, opts))
}

fn dirichlet(t: &PdeTask, t_end: f64) -> impl Fn(Vec2, f64) -> C64 + Sync + '_ {
    move |x, s| {
        let env = if t.ramp == Ramp::Full {
            smooth_step(s / t_end)
        } else {
            1.0
        };
        t.data.eval(x, s) * env
    }
}

fn has_pair(prep: &Prepared) -> bool {
    prep.potential_b.is_some() || prep.gauge.is_some()
}

/// The gauge relating the pair on the boundary (trivial for an explicit
/// `potential_b`).
fn pair_gauge(sc_prep: &Prepared) -> GaugeElement {
    match (&sc_prep.potential_b, &sc_prep.gauge) {
        (None, Some(c)) => c.clone(),
        _ => GaugeElement::default(),
    }
}

fn pde_results(grid: &GridSpec, warnings: &[String]) -> (serde_json::Value, Vec<String>) {
    let mut w = grid.warnings();
    w.extend(warnings.iter().cloned());
    w.dedup();
    (
        json!({
            "nodes_per_side": grid.nx,
            "h": grid.hx(),
            "dt": grid.dt,
            "steps": grid.nt,
        }),
        w,
    )
}

fn pde_boundary_data(prep: &Prepared, t: &PdeTask) -> Result<TaskOutput> {
    let domain = prep.domain()?;
    let p = prep.potential()?;
    let (grid, opts) = pde_setup(domain, t)?;
    let f = dirichlet(t, grid.t_end());
    let w = solve_ibvp(&**p, domain, &grid, &f, None, &opts).context("Schrödinger solve")?;
    let bd = boundary_data(&w, &**p).context("boundary data")?;
    let mut out = TaskOutput::default();
    out.files.push(csv_from("boundary_data.csv", |wr| bd.write_csv(wr))?);
    let (mut results, warnings) = pde_results(&grid, &w.warnings);
    out.warnings = warnings;
    results["max_inner_iterations"] = json!(w.iterations.iter().max());
    results["final_norm"] = json!(w.norms.last());
    if has_pair(prep) {
        let (_, pb) = prep.pair()?;
        let c = pair_gauge(prep);
        let fb = |x: Vec2, s: f64| f(x, s) / c.value(x, s);
        let wb = solve_ibvp(&*pb, domain, &grid, fb, None, &opts).context("Schrödinger solve (pair)")?;
        let bdb = boundary_data(&wb, &*pb).context("boundary data (pair)")?;
        out.files.push(csv_from("boundary_data_b.csv", |wr| bdb.write_csv(wr))?);
        let d = bd.max_difference(&bdb);
        let na = neumann_trace(&w, &**p).context("Neumann trace")?;
        let nb = neumann_trace(&wb, &*pb).context("Neumann trace (pair)")?;
        let dn = nb.max_difference(&conjugated(&na, &c));
        out.discrepancies.insert("f1".into(), d[0]);
        out.discrepancies.insert("f2".into(), d[1]);
        out.discrepancies.insert("f3".into(), d[2]);
        out.discrepancies
            .insert("boundary_triple".into(), d.iter().copied().fold(0.0, f64::max));
        out.discrepancies.insert("neumann".into(), dn);
        if let Some(tol) = t.tolerance {
            out.checks.push(Check::bound(
                "boundary_triple",
                d.iter().copied().fold(0.0, f64::max),
                tol,
            ));
            out.checks.push(Check::bound("neumann", dn, tol));
        }
    }
    out.results = results;
    Ok(out)
}

/// `c⁻¹·Λ` pointwise on the boundary.
fn conjugated(n: &NeumannData, c: &GaugeElement) -> NeumannData {
    let mut out = n.clone();
    for (k, row) in out.values.iter_mut().enumerate() {
        for (z, node) in row.iter_mut().zip(&n.nodes) {
            *z /= c.value(node.x, n.times[k]);
        }
    }
    out
}

fn pde_dtn(prep: &Prepared, t: &PdeTask) -> Result<TaskOutput> {
    let domain = prep.domain()?;
    let p = prep.potential()?;
    let (grid, opts) = pde_setup(domain, t)?;
    let f = dirichlet(t, grid.t_end());
    let mut out = TaskOutput::default();
    let (results, warnings) = pde_results(&grid, &[]);
    out.warnings = warnings;
    if has_pair(prep) {
        let (_, pb) = prep.pair()?;
        let c = pair_gauge(prep);
        let lb = dtn_apply(&*pb, domain, &grid, &f, &opts).context("D-to-N map (pair)")?;
        let lc = dtn_conjugate(&**p, domain, &grid, &f, &c, &opts).context("conjugated D-to-N map")?;
        let d = lb.max_difference(&lc);
        out.files.push(csv_from("dtn_b.csv", |w| lb.write_csv(w))?);
        out.files.push(csv_from("dtn_conjugated.csv", |w| lc.write_csv(w))?);
        out.discrepancies.insert("dtn_conjugation".into(), d);
        out.discrepancies.insert("max_neumann".into(), lb.max_abs());
        if let Some(tol) = t.tolerance {
            out.checks.push(Check::bound("dtn_conjugation", d, tol));
        }
    } else {
        let l = dtn_apply(&**p, domain, &grid, &f, &opts).context("D-to-N map")?;
        out.files.push(csv_from("dtn.csv", |w| l.write_csv(w))?);
        out.discrepancies.insert("max_neumann".into(), l.max_abs());
        if t.tolerance.is_some() {
            return Err(CliError::ConfigInvalid {
                path: "task.tolerance".into(),
                message: "needs a pair (`potential_b` or `gauge`)".into(),
            });
        }
    }
    out.results = results;
    Ok(out)
}

fn shielded(t: &ShieldedTask) -> Result<TaskOutput> {
    let sc = build_shielded_scenario(&t.scenario).context("shielded scenario")?;
    let fields = sc.fields();
    if t.scenario.kind == ShieldedKind::Magnetic && !t.cross_sections.is_empty() {
        return Err(CliError::ConfigInvalid {
            path: "task.cross_sections".into(),
            message: "cross sections are defined for the electric scenario only".into(),
        });
    }
    let mut out = TaskOutput::default();
    let rel = |a: f64, e: f64| ((a - e) / e).abs();
    let mut body = String::from("x10,flux,expected,rel_error,line_integral\n");
    let mut rows = Vec::new();
    let mut max_cross = 0.0f64;
    for &x10 in &t.cross_sections {
        let patch = sc.cross_section_patch(x10).context("cross section")?;
        let flux = surface_flux(&fields, &patch, &sc.quad).context("cross-section flux")?;
        let line = line_integral_em(&*sc.potential, &patch.boundary(0), &sc.quad).context("boundary integral")?;
        let expected = sc.expected_cross_section_flux(x10);
        let e = rel(flux, expected);
        max_cross = max_cross.max(e);
        let _ = writeln!(body, "{x10},{flux},{expected},{e},{line}");
        rows.push(json!({"x10": x10, "flux": flux, "expected": expected, "rel_error": e, "line_integral": line}));
    }
    let mut sbody = String::from("t,radius,flux,expected,rel_error\n");
    let mut srows = Vec::new();
    let mut max_spatial = 0.0f64;
    for s in &t.spatial {
        let flux = surface_flux(&fields, &sc.spatial_patch(s.t, s.radius), &sc.quad).context("spatial flux")?;
        let expected = sc.expected_spatial_flux(s.t, s.radius);
        let e = rel(flux, expected);
        max_spatial = max_spatial.max(e);
        let _ = writeln!(sbody, "{},{},{flux},{expected},{e}", s.t, s.radius);
        srows.push(json!({"t": s.t, "radius": s.radius, "flux": flux, "expected": expected, "rel_error": e}));
    }
    if !t.cross_sections.is_empty() {
        out.discrepancies
            .insert("max_cross_section_rel_error".into(), max_cross);
        out.files.push(csv("cross_sections.csv", body));
        if let Some(tol) = t.tolerance {
            out.checks
                .push(Check::bound("max_cross_section_rel_error", max_cross, tol));
        }
    }
    if !t.spatial.is_empty() {
        out.discrepancies.insert("max_spatial_rel_error".into(), max_spatial);
        out.files.push(csv("spatial_flux.csv", sbody));
        if let Some(tol) = t.tolerance {
            out.checks.push(Check::bound("max_spatial_rel_error", max_spatial, tol));
        }
    }
    if let Some(fs) = &t.field_samples {
        let r = t.scenario.outer_radius;
        let n = fs.n.max(2);
        let samples: Vec<Event> =
            fs.t.iter()
                .flat_map(|&s| {
                    (0..n * n).map(move |q| {
                        let (i, j) = (q % n, q / n);
                        let u = |k: usize| -r + 2.0 * r * k as f64 / (n - 1) as f64;
                        Event::new(vec2(u(i), u(j)), s)
                    })
                })
                .collect();
        out.files.push(csv_from("fields.csv", |w| {
            write_field_csv(&*sc.potential, &samples, w)
        })?);
    }
    let kind = match t.scenario.kind {
        ShieldedKind::Electric => "electric",
        ShieldedKind::Magnetic => "magnetic",
    };
    out.results = json!({ "kind": kind, "cross_sections": rows, "spatial": srows });
    Ok(out)
}
