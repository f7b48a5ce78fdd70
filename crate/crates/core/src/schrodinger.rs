//! Crank–Nicolson solver for `i ∂u/∂t = Σ_j (−i∂_j − A_j)² u + V u` on a
//! rectangular grid with Dirichlet data on the outer edge and zero data on
//! (possibly moving) obstacle masks, plus the gauge-invariant boundary
//! triple and Dirichlet-to-Neumann traces.
//!
//! The magnetic Laplacian uses Peierls phases: the link from node i to its
//! neighbour j carries `exp(−i h A(midpoint)·e_ij)`, which keeps the
//! discrete Hamiltonian Hermitian for real V and makes it covariant under
//! lattice gauge transformations up to O(h²).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fields::{smooth_step, EmPotential};
use crate::gauge::GaugeElement;
use crate::geometry::{Domain, OuterRegion};
use crate::parallel::{self, Exec};
use crate::{vec2, Error, Result, Vec2, C64};

/// Fraction of the run over which boundary data are ramped up from zero.
pub const RAMP_FRACTION: f64 = 0.05;

/// Rectangular node grid `nx × ny` (edges included) and time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub nt: usize,
}

impl GridSpec {
    pub fn new(min: Vec2, max: Vec2, nx: usize, ny: usize, dt: f64, nt: usize) -> Result<Self> {
        let g = Self {
            min: [min.x, min.y],
            max: [max.x, max.y],
            nx,
            ny,
            dt,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid on the rectangle with n nodes per side and nt steps up
    /// to `t_end`.
    pub fn square(min: Vec2, max: Vec2, n: usize, t_end: f64, nt: usize) -> Result<Self> {
        Self::new(min, max, n, n, t_end / nt as f64, nt)
    }

    /// Hard errors; advisory warnings are returned by [`GridSpec::warnings`].
    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidGrid(format!(
                "need at least 16 nodes per side, got {}×{}",
                self.nx, self.ny
            )));
        }
        if !(self.dt > 0.0) || self.nt == 0 {
            return Err(Error::InvalidGrid(format!(
                "dt = {} and nt = {} must be positive",
                self.dt, self.nt
            )));
        }
        if !(self.max[0] > self.min[0] && self.max[1] > self.min[1]) {
            return Err(Error::InvalidGrid("grid rectangle has empty interior".into()));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let (hx, hy) = (self.hx(), self.hy());
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            w.push(format!("unequal spatial steps hx = {hx:.6e}, hy = {hy:.6e}"));
        }
        let h2 = hx.min(hy).powi(2);
        if self.dt > h2 {
            w.push(format!("CFL advisory: dt = {:.3e} exceeds h² = {h2:.3e}", self.dt));
        }
        w
    }

    pub fn hx(&self) -> f64 {
        (self.max[0] - self.min[0]) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.max[1] - self.min[1]) / (self.ny - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        vec2(self.min[0] + i as f64 * self.hx(), self.min[1] + j as f64 * self.hy())
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nt)
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(Vec2) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| f(self.node(i, j)))
            .collect()
    }

    /// Discrete L² norm `sqrt(hx hy Σ |u|²)`.
    pub fn l2_norm(&self, u: &[C64]) -> f64 {
        (self.hx() * self.hy() * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Edge nodes without the four corners, counterclockwise from the
    /// lower-left corner.
    pub fn boundary_nodes(&self) -> Vec<BoundaryNode> {
        let (hx, hy) = (self.hx(), self.hy());
        let (w, h) = (self.max[0] - self.min[0], self.max[1] - self.min[1]);
        let mut out = Vec::with_capacity(2 * (self.nx + self.ny));
        let mut push = |i: usize, j: usize, arc: f64, n: Vec2| {
            out.push(BoundaryNode {
                i,
                j,
                arc,
                x: self.node(i, j),
                normal: n,
            })
        };
        for i in 1..self.nx - 1 {
            push(i, 0, i as f64 * hx, vec2(0.0, -1.0));
        }
        for j in 1..self.ny - 1 {
            push(self.nx - 1, j, w + j as f64 * hy, vec2(1.0, 0.0));
        }
        for i in (1..self.nx - 1).rev() {
            push(i, self.ny - 1, w + h + (self.nx - 1 - i) as f64 * hx, vec2(0.0, 1.0));
        }
        for j in (1..self.ny - 1).rev() {
            push(0, j, 2.0 * w + h + (self.ny - 1 - j) as f64 * hy, vec2(-1.0, 0.0));
        }
        out
    }

    fn inward(&self, b: &BoundaryNode, layer: usize) -> usize {
        let (i, j) = (
            b.i as isize - b.normal.x as isize * layer as isize,
            b.j as isize - b.normal.y as isize * layer as isize,
        );
        self.index(i as usize, j as usize)
    }

    fn normal_step(&self, b: &BoundaryNode) -> f64 {
        if b.normal.x != 0.0 {
            self.hx()
        } else {
            self.hy()
        }
    }
}

/// A non-corner node of the outer grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryNode {
    pub i: usize,
    pub j: usize,
    /// Perimeter arclength from the lower-left corner.
    pub arc: f64,
    pub x: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    /// Relative residual of each inner linear solve.
    pub tol: f64,
    pub max_iter: usize,
    /// Store a full snapshot every `store_every` steps (0: first and last only).
    pub store_every: usize,
    /// Multiply the Dirichlet data by a smooth ramp over the first
    /// [`RAMP_FRACTION`] of the run.
    pub ramp: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 2000,
            store_every: 0,
            ramp: true,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub u: Vec<C64>,
    pub mask: Vec<bool>,
}

/// Solution trajectory of the IBVP. Full grids are kept only at stored
/// steps; the three outermost node layers along the edge, node norms and
/// masked-node counts are kept for every step.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec,
    pub snapshots: Vec<Snapshot>,
    pub boundary: Vec<BoundaryNode>,
    /// `traces[k][l][b]`: u at step k, l nodes inward from boundary node b.
    pub traces: Vec<[Vec<C64>; 3]>,
    pub norms: Vec<f64>,
    pub masked_counts: Vec<usize>,
    pub iterations: Vec<usize>,
    /// Whether the grid edge coincides with a rectangular outer boundary.
    pub aligned: bool,
    pub warnings: Vec<String>,
}

impl WaveField {
    pub fn final_state(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has a final snapshot")
    }

    pub fn snapshot(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.grid.nt).map(|k| self.grid.time(k)).collect()
    }
}

/// Nodes inside an obstacle at time t, or outside a non-rectangular outer
/// region.
pub fn node_mask(grid: &GridSpec, domain: &Domain, t: f64) -> Vec<bool> {
    let mut mask = vec![false; grid.len()];
    if let OuterRegion::Disk { .. } = domain.outer() {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if domain.outer().inner_distance(grid.node(i, j)) < 0.0 {
                    mask[grid.index(i, j)] = true;
                }
            }
        }
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    for s in domain.snapshot(t) {
        let c = s.reference_point();
        let r = s.bounding_radius();
        let lo_i = (((c.x - r - grid.min[0]) / hx).floor().max(0.0)) as usize;
        let hi_i = (((c.x + r - grid.min[0]) / hx).ceil().max(0.0) as usize).min(grid.nx - 1);
        let lo_j = (((c.y - r - grid.min[1]) / hy).floor().max(0.0)) as usize;
        let hi_j = (((c.y + r - grid.min[1]) / hy).ceil().max(0.0) as usize).min(grid.ny - 1);
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                if s.signed_distance(grid.node(i, j)) <= 0.0 {
                    mask[grid.index(i, j)] = true;
                }
            }
        }
    }
    mask
}

/// Discrete Hamiltonian at one time: diagonal `2/hx² + 2/hy² + V` and the
/// Peierls link phases to the east and north neighbours.
struct Hamiltonian {
    nx: usize,
    ihx2: f64,
    ihy2: f64,
    diag: Vec<f64>,
    east: Vec<C64>,
    north: Vec<C64>,
}

impl Hamiltonian {
    fn build<P: EmPotential + ?Sized>(p: &P, grid: &GridSpec, t: f64, exec: Exec) -> Self {
        let (hx, hy) = (grid.hx(), grid.hy());
        let n = grid.len();
        let base = 2.0 / (hx * hx) + 2.0 / (hy * hy);
        let mut diag = vec![0.0; n];
        let mut east = vec![C64::new(1.0, 0.0); n];
        let mut north = vec![C64::new(1.0, 0.0); n];
        parallel::for_each_chunk_mut(exec, &mut diag, grid.nx, |j, row| {
            for (i, d) in row.iter_mut().enumerate() {
                *d = base + p.v(grid.node(i, j), t);
            }
        });
        parallel::for_each_chunk_mut(exec, &mut east, grid.nx, |j, row| {
            for (i, e) in row.iter_mut().enumerate().take(grid.nx - 1) {
                let x = grid.node(i, j) + vec2(0.5 * hx, 0.0);
                *e = C64::from_polar(1.0, -hx * p.a(x, t).x);
            }
        });
        parallel::for_each_chunk_mut(exec, &mut north, grid.nx, |j, row| {
            if j + 1 < grid.ny {
                for (i, e) in row.iter_mut().enumerate() {
                    let x = grid.node(i, j) + vec2(0.0, 0.5 * hy);
                    *e = C64::from_polar(1.0, -hy * p.a(x, t).y);
                }
            }
        });
        Self {
            nx: grid.nx,
            ihx2: 1.0 / (hx * hx),
            ihy2: 1.0 / (hy * hy),
            diag,
            east,
            north,
        }
    }

    /// (Hv)_k for an interior node k.
    #[inline]
    fn row(&self, v: &[C64], k: usize) -> C64 {
        let n = self.nx;
        v[k] * self.diag[k]
            - (self.east[k] * v[k + 1] + self.east[k - 1].conj() * v[k - 1]) * self.ihx2
            - (self.north[k] * v[k + n] + self.north[k - n].conj() * v[k - n]) * self.ihy2
    }

    /// out_k = x_k + coef·(H(x + extra))_k on active nodes, 0 elsewhere.
    fn affine(&self, exec: Exec, x: &[C64], extra: Option<&[C64]>, coef: C64, active: &[bool], out: &mut [C64]) {
        let summed: Option<Vec<C64>> = extra.map(|e| x.iter().zip(e).map(|(a, b)| a + b).collect());
        let v = summed.as_deref().unwrap_or(x);
        parallel::for_each_chunk_mut(exec, out, self.nx, |j, row| {
            let off = j * self.nx;
            for (i, o) in row.iter_mut().enumerate() {
                let k = off + i;
                *o = if active[k] {
                    x[k] + coef * self.row(v, k)
                } else {
                    C64::new(0.0, 0.0)
                };
            }
        });
    }
}

const CHUNK: usize = 4096;

fn cdot(exec: Exec, a: &[C64], b: &[C64]) -> C64 {
    let starts: Vec<usize> = (0..a.len()).step_by(CHUNK).collect();
    parallel::map(exec, &starts, |&s| {
        let e = (s + CHUNK).min(a.len());
        a[s..e]
            .iter()
            .zip(&b[s..e])
            .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
    })
    .into_iter()
    .fold(C64::new(0.0, 0.0), |acc, z| acc + z)
}

fn norm(exec: Exec, a: &[C64]) -> f64 {
    parallel::chunked_sum(exec, a, CHUNK, |c| c.iter().map(|z| z.norm_sqr()).sum()).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for `x + iτHx = b` on the active nodes.
#[allow(clippy::too_many_arguments)]
fn bicgstab(
    h: &Hamiltonian,
    tau: f64,
    active: &[bool],
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
    exec: Exec,
    step: usize,
) -> Result<usize> {
    let coef = C64::new(0.0, tau);
    let bnorm = norm(exec, b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        return Ok(0);
    }
    // work with b/‖b‖ so tiny data (early ramp) cannot underflow the dots
    let b: Vec<C64> = b.iter().map(|z| z / bnorm).collect();
    x.iter_mut().for_each(|z| *z /= bnorm);
    let result = bicgstab_unit(h, coef, active, &b, x, tol, max_iter, exec, step);
    x.iter_mut().for_each(|z| *z *= bnorm);
    result
}

#[allow(clippy::too_many_arguments)]
fn bicgstab_unit(
    h: &Hamiltonian,
    coef: C64,
    active: &[bool],
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
    exec: Exec,
    step: usize,
) -> Result<usize> {
    let n = b.len();
    let bnorm = 1.0;
    let inv_diag: Vec<C64> = h.diag.iter().map(|&d| (C64::new(1.0, 0.0) + coef * d).inv()).collect();
    let zero = C64::new(0.0, 0.0);
    let mut ax = vec![zero; n];
    h.affine(exec, x, None, coef, active, &mut ax);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut y = vec![zero; n];
    let mut z = vec![zero; n];
    let mut t = vec![zero; n];
    let mut res = norm(exec, &r) / bnorm;
    if res <= tol {
        return Ok(0);
    }
    for it in 1..=max_iter {
        let rho_new = cdot(exec, &r_hat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = p[k] * inv_diag[k];
        }
        h.affine(exec, &y, None, coef, active, &mut v);
        let rv = cdot(exec, &r_hat, &v);
        if rv.norm() == 0.0 {
            break;
        }
        alpha = rho_new / rv;
        for k in 0..n {
            r[k] -= alpha * v[k];
        }
        if norm(exec, &r) / bnorm <= tol {
            for k in 0..n {
                x[k] += alpha * y[k];
            }
            return Ok(it);
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        h.affine(exec, &z, None, coef, active, &mut t);
        let tt = cdot(exec, &t, &t);
        omega = if tt.norm() == 0.0 {
            zero
        } else {
            cdot(exec, &t, &r) / tt
        };
        for k in 0..n {
            x[k] += alpha * y[k] + omega * z[k];
            r[k] -= omega * t[k];
        }
        res = norm(exec, &r) / bnorm;
        if res <= tol {
            return Ok(it);
        }
        if omega.norm() == 0.0 {
            break;
        }
        rho = rho_new;
    }
    Err(Error::LinearSolveFailure { step, residual: res })
}

/// Smooth ramp applied to the Dirichlet data.
pub fn boundary_ramp(t: f64, t_end: f64) -> f64 {
    smooth_step(t / (RAMP_FRACTION * t_end))
}

/// Solves the IBVP with Dirichlet data `f(x, t)` on the grid edge and
/// initial data `u0` (zero when `None`).
pub fn solve_ibvp<P, F>(
    p: &P,
    domain: &Domain,
    grid: &GridSpec,
    f: F,
    u0: Option<&[C64]>,
    opts: &SolveOptions,
) -> Result<WaveField>
where
    P: EmPotential + ?Sized,
    F: Fn(Vec2, f64) -> C64 + Sync,
{
    grid.validate()?;
    let aligned = check_alignment(grid, domain)?;
    let n = grid.len();
    let exec = opts.exec;
    let t_end = grid.t_end();
    let edge: Vec<usize> = (0..grid.ny)
        .flat_map(|j| (0..grid.nx).map(move |i| (i, j)))
        .filter(|&(i, j)| grid.is_edge(i, j))
        .map(|(i, j)| grid.index(i, j))
        .collect();
    let edge_points: Vec<Vec2> = edge.iter().map(|&k| grid.node(k % grid.nx, k / grid.nx)).collect();
    let data = |t: f64| -> Vec<C64> {
        let s = if opts.ramp { boundary_ramp(t, t_end) } else { 1.0 };
        edge_points.iter().map(|&x| f(x, t) * s).collect()
    };

    let mut mask = node_mask(grid, domain, 0.0);
    let mut u = match u0 {
        Some(u0) => {
            if u0.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "initial data has {} values for {n} nodes",
                    u0.len()
                )));
            }
            u0.to_vec()
        }
        None => vec![C64::new(0.0, 0.0); n],
    };
    let scale = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(k) = (0..n).find(|&k| mask[k] && u[k].norm() > 1e-12 * scale.max(1.0)) {
        return Err(Error::PreconditionViolated(format!(
            "initial data nonzero on masked node {k}"
        )));
    }
    let f0 = data(0.0);
    if let Some(e) = edge
        .iter()
        .zip(&f0)
        .find(|(&k, fk)| (u[k] - **fk).norm() > 1e-10 * scale.max(1.0))
    {
        return Err(Error::PreconditionViolated(format!(
            "initial data incompatible with boundary data at node {}",
            e.0
        )));
    }
    for (&k, fk) in edge.iter().zip(&f0) {
        u[k] = if mask[k] { C64::new(0.0, 0.0) } else { *fk };
    }

    let boundary = grid.boundary_nodes();
    let layers =
        |u: &[C64]| -> [Vec<C64>; 3] { [0, 1, 2].map(|l| boundary.iter().map(|b| u[grid.inward(b, l)]).collect()) };
    let mut field = WaveField {
        grid: *grid,
        snapshots: vec![Snapshot {
            step: 0,
            t: 0.0,
            u: u.clone(),
            mask: mask.clone(),
        }],
        boundary: boundary.clone(),
        traces: vec![layers(&u)],
        norms: vec![grid.l2_norm(&u)],
        masked_counts: vec![mask.iter().filter(|&&m| m).count()],
        iterations: Vec::with_capacity(grid.nt),
        aligned,
        warnings: grid.warnings(),
    };

    let tau = 0.5 * grid.dt;
    let mut fb = vec![C64::new(0.0, 0.0); n];
    let mut rhs = vec![C64::new(0.0, 0.0); n];
    for k in 0..grid.nt {
        let t_half = grid.time(k) + tau;
        let t_next = grid.time(k + 1);
        let h = Hamiltonian::build(p, grid, t_half, exec);
        let next_mask = node_mask(grid, domain, t_next);
        let active: Vec<bool> = (0..n)
            .map(|q| !next_mask[q] && !grid.is_edge(q % grid.nx, q / grid.nx))
            .collect();
        let f_next = data(t_next);
        fb.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (&q, fq) in edge.iter().zip(&f_next) {
            if !next_mask[q] {
                fb[q] = *fq;
            }
        }
        // boundary values of u^k sit on the edge; fb carries f^{k+1}
        let mut cur_edge = vec![C64::new(0.0, 0.0); n];
        for &q in &edge {
            cur_edge[q] = u[q];
        }
        let mut interior = u.clone();
        for &q in &edge {
            interior[q] = C64::new(0.0, 0.0);
        }
        let both: Vec<C64> = cur_edge.iter().zip(&fb).map(|(a, b)| a + b).collect();
        h.affine(exec, &interior, Some(&both), C64::new(0.0, -tau), &active, &mut rhs);
        let mut x: Vec<C64> = (0..n)
            .map(|q| if active[q] { u[q] } else { C64::new(0.0, 0.0) })
            .collect();
        let its = bicgstab(&h, tau, &active, &rhs, &mut x, opts.tol, opts.max_iter, exec, k + 1)?;
        for q in 0..n {
            u[q] = if active[q] { x[q] } else { fb[q] };
        }
        mask = next_mask;
        field.iterations.push(its);
        field.traces.push(layers(&u));
        field.norms.push(grid.l2_norm(&u));
        field.masked_counts.push(mask.iter().filter(|&&m| m).count());
        let last = k + 1 == grid.nt;
        if last || (opts.store_every > 0 && (k + 1) % opts.store_every == 0) {
            field.snapshots.push(Snapshot {
                step: k + 1,
                t: t_next,
                u: u.clone(),
                mask: mask.clone(),
            });
        }
    }
    Ok(field)
}

fn check_alignment(grid: &GridSpec, domain: &Domain) -> Result<bool> {
    let tol = 1e-9 * (grid.max[0] - grid.min[0]).max(grid.max[1] - grid.min[1]);
    match domain.outer() {
        OuterRegion::Rect { min, max } => {
            let same = (0..2).all(|d| (min[d] - grid.min[d]).abs() <= tol && (max[d] - grid.max[d]).abs() <= tol);
            if !same {
                return Err(Error::InvalidGrid(
                    "grid rectangle must coincide with the rectangular outer region".into(),
                ));
            }
            Ok(true)
        }
        OuterRegion::Disk { center, radius } => {
            let fits = grid.min[0] <= center[0] - radius
                && grid.min[1] <= center[1] - radius
                && grid.max[0] >= center[0] + radius
                && grid.max[1] >= center[1] + radius;
            if !fits {
                return Err(Error::InvalidGrid("grid rectangle must contain the outer disk".into()));
            }
            Ok(false)
        }
    }
}

fn require_aligned(w: &WaveField) -> Result<()> {
    if w.aligned {
        Ok(())
    } else {
        Err(Error::InvalidGrid(
            "boundary traces need a rectangular outer region aligned with the grid".into(),
        ))
    }
}

/// `(f1, f2, f3) = (|u|², ∂ν|u|², S·ν)` with `S = Im[(∇u − iAu)ū]`, per
/// step and boundary node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryData {
    pub nodes: Vec<BoundaryNode>,
    pub times: Vec<f64>,
    pub f1: Vec<Vec<f64>>,
    pub f2: Vec<Vec<f64>>,
    pub f3: Vec<Vec<f64>>,
}

impl BoundaryData {
    /// Sup-norm differences of the three components.
    pub fn max_difference(&self, other: &BoundaryData) -> [f64; 3] {
        let sup = |a: &[Vec<f64>], b: &[Vec<f64>]| {
            a.iter()
                .zip(b)
                .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
                .fold(0.0, f64::max)
        };
        [
            sup(&self.f1, &other.f1),
            sup(&self.f2, &other.f2),
            sup(&self.f3, &other.f3),
        ]
    }

    /// CSV with columns node,arc,t,f1,f2,f3.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,arc,t,f1,f2,f3")?;
        for (k, t) in self.times.iter().enumerate() {
            for (b, node) in self.nodes.iter().enumerate() {
                writeln!(
                    w,
                    "{b},{},{t},{},{},{}",
                    node.arc, self.f1[k][b], self.f2[k][b], self.f3[k][b]
                )?;
            }
        }
        Ok(())
    }
}

fn one_sided<T>(g0: T, g1: T, g2: T, h: f64) -> T
where
    T: std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T> + std::ops::Add<Output = T>,
{
    (g0 * 3.0 - g1 * 4.0 + g2) * (0.5 / h)
}

/// Gauge-invariant boundary triple of a computed trajectory.
pub fn boundary_data<P: EmPotential + ?Sized>(w: &WaveField, p: &P) -> Result<BoundaryData> {
    require_aligned(w)?;
    let times = w.times();
    let mut out = BoundaryData {
        nodes: w.boundary.clone(),
        times: times.clone(),
        f1: Vec::with_capacity(times.len()),
        f2: Vec::with_capacity(times.len()),
        f3: Vec::with_capacity(times.len()),
    };
    for (k, tr) in w.traces.iter().enumerate() {
        let mut f1 = Vec::with_capacity(w.boundary.len());
        let mut f2 = Vec::with_capacity(w.boundary.len());
        let mut f3 = Vec::with_capacity(w.boundary.len());
        for (b, node) in w.boundary.iter().enumerate() {
            let h = w.grid.normal_step(node);
            let (u0, u1, u2) = (tr[0][b], tr[1][b], tr[2][b]);
            f1.push(u0.norm_sqr());
            f2.push(one_sided(u0.norm_sqr(), u1.norm_sqr(), u2.norm_sqr(), h));
            let dn = one_sided(u0, u1, u2, h);
            let an = p.a(node.x, times[k]).dot(&node.normal);
            f3.push((dn * u0.conj()).im - an * u0.norm_sqr());
        }
        out.f1.push(f1);
        out.f2.push(f2);
        out.f3.push(f3);
    }
    Ok(out)
}

/// Magnetic Neumann data `∂u/∂ν − i(A·ν)u` per step and boundary node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannData {
    pub nodes: Vec<BoundaryNode>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<C64>>,
}

impl NeumannData {
    pub fn max_difference(&self, other: &NeumannData) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// CSV with columns node,arc,t,re,im.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,arc,t,re,im")?;
        for (k, t) in self.times.iter().enumerate() {
            for (b, node) in self.nodes.iter().enumerate() {
                let z = self.values[k][b];
                writeln!(w, "{b},{},{t},{},{}", node.arc, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// Neumann trace of a computed trajectory.
pub fn neumann_trace<P: EmPotential + ?Sized>(w: &WaveField, p: &P) -> Result<NeumannData> {
    require_aligned(w)?;
    let times = w.times();
    let values = w
        .traces
        .iter()
        .enumerate()
        .map(|(k, tr)| {
            w.boundary
                .iter()
                .enumerate()
                .map(|(b, node)| {
                    let dn = one_sided(tr[0][b], tr[1][b], tr[2][b], w.grid.normal_step(node));
                    let an = p.a(node.x, times[k]).dot(&node.normal);
                    dn - C64::i() * an * tr[0][b]
                })
                .collect()
        })
        .collect();
    Ok(NeumannData {
        nodes: w.boundary.clone(),
        times,
        values,
    })
}

/// Λf: solve with zero initial data, then take the Neumann trace.
pub fn dtn_apply<P, F>(p: &P, domain: &Domain, grid: &GridSpec, f: F, opts: &SolveOptions) -> Result<NeumannData>
where
    P: EmPotential + ?Sized,
    F: Fn(Vec2, f64) -> C64 + Sync,
{
    let w = solve_ibvp(p, domain, grid, f, None, opts)?;
    neumann_trace(&w, p)
}

/// `c0⁻¹ Λ(c0 f)` for the boundary trace c0 of a gauge element.
pub fn dtn_conjugate<P, F>(
    p: &P,
    domain: &Domain,
    grid: &GridSpec,
    f: F,
    c0: &GaugeElement,
    opts: &SolveOptions,
) -> Result<NeumannData>
where
    P: EmPotential + ?Sized,
    F: Fn(Vec2, f64) -> C64 + Sync,
{
    for node in grid.boundary_nodes() {
        for k in 0..=grid.nt {
            let c = c0.value(node.x, grid.time(k));
            if !(c.norm() >= 1e-9) {
                return Err(Error::SingularGauge(format!(
                    "|c0| = {:.3e} at boundary point ({}, {})",
                    c.norm(),
                    node.x.x,
                    node.x.y
                )));
            }
        }
    }
    let mut out = dtn_apply(p, domain, grid, |x, t| c0.value(x, t) * f(x, t), opts)?;
    for (k, row) in out.values.iter_mut().enumerate() {
        let t = out.times[k];
        for (z, node) in row.iter_mut().zip(&out.nodes) {
            *z /= c0.value(node.x, t);
        }
    }
    Ok(out)
}

/// Dirichlet data families for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirichletSpec {
    Zero,
    /// amplitude · (1 + gradient·x) · exp(i(k·x − ω t))
    PlaneWave {
        amplitude: f64,
        k: [f64; 2],
        omega: f64,
        #[serde(default)]
        gradient: [f64; 2],
    },
    /// amplitude · exp(−|x − center|²/(2σ²)) · exp(−iωt)
    Gaussian {
        amplitude: f64,
        center: [f64; 2],
        sigma: f64,
        omega: f64,
    },
}

impl DirichletSpec {
    pub fn eval(&self, x: Vec2, t: f64) -> C64 {
        match self {
            DirichletSpec::Zero => C64::new(0.0, 0.0),
            DirichletSpec::PlaneWave {
                amplitude,
                k,
                omega,
                gradient,
            } => {
                let m = 1.0 + gradient[0] * x.x + gradient[1] * x.y;
                C64::from_polar(amplitude * m, k[0] * x.x + k[1] * x.y - omega * t)
            }
            DirichletSpec::Gaussian {
                amplitude,
                center,
                sigma,
                omega,
            } => {
                let r2 = (x - vec2(center[0], center[1])).norm_squared();
                C64::from_polar(amplitude * (-r2 / (2.0 * sigma * sigma)).exp(), -omega * t)
            }
        }
    }
}
