//! Spacetime domains with rigidly translating convex obstacles, and broken
//! rays traced inside a fixed time slice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{vec2, Error, Result, Vec2};

/// Default bound on |n·θ| below which a reflection counts as grazing.
pub const DEFAULT_TANGENCY_TOL: f64 = 1e-6;
/// Default reflection cap standing in for the non-trapping hypothesis.
pub const DEFAULT_MAX_REFLECTIONS: usize = 64;
/// Distance from a polygon vertex within which a hit is treated as a corner.
pub const CORNER_TOL: f64 = 1e-9;
/// Distance from a boundary within which an origin is degenerate.
pub const BOUNDARY_TOL: f64 = 1e-12;

const TIME_SAMPLES: usize = 1024;

/// The region Ω₀ containing everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterRegion {
    Disk { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl OuterRegion {
    pub fn disk(center: Vec2, radius: f64) -> Self {
        OuterRegion::Disk {
            center: [center.x, center.y],
            radius,
        }
    }

    pub fn rect(min: Vec2, max: Vec2) -> Self {
        OuterRegion::Rect {
            min: [min.x, min.y],
            max: [max.x, max.y],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            OuterRegion::Disk { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidDomain(format!("outer radius {radius} must be positive")))
            }
            OuterRegion::Rect { min, max } if !(max[0] > min[0] && max[1] > min[1]) => {
                Err(Error::InvalidDomain("outer rectangle has empty interior".into()))
            }
            _ => Ok(()),
        }
    }

    /// Distance to the boundary, positive inside.
    pub fn inner_distance(&self, p: Vec2) -> f64 {
        match self {
            OuterRegion::Disk { center, radius } => radius - (p - vec2(center[0], center[1])).norm(),
            OuterRegion::Rect { min, max } => {
                let dx = (p.x - min[0]).min(max[0] - p.x);
                let dy = (p.y - min[1]).min(max[1] - p.y);
                if dx >= 0.0 && dy >= 0.0 {
                    dx.min(dy)
                } else {
                    let ox = (min[0] - p.x).max(p.x - max[0]).max(0.0);
                    let oy = (min[1] - p.y).max(p.y - max[1]).max(0.0);
                    -(ox * ox + oy * oy).sqrt()
                }
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.inner_distance(p) > 0.0
    }

    /// Parameter interval `[s_in, s_out]` of the line `origin + s·dir`
    /// inside the region, if any.
    pub fn chord(&self, origin: Vec2, dir: Vec2) -> Option<(f64, f64)> {
        match self {
            OuterRegion::Disk { center, radius } => {
                let oc = origin - vec2(center[0], center[1]);
                let a = dir.norm_squared();
                let b = oc.dot(&dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc <= 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                Some(((-b - sq) / a, (-b + sq) / a))
            }
            OuterRegion::Rect { min, max } => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for k in 0..2 {
                    let (o, d) = (origin[k], dir[k]);
                    if d.abs() < 1e-300 {
                        if o <= min[k] || o >= max[k] {
                            return None;
                        }
                    } else {
                        let s1 = (min[k] - o) / d;
                        let s2 = (max[k] - o) / d;
                        lo = lo.max(s1.min(s2));
                        hi = hi.min(s1.max(s2));
                    }
                }
                (lo < hi).then_some((lo, hi))
            }
        }
    }

    /// Outward unit normal at a boundary point (nearest face for rectangles).
    pub fn outward_normal(&self, p: Vec2) -> Vec2 {
        match self {
            OuterRegion::Disk { center, .. } => (p - vec2(center[0], center[1])).normalize(),
            OuterRegion::Rect { min, max } => {
                let d = [p.x - min[0], max[0] - p.x, p.y - min[1], max[1] - p.y];
                let normals = [vec2(-1.0, 0.0), vec2(1.0, 0.0), vec2(0.0, -1.0), vec2(0.0, 1.0)];
                let mut best = 0;
                for k in 1..4 {
                    if d[k].abs() < d[best].abs() {
                        best = k;
                    }
                }
                normals[best]
            }
        }
    }

    /// A deterministic reference point on the boundary (the east-most
    /// point on the horizontal line through the centre).
    pub fn base_point(&self) -> Vec2 {
        match self {
            OuterRegion::Disk { center, radius } => vec2(center[0] + radius, center[1]),
            OuterRegion::Rect { min, max } => vec2(max[0], 0.5 * (min[1] + max[1])),
        }
    }
}

/// Convex obstacle shape in its reference position (t = 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// Counterclockwise, strictly convex.
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

/// Boundary intersection of a ray entering a convex shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeHit {
    pub distance: f64,
    pub point: Vec2,
    pub normal: Vec2,
    pub corner: bool,
}

impl Shape {
    pub fn disk(center: Vec2, radius: f64) -> Self {
        Shape::Disk {
            center: [center.x, center.y],
            radius,
        }
    }

    pub fn polygon(vertices: &[Vec2]) -> Self {
        Shape::Polygon {
            vertices: vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }

    fn vertices(&self) -> Vec<Vec2> {
        match self {
            Shape::Polygon { vertices } => vertices.iter().map(|v| vec2(v[0], v[1])).collect(),
            Shape::Disk { .. } => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Shape::Disk { radius, .. } => {
                if *radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidDomain(format!("disk radius {radius} must be positive")))
                }
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(Error::InvalidDomain("polygon needs at least 3 vertices".into()));
                }
                let v = self.vertices();
                for i in 0..n {
                    let e0 = v[(i + 1) % n] - v[i];
                    let e1 = v[(i + 2) % n] - v[(i + 1) % n];
                    if e0.perp(&e1) <= 1e-14 * e0.norm() * e1.norm() {
                        return Err(Error::InvalidDomain(
                            "polygon vertices must be counterclockwise and strictly convex".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn translated(&self, d: Vec2) -> Shape {
        match self {
            Shape::Disk { center, radius } => Shape::Disk {
                center: [center[0] + d.x, center[1] + d.y],
                radius: *radius,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|v| [v[0] + d.x, v[1] + d.y]).collect(),
            },
        }
    }

    /// A point that moves rigidly with the shape: the disk centre or the
    /// polygon's vertex centroid.
    pub fn reference_point(&self) -> Vec2 {
        match self {
            Shape::Disk { center, .. } => vec2(center[0], center[1]),
            Shape::Polygon { .. } => {
                let v = self.vertices();
                v.iter().fold(Vec2::zeros(), |acc, p| acc + p) / v.len() as f64
            }
        }
    }

    /// Smallest circle about [`Shape::reference_point`] containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => *radius,
            Shape::Polygon { .. } => {
                let c = self.reference_point();
                self.vertices().iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Euclidean signed distance to the boundary, negative inside.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Disk { center, radius } => (p - vec2(center[0], center[1])).norm() - radius,
            Shape::Polygon { .. } => {
                let v = self.vertices();
                let n = v.len();
                let mut inside = true;
                let mut dmin = f64::INFINITY;
                for i in 0..n {
                    let a = v[i];
                    let b = v[(i + 1) % n];
                    let e = b - a;
                    if e.perp(&(p - a)) < 0.0 {
                        inside = false;
                    }
                    let s = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                    dmin = dmin.min((a + e * s - p).norm());
                }
                if inside {
                    -dmin
                } else {
                    dmin
                }
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p) < 0.0
    }

    /// Distance between the segment [a, b] and the shape; non-positive when
    /// they intersect.
    pub fn segment_distance(&self, a: Vec2, b: Vec2) -> f64 {
        match self {
            Shape::Disk { center, radius } => point_segment_distance(vec2(center[0], center[1]), a, b) - radius,
            Shape::Polygon { .. } => {
                let v = self.vertices();
                let n = v.len();
                let mut d = self.signed_distance(a).min(self.signed_distance(b));
                if d <= 0.0 {
                    return d;
                }
                for i in 0..n {
                    let (p, q) = (v[i], v[(i + 1) % n]);
                    if segments_cross(a, b, p, q) {
                        return 0.0;
                    }
                    d = d.min(point_segment_distance(p, a, b));
                }
                d
            }
        }
    }

    /// Vertices of a convex polygon whose edges all lie at distance
    /// `offset` outside the shape (disks use a circumscribed `sides`-gon).
    pub fn inflated_vertices(&self, offset: f64, sides: usize) -> Vec<Vec2> {
        match self {
            Shape::Disk { center, radius } => {
                let r = (radius + offset) / (PI / sides as f64).cos();
                (0..sides)
                    .map(|k| {
                        let a = 2.0 * PI * (k as f64 + 0.5) / sides as f64;
                        vec2(center[0], center[1]) + vec2(a.cos(), a.sin()) * r
                    })
                    .collect()
            }
            Shape::Polygon { .. } => {
                let v = self.vertices();
                let n = v.len();
                (0..n)
                    .map(|i| {
                        let e0 = v[i] - v[(i + n - 1) % n];
                        let e1 = v[(i + 1) % n] - v[i];
                        let n0 = vec2(e0.y, -e0.x).normalize();
                        let n1 = vec2(e1.y, -e1.x).normalize();
                        v[i] + (n0 + n1) * (offset / (1.0 + n0.dot(&n1)))
                    })
                    .collect()
            }
        }
    }

    /// First entry point of the ray `origin + s·dir`, s > 0, into the shape.
    pub fn ray_entry(&self, origin: Vec2, dir: Vec2) -> Option<ShapeHit> {
        match self {
            Shape::Disk { center, radius } => {
                let c = vec2(center[0], center[1]);
                let oc = origin - c;
                let b = oc.dot(&dir);
                let cc = oc.norm_squared() - radius * radius;
                let disc = b * b - cc;
                if disc < 0.0 {
                    return None;
                }
                // stable root of the quadratic
                let s = if b < 0.0 {
                    -b - disc.sqrt()
                } else {
                    cc / (-b - disc.sqrt())
                };
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                let point = origin + dir * s;
                Some(ShapeHit {
                    distance: s,
                    point,
                    normal: (point - c) / *radius,
                    corner: false,
                })
            }
            Shape::Polygon { .. } => {
                let v = self.vertices();
                let n = v.len();
                let mut s_in = f64::NEG_INFINITY;
                let mut s_out = f64::INFINITY;
                let mut edge_in = usize::MAX;
                for i in 0..n {
                    let a = v[i];
                    let e = v[(i + 1) % n] - a;
                    let normal = vec2(e.y, -e.x) / e.norm();
                    let dn = dir.dot(&normal);
                    let dist = (origin - a).dot(&normal); // > 0 outside this edge
                    if dn.abs() < 1e-300 {
                        if dist >= 0.0 {
                            return None;
                        }
                        continue;
                    }
                    let s = -dist / dn;
                    if dn < 0.0 {
                        if s > s_in {
                            s_in = s;
                            edge_in = i;
                        }
                    } else if s < s_out {
                        s_out = s;
                    }
                }
                if edge_in == usize::MAX || s_in > s_out || !(s_in > 0.0) {
                    return None;
                }
                let a = v[edge_in];
                let b = v[(edge_in + 1) % n];
                let e = b - a;
                let point = origin + dir * s_in;
                let corner = (point - a).norm() <= CORNER_TOL || (point - b).norm() <= CORNER_TOL;
                Some(ShapeHit {
                    distance: s_in,
                    point,
                    normal: vec2(e.y, -e.x) / e.norm(),
                    corner,
                })
            }
        }
    }

    /// Positive when the shapes are disjoint (a lower bound on their gap for
    /// polygon pairs), non-positive when they overlap or touch.
    fn separation(&self, other: &Shape) -> f64 {
        match (self, other) {
            (Shape::Disk { center: c1, radius: r1 }, Shape::Disk { center: c2, radius: r2 }) => {
                (vec2(c1[0], c1[1]) - vec2(c2[0], c2[1])).norm() - r1 - r2
            }
            (Shape::Disk { center, radius }, poly @ Shape::Polygon { .. })
            | (poly @ Shape::Polygon { .. }, Shape::Disk { center, radius }) => {
                poly.signed_distance(vec2(center[0], center[1])) - radius
            }
            (a, b) => {
                // separating-axis gap over both polygons' edge normals
                let va = a.vertices();
                let vb = b.vertices();
                let mut best = f64::NEG_INFINITY;
                for (p, q) in [(&va, &vb), (&vb, &va)] {
                    let n = p.len();
                    for i in 0..n {
                        let e = p[(i + 1) % n] - p[i];
                        let normal = vec2(e.y, -e.x) / e.norm();
                        let gap = q.iter().map(|w| (w - p[i]).dot(&normal)).fold(f64::INFINITY, f64::min);
                        best = best.max(gap);
                    }
                }
                best
            }
        }
    }

    /// Gap between the shape and the outer boundary (positive when strictly
    /// inside).
    fn clearance_in(&self, outer: &OuterRegion) -> f64 {
        match self {
            Shape::Disk { center, radius } => outer.inner_distance(vec2(center[0], center[1])) - radius,
            Shape::Polygon { .. } => self
                .vertices()
                .iter()
                .map(|v| outer.inner_distance(*v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b - a;
    let len2 = e.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(&e) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + e * s - p).norm()
}

fn segments_cross(a: Vec2, b: Vec2, p: Vec2, q: Vec2) -> bool {
    let d1 = (b - a).perp(&(p - a));
    let d2 = (b - a).perp(&(q - a));
    let d3 = (q - p).perp(&(a - p));
    let d4 = (q - p).perp(&(b - p));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

/// Rigid translation path φ(t) with φ(0) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    #[default]
    Static,
    Linear {
        velocity: [f64; 2],
    },
    /// φ(t) = amplitude · sin(ω t)
    Sinusoidal {
        amplitude: [f64; 2],
        angular_frequency: f64,
    },
}

impl Motion {
    pub fn linear(velocity: Vec2) -> Self {
        Motion::Linear {
            velocity: [velocity.x, velocity.y],
        }
    }

    pub fn offset(&self, t: f64) -> Vec2 {
        match self {
            Motion::Static => Vec2::zeros(),
            Motion::Linear { velocity } => vec2(velocity[0], velocity[1]) * t,
            Motion::Sinusoidal {
                amplitude,
                angular_frequency,
            } => vec2(amplitude[0], amplitude[1]) * (angular_frequency * t).sin(),
        }
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        match self {
            Motion::Static => Vec2::zeros(),
            Motion::Linear { velocity } => vec2(velocity[0], velocity[1]),
            Motion::Sinusoidal {
                amplitude,
                angular_frequency,
            } => vec2(amplitude[0], amplitude[1]) * (angular_frequency * (angular_frequency * t).cos()),
        }
    }

    pub fn acceleration(&self, t: f64) -> Vec2 {
        match self {
            Motion::Static | Motion::Linear { .. } => Vec2::zeros(),
            Motion::Sinusoidal {
                amplitude,
                angular_frequency,
            } => {
                vec2(amplitude[0], amplitude[1])
                    * (-angular_frequency * angular_frequency * (angular_frequency * t).sin())
            }
        }
    }

    /// Upper bound of |φ̇| over all t.
    pub fn max_speed(&self) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::Linear { velocity } => vec2(velocity[0], velocity[1]).norm(),
            Motion::Sinusoidal {
                amplitude,
                angular_frequency,
            } => vec2(amplitude[0], amplitude[1]).norm() * angular_frequency.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub shape: Shape,
    #[serde(default)]
    pub motion: Motion,
}

impl Obstacle {
    pub fn new(shape: Shape, motion: Motion) -> Self {
        Self { shape, motion }
    }

    pub fn fixed(shape: Shape) -> Self {
        Self::new(shape, Motion::Static)
    }

    pub fn snapshot(&self, t: f64) -> Shape {
        self.shape.translated(self.motion.offset(t))
    }

    /// Position of the co-moving reference point at time `t`.
    pub fn center(&self, t: f64) -> Vec2 {
        self.shape.reference_point() + self.motion.offset(t)
    }
}

/// The spacetime domain D: outer region minus moving obstacles over [0, T].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    outer: OuterRegion,
    obstacles: Vec<Obstacle>,
    t_end: f64,
}

impl Domain {
    /// Validates containment, disjointness and convexity at a dense set of
    /// times, reporting the first offending time to 1e-9.
    pub fn new(outer: OuterRegion, obstacles: Vec<Obstacle>, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "time horizon T = {t_end} must be positive"
            )));
        }
        outer.validate()?;
        for o in &obstacles {
            o.shape.validate()?;
        }
        let domain = Self {
            outer,
            obstacles,
            t_end,
        };
        if let Some((t, what)) = domain.first_violation() {
            return Err(Error::InvalidDomain(format!("{what} at t = {t:.9}")));
        }
        Ok(domain)
    }

    pub fn outer(&self) -> &OuterRegion {
        &self.outer
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn snapshot(&self, t: f64) -> Vec<Shape> {
        self.obstacles.iter().map(|o| o.snapshot(t)).collect()
    }

    /// True if `p` lies in the open slice D_t.
    pub fn contains(&self, p: Vec2, t: f64) -> bool {
        self.outer.contains(p) && self.obstacles.iter().all(|o| !o.snapshot(t).contains(p))
    }

    fn violation_at(&self, t: f64) -> Option<String> {
        let snaps = self.snapshot(t);
        for (j, s) in snaps.iter().enumerate() {
            if s.clearance_in(&self.outer) <= 0.0 {
                return Some(format!("obstacle {j} leaves the outer region"));
            }
        }
        for i in 0..snaps.len() {
            for j in i + 1..snaps.len() {
                if snaps[i].separation(&snaps[j]) <= 0.0 {
                    return Some(format!("obstacles {i} and {j} intersect"));
                }
            }
        }
        None
    }

    fn first_violation(&self) -> Option<(f64, String)> {
        let mut prev = 0.0;
        if let Some(w) = self.violation_at(0.0) {
            return Some((0.0, w));
        }
        for k in 1..=TIME_SAMPLES {
            let t = self.t_end * k as f64 / TIME_SAMPLES as f64;
            if self.violation_at(t).is_some() {
                let (mut lo, mut hi) = (prev, t);
                while hi - lo > 1e-10 {
                    let mid = 0.5 * (lo + hi);
                    if self.violation_at(mid).is_some() {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let what = self.violation_at(hi).unwrap_or_default();
                return Some((hi, what));
            }
            prev = t;
        }
        None
    }
}

/// What a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HitTarget {
    Obstacle(usize),
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Vec2,
    /// Outward unit normal of the surface that was hit.
    pub normal: Vec2,
    pub target: HitTarget,
    pub distance: f64,
    pub corner: bool,
}

/// Specular reflection θ − 2(n·θ)n.
pub fn reflect_direction(theta: Vec2, n: Vec2, tangency_tol: f64) -> Result<Vec2> {
    let c = n.dot(&theta);
    if c.abs() <= tangency_tol {
        return Err(Error::TangentialHit {
            cos: c.abs(),
            tol: tangency_tol,
        });
    }
    Ok(theta - n * (2.0 * c))
}

fn check_unit(v: Vec2, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{what} must be a unit vector, |v| = {}",
            v.norm()
        )));
    }
    Ok(())
}

fn nearest_hit(origin: Vec2, dir: Vec2, domain: &Domain, t0: f64, skip: Option<usize>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (j, o) in domain.obstacles.iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        if let Some(h) = o.snapshot(t0).ray_entry(origin, dir) {
            if best.is_none_or(|b| h.distance < b.distance) {
                best = Some(Hit {
                    point: h.point,
                    normal: h.normal,
                    target: HitTarget::Obstacle(j),
                    distance: h.distance,
                    corner: h.corner,
                });
            }
        }
    }
    if let Some((_, s_out)) = domain.outer.chord(origin, dir) {
        if s_out > 0.0 && best.is_none_or(|b| s_out < b.distance) {
            let point = origin + dir * s_out;
            best = Some(Hit {
                point,
                normal: domain.outer.outward_normal(point),
                target: HitTarget::Outer,
                distance: s_out,
                corner: false,
            });
        }
    }
    best
}

/// Nearest boundary intersection of the ray from `origin` (inside D_{t0}).
pub fn first_hit(origin: Vec2, direction: Vec2, domain: &Domain, t0: f64) -> Result<Option<Hit>> {
    check_unit(direction, "direction")?;
    let d_outer = domain.outer.inner_distance(origin);
    if d_outer.abs() <= BOUNDARY_TOL {
        return Err(Error::DegenerateGeometry("origin lies on the outer boundary".into()));
    }
    if d_outer < 0.0 {
        return Err(Error::DegenerateGeometry("origin lies outside the outer region".into()));
    }
    for (j, o) in domain.obstacles.iter().enumerate() {
        let sd = o.snapshot(t0).signed_distance(origin);
        if sd.abs() <= BOUNDARY_TOL {
            return Err(Error::DegenerateGeometry(format!(
                "origin lies on the boundary of obstacle {j}"
            )));
        }
        if sd < 0.0 {
            return Err(Error::DegenerateGeometry(format!("origin lies inside obstacle {j}")));
        }
    }
    Ok(nearest_hit(origin, direction, domain, t0, None))
}

/// One straight piece of a broken ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leg {
    pub start: Vec2,
    pub direction: Vec2,
    pub length: f64,
    /// Arclength along the whole ray at which this leg starts.
    pub entry_arclength: f64,
}

impl Leg {
    pub fn end(&self) -> Vec2 {
        self.start + self.direction * self.length
    }

    pub fn point(&self, s: f64) -> Vec2 {
        self.start + self.direction * s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reflection {
    pub point: Vec2,
    pub normal: Vec2,
    pub obstacle: usize,
}

/// Piecewise-straight path in the slice t = t0 reflecting specularly off
/// obstacles, from the outer boundary back to the outer boundary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrokenRay {
    pub t0: f64,
    pub legs: Vec<Leg>,
    pub reflections: Vec<Reflection>,
}

impl BrokenRay {
    pub fn total_length(&self) -> f64 {
        self.legs.iter().map(|l| l.length).sum()
    }

    pub fn start(&self) -> Vec2 {
        self.legs[0].start
    }

    pub fn end(&self) -> Vec2 {
        self.legs.last().expect("broken ray has at least one leg").end()
    }

    /// Vertices: start, reflection points, end.
    pub fn vertices(&self) -> Vec<Vec2> {
        let mut v: Vec<Vec2> = self.legs.iter().map(|l| l.start).collect();
        v.push(self.end());
        v
    }

    /// The same path traversed backwards.
    pub fn reversed(&self) -> BrokenRay {
        let mut legs = Vec::with_capacity(self.legs.len());
        let mut s = 0.0;
        for l in self.legs.iter().rev() {
            legs.push(Leg {
                start: l.end(),
                direction: -l.direction,
                length: l.length,
                entry_arclength: s,
            });
            s += l.length;
        }
        BrokenRay {
            t0: self.t0,
            legs,
            reflections: self.reflections.iter().rev().copied().collect(),
        }
    }

    /// A single straight leg between two points (no obstacle checks).
    pub fn straight(start: Vec2, end: Vec2, t0: f64) -> BrokenRay {
        let d = end - start;
        BrokenRay {
            t0,
            legs: vec![Leg {
                start,
                direction: d / d.norm(),
                length: d.norm(),
                entry_arclength: 0.0,
            }],
            reflections: Vec::new(),
        }
    }
}

/// Options for [`trace_broken_ray_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    pub tangency_tol: f64,
    pub max_reflections: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            tangency_tol: DEFAULT_TANGENCY_TOL,
            max_reflections: DEFAULT_MAX_REFLECTIONS,
        }
    }
}

/// Trace a broken ray from `origin` in direction `omega` in the slice t0.
pub fn trace_broken_ray(
    origin: Vec2,
    omega: Vec2,
    t0: f64,
    domain: &Domain,
    max_reflections: usize,
) -> Result<BrokenRay> {
    trace_broken_ray_with(
        origin,
        omega,
        t0,
        domain,
        &TraceOptions {
            max_reflections,
            ..Default::default()
        },
    )
}

pub fn trace_broken_ray_with(
    origin: Vec2,
    omega: Vec2,
    t0: f64,
    domain: &Domain,
    opts: &TraceOptions,
) -> Result<BrokenRay> {
    check_unit(omega, "ray direction")?;
    let mut pos = if domain.outer.inner_distance(origin) > BOUNDARY_TOL {
        origin
    } else {
        let (s_in, s_out) = domain
            .outer
            .chord(origin, omega)
            .ok_or_else(|| Error::DegenerateGeometry("ray does not enter the domain".into()))?;
        if s_out <= 0.0 {
            return Err(Error::DegenerateGeometry("ray points away from the domain".into()));
        }
        origin + omega * s_in.max(0.0)
    };
    for (j, o) in domain.obstacles.iter().enumerate() {
        if o.snapshot(t0).signed_distance(pos) <= 0.0 {
            return Err(Error::DegenerateGeometry(format!("ray starts inside obstacle {j}")));
        }
    }
    let mut dir = omega;
    let mut legs = Vec::new();
    let mut reflections = Vec::new();
    let mut skip = None;
    let mut s = 0.0;
    loop {
        let hit = nearest_hit(pos, dir, domain, t0, skip)
            .ok_or_else(|| Error::DegenerateGeometry("ray escaped the outer region".into()))?;
        legs.push(Leg {
            start: pos,
            direction: dir,
            length: hit.distance,
            entry_arclength: s,
        });
        s += hit.distance;
        match hit.target {
            HitTarget::Outer => break,
            HitTarget::Obstacle(j) => {
                if hit.corner {
                    return Err(Error::TangentialHit {
                        cos: 0.0,
                        tol: opts.tangency_tol,
                    });
                }
                if reflections.len() >= opts.max_reflections {
                    return Err(Error::TrappedRay {
                        max_reflections: opts.max_reflections,
                    });
                }
                dir = reflect_direction(dir, hit.normal, opts.tangency_tol)?;
                reflections.push(Reflection {
                    point: hit.point,
                    normal: hit.normal,
                    obstacle: j,
                });
                pos = hit.point;
                skip = Some(j);
            }
        }
    }
    Ok(BrokenRay { t0, legs, reflections })
}

/// A point (x, t) of spacetime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub x: Vec2,
    pub t: f64,
}

impl Event {
    pub fn new(x: Vec2, t: f64) -> Self {
        Self { x, t }
    }
}

/// Piecewise-linear path through spacetime samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacetimePath {
    pub samples: Vec<Event>,
    pub closed: bool,
}

impl SpacetimePath {
    pub fn open(samples: Vec<Event>) -> Self {
        Self { samples, closed: false }
    }

    /// Closed path; the first sample is repeated at the end if needed.
    pub fn closed(mut samples: Vec<Event>) -> Self {
        if let (Some(first), Some(last)) = (samples.first().copied(), samples.last().copied()) {
            if (first.x - last.x).norm() > 1e-12 || (first.t - last.t).abs() > 1e-12 {
                samples.push(first);
            } else if let Some(l) = samples.last_mut() {
                *l = first;
            }
        }
        Self { samples, closed: true }
    }

    /// Closed polygon in the slice t.
    pub fn spatial_polygon(vertices: &[Vec2], t: f64) -> Self {
        Self::closed(vertices.iter().map(|&x| Event::new(x, t)).collect())
    }

    /// Counterclockwise circle approximated by a regular n-gon whose edges
    /// stay outside radius `radius` (vertices at radius / cos(π/n)).
    pub fn circle(center: Vec2, radius: f64, t: f64, n: usize) -> Self {
        let r = radius / (PI / n as f64).cos();
        let verts: Vec<Vec2> = (0..n)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                center + vec2(a.cos(), a.sin()) * r
            })
            .collect();
        Self::spatial_polygon(&verts, t)
    }

    pub fn segments(&self) -> impl Iterator<Item = (Event, Event)> + '_ {
        self.samples.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn reversed(&self) -> Self {
        Self {
            samples: self.samples.iter().rev().copied().collect(),
            closed: self.closed,
        }
    }

    /// Append another path starting where this one ends.
    pub fn then(mut self, other: &SpacetimePath) -> Self {
        let skip = usize::from(!self.samples.is_empty());
        self.samples.extend(other.samples.iter().skip(skip).copied());
        self.closed = false;
        self
    }

    /// Translate by a spatial vector and a time shift.
    pub fn translated(&self, dx: Vec2, dt: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|e| Event::new(e.x + dx, e.t + dt)).collect(),
            closed: self.closed,
        }
    }
}

/// One closed, counterclockwise loop per obstacle at time t0, each at
/// distance at least `clearance` from its obstacle.
pub fn generator_loops(domain: &Domain, t0: f64, clearance: f64) -> Result<Vec<SpacetimePath>> {
    generator_loops_with(domain, t0, clearance, 256)
}

pub fn generator_loops_with(domain: &Domain, t0: f64, clearance: f64, vertices: usize) -> Result<Vec<SpacetimePath>> {
    if !(clearance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "clearance {clearance} must be positive"
        )));
    }
    let snaps = domain.snapshot(t0);
    let mut loops = Vec::with_capacity(snaps.len());
    let cos = (PI / vertices as f64).cos();
    for (j, s) in snaps.iter().enumerate() {
        let c = s.reference_point();
        let r_in = s.bounding_radius() + clearance;
        let r_out = r_in / cos;
        if domain.outer.inner_distance(c) - r_out < clearance {
            return Err(Error::ClearanceTooLarge {
                obstacle: j,
                clearance,
                reason: "loop reaches the outer boundary".into(),
            });
        }
        for (k, other) in snaps.iter().enumerate() {
            if k == j {
                continue;
            }
            let gap = (other.reference_point() - c).norm() - r_out - other.bounding_radius();
            if gap < clearance {
                return Err(Error::ClearanceTooLarge {
                    obstacle: j,
                    clearance,
                    reason: format!("loop comes within {gap:.3e} of obstacle {k}"),
                });
            }
        }
        loops.push(SpacetimePath::circle(c, r_in, t0, vertices));
    }
    Ok(loops)
}
