//! One- and two-dimensional quadrature.
//!
//! The adaptive rule bisects panels, compares the 7-point Gauss–Legendre
//! value of a panel with the sum over its two halves, and accepts the
//! Richardson-corrected halves once the difference falls below the panel's
//! share of the absolute tolerance.

use std::cell::RefCell;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Adaptive quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Absolute tolerance for the whole interval.
    pub abs_tol: f64,
    /// Maximum bisection depth of a single panel.
    pub max_depth: u32,
    /// Minimum number of initial panels.
    pub min_panels: usize,
    /// Optional upper bound on the initial panel length. Needed when the
    /// integrand has features (mollified deltas) much narrower than the
    /// interval, which a single coarse panel could miss entirely.
    pub max_panel_len: Option<f64>,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_depth: 24,
            min_panels: 4,
            max_panel_len: None,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_panel_len(mut self, len: f64) -> Self {
        self.max_panel_len = Some(len);
        self
    }

    fn initial_panels(&self, len: f64) -> usize {
        let by_len = match self.max_panel_len {
            Some(h) if h > 0.0 => (len / h).ceil() as usize,
            _ => 1,
        };
        self.min_panels.max(by_len).max(1)
    }
}

/// Values that can be integrated.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss–Legendre order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged root
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        if n > 1 {
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn gl7() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(7))
}

#[inline]
fn gl_panel<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> T {
    let (x, w) = gl7();
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = T::zero();
    for (xi, wi) in x.iter().zip(w) {
        acc = acc + f(c + h * xi) * (wi * h);
    }
    acc
}

/// Fixed composite Gauss–Legendre rule with `panels` equal panels of
/// `order` points each.
pub fn composite_gauss<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, panels: usize, order: usize) -> T {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = T::zero();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let c = lo + 0.5 * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc = acc + f(c + 0.5 * h * xi) * (wi * 0.5 * h);
        }
    }
    acc
}

const RICHARDSON: f64 = 16383.0; // 2^14 - 1 for a 7-point Gauss rule

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    if b < a {
        return integrate(f, b, a, cfg).map(|v| v * -1.0);
    }
    let total = b - a;
    let n0 = cfg.initial_panels(total);
    let h0 = total / n0 as f64;
    let mut acc = T::zero();
    // explicit depth-first stack keeps the summation order deterministic
    let mut stack: Vec<(f64, f64, T, u32)> = Vec::with_capacity(64);
    for p in (0..n0).rev() {
        let lo = a + p as f64 * h0;
        let hi = if p + 1 == n0 { b } else { lo + h0 };
        stack.push((lo, hi, gl_panel(&f, lo, hi), 0));
    }
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = gl_panel(&f, lo, mid);
        let right = gl_panel(&f, mid, hi);
        let fine = left + right;
        let err = (fine - coarse).magnitude();
        let local_tol = cfg.abs_tol * (hi - lo) / total;
        if err <= local_tol || err <= 4.0 * f64::EPSILON * fine.magnitude() || hi - lo < 1e-14 * total {
            acc = acc + fine + (fine - coarse) * (1.0 / RICHARDSON);
            continue;
        }
        if depth + 1 > cfg.max_depth {
            return Err(Error::QuadratureNonconvergent {
                a: lo,
                b: hi,
                depth: cfg.max_depth,
            });
        }
        stack.push((mid, hi, right, depth + 1));
        stack.push((lo, mid, left, depth + 1));
    }
    Ok(acc)
}

/// Iterated adaptive integral over `{a <= x <= b, lo(x) <= y <= hi(x)}`.
pub fn integrate_2d<F, L, H>(f: F, a: f64, b: f64, lo: L, hi: H, cfg: &QuadConfig) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
    L: Fn(f64) -> f64,
    H: Fn(f64) -> f64,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    // keep inner noise well below the outer panel tolerance
    let inner = QuadConfig {
        abs_tol: 0.1 * cfg.abs_tol / (b - a).abs().max(f64::MIN_POSITIVE),
        ..*cfg
    };
    let total = integrate(
        |x| {
            if failure.borrow().is_some() {
                return 0.0;
            }
            match integrate(|y| f(x, y), lo(x), hi(x), &inner) {
                Ok(v) => v,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    0.0
                }
            }
        },
        a,
        b,
        cfg,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(total),
    }
}
