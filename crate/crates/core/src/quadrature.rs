//! Gauss–Legendre rules and boundary-segment integration.

use std::ops::{Add, Mul};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{BoundaryCurve, BoundaryPoint, Side};

/// Number of nodes used per boundary element.
pub const ELEMENT_ORDER: usize = 10;

/// Values a quadrature rule can accumulate.
pub trait Integrand: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule with `order` nodes, from Newton iteration on the
    /// three-term Legendre recurrence.
    pub fn legendre(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Shared 10-point rule.
    pub fn ten_point() -> &'static GaussRule {
        static RULE: OnceLock<GaussRule> = OnceLock::new();
        RULE.get_or_init(|| GaussRule::legendre(ELEMENT_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in `(-1, 1)`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mapped nodes and scaled weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }

    pub fn integrate<T: Integrand>(&self, a: f64, b: f64, f: impl Fn(f64) -> T) -> T {
        self.mapped(a, b)
            .fold(T::default(), |acc, (x, w)| acc + f(x) * w)
    }

    /// Recursive bisection until a panel and its two halves agree to `tol`.
    pub fn integrate_adaptive<T: Integrand>(
        &self,
        a: f64,
        b: f64,
        f: &impl Fn(f64) -> T,
        tol: f64,
    ) -> T {
        let whole = self.integrate(a, b, f);
        self.adaptive_step(a, b, f, whole, tol, 0)
    }

    fn adaptive_step<T: Integrand>(
        &self,
        a: f64,
        b: f64,
        f: &impl Fn(f64) -> T,
        whole: T,
        tol: f64,
        depth: u32,
    ) -> T {
        let m = 0.5 * (a + b);
        let left = self.integrate(a, m, f);
        let right = self.integrate(m, b, f);
        let split = left + right;
        if depth >= 50 || (split + whole * -1.0).magnitude() <= tol {
            return split;
        }
        self.adaptive_step(a, m, f, left, 0.5 * tol, depth + 1)
            + self.adaptive_step(m, b, f, right, 0.5 * tol, depth + 1)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A corner-free piece of the boundary between two (unwrapped) angles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub theta_start: f64,
    pub theta_end: f64,
}

impl Segment {
    pub fn new(theta_start: f64, theta_end: f64) -> Self {
        debug_assert!(theta_end >= theta_start);
        Segment {
            theta_start,
            theta_end,
        }
    }

    pub fn angle_span(&self) -> f64 {
        self.theta_end - self.theta_start
    }

    pub fn is_empty(&self) -> bool {
        self.theta_end <= self.theta_start
    }

    /// Boundary point at angle `theta` inside the segment. The frame is taken
    /// from the smooth piece the segment lies on, even next to a corner.
    pub fn point(&self, curve: &BoundaryCurve, theta: f64) -> BoundaryPoint {
        curve.point_sided(theta, self.side_at(theta))
    }

    /// Which side of the nearer endpoint `theta` lies on.
    pub fn side_at(&self, theta: f64) -> Side {
        if theta - self.theta_start <= self.theta_end - theta {
            Side::Right
        } else {
            Side::Left
        }
    }
}

/// `∫_seg g |dw|` with one 10-point panel in `θ` and Jacobian `sqrt(r² + r'²)`.
pub fn integrate_data(
    curve: &BoundaryCurve,
    seg: &Segment,
    g: &(dyn Fn(&BoundaryPoint) -> f64 + Sync),
) -> Result<f64> {
    Ok(integrate_panels(curve, seg, g, 1))
}

/// Oracle mode: dyadic panel refinement of [`integrate_data`] until the
/// relative change drops below `rel_tol` (at most 2¹⁴ panels).
pub fn integrate_data_refined(
    curve: &BoundaryCurve,
    seg: &Segment,
    g: &(dyn Fn(&BoundaryPoint) -> f64 + Sync),
    rel_tol: f64,
) -> Result<f64> {
    let mut prev = integrate_panels(curve, seg, g, 1);
    let mut panels = 2;
    while panels <= 1 << 14 {
        let next = integrate_panels(curve, seg, g, panels);
        if (next - prev).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
        panels *= 2;
    }
    Ok(prev)
}

/// Uniform composite rule with `panels` panels.
pub fn integrate_panels(
    curve: &BoundaryCurve,
    seg: &Segment,
    g: &(dyn Fn(&BoundaryPoint) -> f64 + Sync),
    panels: usize,
) -> f64 {
    if seg.is_empty() {
        return 0.0;
    }
    let rule = GaussRule::ten_point();
    let h = seg.angle_span() / panels as f64;
    (0..panels)
        .map(|p| {
            let a = seg.theta_start + p as f64 * h;
            rule.integrate(a, a + h, |t| {
                let pt = seg.point(curve, t);
                g(&pt) * curve.speed_sided(t, seg.side_at(t))
            })
        })
        .sum()
}

/// `∫_γ g |dw|` over the whole curve, with adaptive refinement on each
/// corner-free panel.
pub fn integrate_curve(
    curve: &BoundaryCurve,
    g: &(dyn Fn(&BoundaryPoint) -> f64 + Sync),
    tol: f64,
) -> f64 {
    let rule = GaussRule::ten_point();
    curve
        .corner_panels()
        .into_iter()
        .map(|(a, b)| {
            let seg = Segment::new(a, b);
            rule.integrate_adaptive(
                a,
                b,
                &|t| {
                    let pt = seg.point(curve, t);
                    g(&pt) * curve.speed_sided(t, seg.side_at(t))
                },
                tol,
            )
        })
        .sum()
}

/// Length of the curve.
pub fn perimeter(curve: &BoundaryCurve) -> f64 {
    integrate_curve(curve, &|_| 1.0, 1e-14)
}
