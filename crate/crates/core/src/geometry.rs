//! Star-shaped boundary curves given in polar form `w(θ) = r(θ) e^{iθ}`.
//!
//! Angles are kept in `[-π, π)`. Curves may have corners (jumps of `r'`);
//! normals are undefined there and every quadrature panel built on a curve
//! is split at its corners.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular tolerance for corner detection.
pub const CORNER_TOL: f64 = 1e-12;

const DISTANCE_SAMPLES: usize = 4096;
const REFINED_CANDIDATES: usize = 6;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(TAU) - PI;
    if t >= PI {
        t - TAU
    } else {
        t
    }
}

/// Radius function of a polar curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveShape {
    Circle {
        radius: f64,
    },
    /// `r(θ) = base + amplitude·cos(lobes·θ)`.
    Star {
        base: f64,
        amplitude: f64,
        lobes: u32,
    },
    /// Boundary of `{|x| < h, |y| < h}`.
    Square {
        half_width: f64,
    },
    /// Periodic piecewise-linear interpolation of `(theta, radius)` samples.
    Table {
        thetas: Vec<f64>,
        radii: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub theta: f64,
    pub position: Complex64,
    /// Outward unit normal.
    pub normal: Complex64,
    /// Positively oriented unit tangent, `i·normal`.
    pub tangent: Complex64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CurveSpec {
    name: String,
    shape: CurveShape,
}

/// A closed star-shaped Lipschitz curve. Immutable after construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CurveSpec", into = "CurveSpec")]
pub struct BoundaryCurve {
    name: String,
    shape: CurveShape,
    corners: Vec<f64>,
    samples: Vec<Complex64>,
}

impl TryFrom<CurveSpec> for BoundaryCurve {
    type Error = Error;

    fn try_from(spec: CurveSpec) -> Result<Self> {
        BoundaryCurve::new(spec.name, spec.shape)
    }
}

impl From<BoundaryCurve> for CurveSpec {
    fn from(curve: BoundaryCurve) -> Self {
        CurveSpec {
            name: curve.name,
            shape: curve.shape,
        }
    }
}

impl PartialEq for BoundaryCurve {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.shape == other.shape
    }
}

impl BoundaryCurve {
    pub fn new(name: impl Into<String>, shape: CurveShape) -> Result<Self> {
        let corners = match &shape {
            CurveShape::Circle { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "circle radius must be positive, got {radius}"
                    )));
                }
                Vec::new()
            }
            CurveShape::Star {
                base, amplitude, ..
            } => {
                if !(base.is_finite() && amplitude.is_finite() && *base > amplitude.abs()) {
                    return Err(Error::Parameter(format!(
                        "star curve needs base > |amplitude|, got {base} and {amplitude}"
                    )));
                }
                Vec::new()
            }
            CurveShape::Square { half_width } => {
                if !(*half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "square half width must be positive, got {half_width}"
                    )));
                }
                vec![-3.0 * FRAC_PI_4, -FRAC_PI_4, FRAC_PI_4, 3.0 * FRAC_PI_4]
            }
            CurveShape::Table { thetas, radii } => {
                if thetas.len() != radii.len() || thetas.len() < 3 {
                    return Err(Error::Parameter(
                        "table curve needs at least 3 (theta, radius) pairs".into(),
                    ));
                }
                if thetas.iter().any(|t| !(-PI..PI).contains(t)) {
                    return Err(Error::Parameter(
                        "table angles must lie in [-pi, pi)".into(),
                    ));
                }
                if thetas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Parameter(
                        "table angles must be strictly increasing".into(),
                    ));
                }
                if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
                    return Err(Error::Parameter("table radii must be positive".into()));
                }
                thetas.clone()
            }
        };
        let mut curve = BoundaryCurve {
            name: name.into(),
            shape,
            corners,
            samples: Vec::new(),
        };
        curve.samples = (0..DISTANCE_SAMPLES)
            .map(|i| curve.position(sample_angle(i)))
            .collect();
        Ok(curve)
    }

    pub fn unit_circle() -> Self {
        Self::new("circle", CurveShape::Circle { radius: 1.0 }).expect("valid circle")
    }

    /// The curve `r(θ) = 3 + cos 4θ`.
    pub fn star() -> Self {
        Self::new(
            "star",
            CurveShape::Star {
                base: 3.0,
                amplitude: 1.0,
                lobes: 4,
            },
        )
        .expect("valid star")
    }

    /// Boundary of the square `{-1 < x, y < 1}`.
    pub fn square() -> Self {
        Self::new("square", CurveShape::Square { half_width: 1.0 }).expect("valid square")
    }

    pub fn from_table(name: impl Into<String>, thetas: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        Self::new(name, CurveShape::Table { thetas, radii })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "star" => Ok(Self::star()),
            "square" => Ok(Self::square()),
            "circle" => Ok(Self::unit_circle()),
            other => Err(Error::Config(format!("unknown curve name {other:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    /// Corner angles, strictly increasing in `[-π, π)`.
    pub fn corners(&self) -> &[f64] {
        &self.corners
    }

    pub fn is_corner(&self, theta: f64) -> bool {
        let t = wrap_angle(theta);
        self.corners
            .iter()
            .any(|&c| angular_gap(c, t) <= CORNER_TOL)
    }

    pub fn radius(&self, theta: f64) -> f64 {
        let t = wrap_angle(theta);
        match &self.shape {
            CurveShape::Circle { radius } => *radius,
            CurveShape::Star {
                base,
                amplitude,
                lobes,
            } => base + amplitude * (*lobes as f64 * t).cos(),
            CurveShape::Square { half_width } => half_width / t.cos().abs().max(t.sin().abs()),
            CurveShape::Table { thetas, radii } => {
                let (i0, i1, t0, t1) = table_interval(thetas, t, Side::Right);
                let s = (t - t0) / (t1 - t0);
                radii[i0] + s * (radii[i1] - radii[i0])
            }
        }
    }

    /// Right-sided derivative `r'(θ)`.
    pub fn radius_derivative(&self, theta: f64) -> f64 {
        self.radius_derivative_sided(theta, Side::Right)
    }

    pub fn radius_derivative_sided(&self, theta: f64, side: Side) -> f64 {
        let t = wrap_angle(theta);
        let nudge = match side {
            Side::Left => -1e-6,
            Side::Right => 1e-6,
        };
        match &self.shape {
            CurveShape::Circle { .. } => 0.0,
            CurveShape::Star {
                amplitude, lobes, ..
            } => {
                let n = *lobes as f64;
                -amplitude * n * (n * t).sin()
            }
            CurveShape::Square { half_width } => {
                let (c, s) = (t.cos(), t.sin());
                // the nudge only decides which side piece applies at a corner
                let on_vertical_side = if (c.abs() - s.abs()).abs() > 1e-13 {
                    c.abs() > s.abs()
                } else {
                    let probe = t + nudge;
                    probe.cos().abs() >= probe.sin().abs()
                };
                if on_vertical_side {
                    half_width * s * c.signum() / (c * c)
                } else {
                    -half_width * c * s.signum() / (s * s)
                }
            }
            CurveShape::Table { thetas, radii } => {
                let (i0, i1, t0, t1) = table_interval(thetas, t, side);
                (radii[i1] - radii[i0]) / (t1 - t0)
            }
        }
    }

    pub fn position(&self, theta: f64) -> Complex64 {
        Complex64::from_polar(self.radius(theta), theta)
    }

    /// Arc-length density `|d/dθ (r e^{iθ})| = sqrt(r² + r'²)`.
    pub fn speed(&self, theta: f64) -> f64 {
        self.radius(theta).hypot(self.radius_derivative(theta))
    }

    pub fn speed_sided(&self, theta: f64, side: Side) -> f64 {
        self.radius(theta)
            .hypot(self.radius_derivative_sided(theta, side))
    }

    /// Unit tangent and outward normal using the one-sided derivative.
    pub fn frame_sided(&self, theta: f64, side: Side) -> (Complex64, Complex64) {
        let r = self.radius(theta);
        let dr = self.radius_derivative_sided(theta, side);
        let d = Complex64::new(dr, r) * Complex64::from_polar(1.0, theta);
        let tangent = d / d.norm();
        (tangent, -Complex64::i() * tangent)
    }

    pub fn point_at(&self, theta: f64) -> Result<BoundaryPoint> {
        if self.is_corner(theta) {
            return Err(Error::CornerNormal { theta });
        }
        Ok(self.point_sided(theta, Side::Right))
    }

    /// Boundary point whose frame uses the one-sided derivative; never fails,
    /// so quadrature nodes arbitrarily close to a corner stay usable.
    pub fn point_sided(&self, theta: f64, side: Side) -> BoundaryPoint {
        let (tangent, normal) = self.frame_sided(theta, side);
        BoundaryPoint {
            theta,
            position: self.position(theta),
            normal,
            tangent,
        }
    }

    /// Polar inside test `|z| < r(arg z)`.
    pub fn contains(&self, z: Complex64) -> bool {
        if z == Complex64::new(0.0, 0.0) {
            return true;
        }
        z.norm() < self.radius(z.arg())
    }

    /// Writes `z = s·r(θ)e^{iθ}` and returns `(θ, s)`.
    pub fn radial_factor(&self, z: Complex64) -> (f64, f64) {
        let theta = wrap_angle(z.arg());
        (theta, z.norm() / self.radius(theta))
    }

    /// `dist(z, γ)`.
    pub fn distance(&self, z: Complex64) -> f64 {
        self.nearest(z).1
    }

    /// Angle of the nearest boundary point and the distance to it.
    ///
    /// Dense uniform sampling followed by golden-section refinement of the
    /// best local minima; corners are always tried as candidates.
    pub fn nearest(&self, z: Complex64) -> (f64, f64) {
        let n = self.samples.len();
        let d: Vec<f64> = self.samples.iter().map(|w| (z - w).norm()).collect();
        let mut minima: Vec<usize> = (0..n)
            .filter(|&i| d[i] <= d[(i + n - 1) % n] && d[i] <= d[(i + 1) % n])
            .collect();
        minima.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        minima.truncate(REFINED_CANDIDATES);

        let mut best = (sample_angle(0), f64::INFINITY);
        let h = TAU / n as f64;
        for i in minima {
            let c = sample_angle(i);
            let (t, v) = golden_section(|t| (z - self.position(t)).norm(), c - h, c + h);
            if v < best.1 {
                best = (wrap_angle(t), v);
            }
        }
        for &c in &self.corners {
            let v = (z - self.position(c)).norm();
            if v < best.1 {
                best = (c, v);
            }
        }
        best
    }

    /// Axis-aligned bounding box `(x_min, x_max, y_min, y_max)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        let corner_points = self.corners.iter().map(|&c| self.position(c));
        let mut bb = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for w in self.samples.iter().copied().chain(corner_points) {
            bb.0 = bb.0.min(w.re);
            bb.1 = bb.1.max(w.re);
            bb.2 = bb.2.min(w.im);
            bb.3 = bb.3.max(w.im);
        }
        bb
    }

    /// Angular panels `(start, end)` covering one turn, split at corners.
    /// The last panel may extend past `π`.
    pub fn corner_panels(&self) -> Vec<(f64, f64)> {
        if self.corners.is_empty() {
            return vec![(-PI, PI)];
        }
        let c = &self.corners;
        let mut panels: Vec<(f64, f64)> = c.windows(2).map(|w| (w[0], w[1])).collect();
        panels.push((c[c.len() - 1], c[0] + TAU));
        panels
    }

    /// `max(Lip(ρ), Lip(ρ⁻¹))` for the radial map `ρ(s e^{iθ}) = s r(θ) e^{iθ}`.
    ///
    /// Diagnostic only. In the polar frame the Jacobian is `[[r, r'], [0, r]]`.
    pub fn lipschitz_constant(&self) -> f64 {
        let mut lip = 1.0f64;
        for i in 0..DISTANCE_SAMPLES {
            let t = sample_angle(i);
            for side in [Side::Left, Side::Right] {
                let r = self.radius(t);
                let dr = self.radius_derivative_sided(t, side);
                // singular values of [[r, dr], [0, r]]
                let tr = 2.0 * r * r + dr * dr;
                let det = r * r;
                let disc = (tr * tr / 4.0 - det * det).max(0.0).sqrt();
                let smax = (tr / 2.0 + disc).sqrt();
                let smin = (tr / 2.0 - disc).max(0.0).sqrt();
                lip = lip.max(smax).max(1.0 / smin);
            }
        }
        lip
    }
}

fn sample_angle(i: usize) -> f64 {
    -PI + TAU * i as f64 / DISTANCE_SAMPLES as f64
}

fn angular_gap(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Interval `(i0, i1, t0, t1)` of a periodic table containing `t`, with
/// `t0 <= t <= t1` after unwrapping. At a node, `side` picks the interval.
fn table_interval(thetas: &[f64], t: f64, side: Side) -> (usize, usize, f64, f64) {
    let n = thetas.len();
    let k = match side {
        Side::Right => thetas.partition_point(|&x| x <= t),
        Side::Left => thetas.partition_point(|&x| x < t),
    };
    if k == 0 {
        (n - 1, 0, thetas[n - 1] - TAU, thetas[0])
    } else if k == n {
        (n - 1, 0, thetas[n - 1], thetas[0] + TAU)
    } else {
        (k - 1, k, thetas[k - 1], thetas[k])
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..120 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    let v = f(t).min(fc).min(fd);
    (t, v)
}
