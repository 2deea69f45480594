//! Evaluation of `f = Σ c_j ψ_j` and its potential inside the domain, and
//! grid error summaries against a reference.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::quadrature::GaussRule;
use crate::solver::Expansion;
use crate::wavelets::{inv_pow, WaveletFamily};

/// Nodes closer than this to `γ` are not evaluated.
pub const BOUNDARY_GUARD: f64 = 1e-12;
/// Only nodes whose radial factor exceeds `1 - NEAR_BAND` need an exact
/// distance computation for the guard.
const NEAR_BAND: f64 = 1e-6;

pub const CALIBRATION_RESOLUTION: usize = 200;
pub const CALIBRATION_SCALE: f64 = 0.5;

/// Strict interior test: polar inequality plus the boundary guard.
pub fn is_interior(curve: &BoundaryCurve, z: Complex64) -> bool {
    let (_, s) = curve.radial_factor(z);
    if s.is_nan() || s >= 1.0 {
        return false;
    }
    if 1.0 - s > NEAR_BAND {
        return true;
    }
    curve.distance(z) > BOUNDARY_GUARD
}

fn check_interior(curve: &BoundaryCurve, z: Complex64) -> Result<()> {
    if is_interior(curve, z) {
        Ok(())
    } else {
        Err(Error::OutsideDomain { re: z.re, im: z.im })
    }
}

/// Precomputed `b_j c_j` and `q_j` for fast repeated evaluation.
#[derive(Clone, Debug)]
pub struct FieldEvaluator {
    weights: Vec<Complex64>,
    sources: Vec<Complex64>,
    order: u32,
}

impl FieldEvaluator {
    pub fn new(expansion: &Expansion, family: &WaveletFamily) -> Result<Self> {
        if expansion.len() != family.len() {
            return Err(Error::Parameter(format!(
                "expansion has {} coefficients for {} wavelets",
                expansion.len(),
                family.len()
            )));
        }
        let weights = (0..family.len())
            .map(|j| expansion.complex(j) * family.norms()[j])
            .collect();
        Ok(FieldEvaluator {
            weights,
            sources: family.sources().positions().collect(),
            order: family.order(),
        })
    }

    /// `Σ b_j c_j (z - q_j)^{-(k+1)}` without a domain check.
    pub fn f_unchecked(&self, z: Complex64) -> Complex64 {
        self.weights
            .iter()
            .zip(&self.sources)
            .map(|(w, q)| w * inv_pow(z - q, self.order + 1))
            .sum()
    }

    /// `Re(-(1/k) Σ b_j c_j (z - q_j)^{-k})` without a domain check.
    pub fn u_unchecked(&self, z: Complex64) -> f64 {
        let s: Complex64 = self
            .weights
            .iter()
            .zip(&self.sources)
            .map(|(w, q)| w * inv_pow(z - q, self.order))
            .sum();
        -s.re / self.order as f64
    }
}

pub fn eval_f(
    expansion: &Expansion,
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    z: Complex64,
) -> Result<Complex64> {
    check_interior(curve, z)?;
    Ok(FieldEvaluator::new(expansion, family)?.f_unchecked(z))
}

pub fn eval_u(
    expansion: &Expansion,
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    z: Complex64,
    calibration: f64,
) -> Result<f64> {
    check_interior(curve, z)?;
    Ok(FieldEvaluator::new(expansion, family)?.u_unchecked(z) + calibration)
}

pub type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;
pub type RealFn = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;

/// What computed fields are compared against.
#[derive(Clone)]
pub enum ReferenceSolution {
    ClosedForm {
        f: ComplexFn,
        u: Option<RealFn>,
    },
    /// A high-resolution expansion standing in for the unknown solution.
    Numerical {
        expansion: Expansion,
        family: WaveletFamily,
    },
}

impl std::fmt::Debug for ReferenceSolution {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReferenceSolution::ClosedForm { u, .. } => fmt
                .debug_struct("ClosedForm")
                .field("has_u", &u.is_some())
                .finish(),
            ReferenceSolution::Numerical { family, .. } => fmt
                .debug_struct("Numerical")
                .field("sources", &family.len())
                .finish(),
        }
    }
}

impl ReferenceSolution {
    pub fn closed_form(f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        ReferenceSolution::ClosedForm {
            f: Arc::new(f),
            u: None,
        }
    }

    pub fn with_potential(self, u: impl Fn(Complex64) -> f64 + Send + Sync + 'static) -> Self {
        match self {
            ReferenceSolution::ClosedForm { f, .. } => ReferenceSolution::ClosedForm {
                f,
                u: Some(Arc::new(u)),
            },
            other => other,
        }
    }

    fn evaluator(&self) -> Result<RefEval<'_>> {
        Ok(match self {
            ReferenceSolution::ClosedForm { f, u } => RefEval::Closed(f, u.as_ref()),
            ReferenceSolution::Numerical { expansion, family } => {
                RefEval::Numerical(FieldEvaluator::new(expansion, family)?)
            }
        })
    }

    /// Largest Cauchy–Riemann residual `|∂f/∂x + i ∂f/∂y|` (central
    /// differences) over the given points, scaled by `max(1, |f|)`.
    pub fn cauchy_riemann_residual(&self, points: &[Complex64], h: f64) -> Result<f64> {
        let ev = self.evaluator()?;
        Ok(points
            .iter()
            .map(|&z| cauchy_riemann_at(&|w| ev.f(w), z, h))
            .fold(0.0, f64::max))
    }
}

enum RefEval<'a> {
    Closed(&'a ComplexFn, Option<&'a RealFn>),
    Numerical(FieldEvaluator),
}

impl RefEval<'_> {
    fn f(&self, z: Complex64) -> Complex64 {
        match self {
            RefEval::Closed(f, _) => f(z),
            RefEval::Numerical(e) => e.f_unchecked(z),
        }
    }

    fn u(&self, z: Complex64) -> Option<f64> {
        match self {
            RefEval::Closed(_, u) => u.map(|u| u(z)),
            RefEval::Numerical(e) => Some(e.u_unchecked(z)),
        }
    }
}

/// `|∂_x f + i ∂_y f| / max(1, |f|)` by central differences.
pub fn cauchy_riemann_at(f: &dyn Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> f64 {
    let fx = (f(z + h) - f(z - h)) / (2.0 * h);
    let fy = (f(z + Complex64::new(0.0, h)) - f(z - Complex64::new(0.0, h))) / (2.0 * h);
    (fx + Complex64::i() * fy).norm() / f(z).norm().max(1.0)
}

/// Area centroid of the star-shaped domain.
pub fn centroid(curve: &BoundaryCurve) -> Complex64 {
    let rule = GaussRule::ten_point();
    let mut area = 0.0;
    let mut moment = Complex64::new(0.0, 0.0);
    for (a, b) in curve.corner_panels() {
        let n = 64;
        let h = (b - a) / n as f64;
        for p in 0..n {
            let lo = a + p as f64 * h;
            area += rule.integrate(lo, lo + h, |t| 0.5 * curve.radius(t).powi(2));
            moment += rule.integrate(lo, lo + h, |t| {
                Complex64::from_polar(curve.radius(t).powi(3) / 3.0, t)
            });
        }
    }
    moment / area
}

/// Axis-aligned box `(x_min, x_max, y_min, y_max)` with a uniform node grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridBox {
    pub fn bounding(curve: &BoundaryCurve) -> Self {
        let (x_min, x_max, y_min, y_max) = curve.bounding_box();
        GridBox {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Bounding box scaled by `scale` about the domain centroid.
    pub fn central(curve: &BoundaryCurve, scale: f64) -> Self {
        let b = Self::bounding(curve);
        let c = centroid(curve);
        let hx = 0.5 * scale * (b.x_max - b.x_min);
        let hy = 0.5 * scale * (b.y_max - b.y_min);
        GridBox {
            x_min: c.re - hx,
            x_max: c.re + hx,
            y_min: c.im - hy,
            y_max: c.im + hy,
        }
    }

    pub fn node(&self, resolution: usize, i: usize, j: usize) -> Complex64 {
        let n = (resolution - 1) as f64;
        Complex64::new(
            self.x_min + (self.x_max - self.x_min) * i as f64 / n,
            self.y_min + (self.y_max - self.y_min) * j as f64 / n,
        )
    }

    fn cell_area(&self, resolution: usize) -> f64 {
        let n = (resolution - 1) as f64;
        (self.x_max - self.x_min) * (self.y_max - self.y_min) / (n * n)
    }
}

/// Constant making the mean of `u_exact - u_num` vanish on the central
/// calibration grid.
pub fn calibrate_u(
    expansion: &Expansion,
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    reference: &ReferenceSolution,
) -> Result<f64> {
    calibrate_u_on(
        expansion,
        family,
        curve,
        reference,
        GridBox::central(curve, CALIBRATION_SCALE),
        CALIBRATION_RESOLUTION,
    )
}

pub fn calibrate_u_on(
    expansion: &Expansion,
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    reference: &ReferenceSolution,
    grid: GridBox,
    resolution: usize,
) -> Result<f64> {
    let ev = FieldEvaluator::new(expansion, family)?;
    let reference = reference.evaluator()?;
    let rows: Vec<Result<(f64, usize)>> = (0..resolution)
        .into_par_iter()
        .map(|j| {
            let mut sum = 0.0;
            let mut count = 0;
            for i in 0..resolution {
                let z = grid.node(resolution, i, j);
                if !is_interior(curve, z) {
                    continue;
                }
                let exact = reference
                    .u(z)
                    .ok_or_else(|| Error::Parameter("reference has no potential".into()))?;
                sum += exact - ev.u_unchecked(z);
                count += 1;
            }
            Ok((sum, count))
        })
        .collect();
    let (mut sum, mut count) = (0.0, 0);
    for r in rows {
        let (s, c) = r?;
        sum += s;
        count += c;
    }
    if count == 0 {
        return Err(Error::DegenerateDomain);
    }
    Ok(sum / count as f64)
}

/// Compared field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    #[default]
    F,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointError {
    pub x: f64,
    pub y: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub grid_resolution: usize,
    pub quantity: Quantity,
    pub linf_error: f64,
    pub l2_error: f64,
    pub evaluated_nodes: usize,
    pub calibration_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointwise: Option<Vec<PointError>>,
}

impl ErrorReport {
    pub fn write_pointwise_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "error"])?;
        for p in self.pointwise.iter().flatten() {
            w.write_record([p.x.to_string(), p.y.to_string(), format!("{:e}", p.error)])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridOptions {
    pub resolution: usize,
    pub quantity: Quantity,
    pub keep_pointwise: bool,
    /// Calibration constant added to `u`; computed on the central box when absent.
    pub calibration: Option<f64>,
    /// Scale of the central calibration box relative to the bounding box.
    pub calibration_scale: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            resolution: 1000,
            quantity: Quantity::F,
            keep_pointwise: false,
            calibration: None,
            calibration_scale: CALIBRATION_SCALE,
        }
    }
}

/// L∞ and discrete L2 errors over the interior nodes of a uniform grid on the
/// bounding box.
pub fn error_grid(
    expansion: &Expansion,
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    reference: &ReferenceSolution,
    options: &GridOptions,
) -> Result<ErrorReport> {
    if options.resolution < 2 {
        return Err(Error::Parameter(
            "grid resolution must be at least 2".into(),
        ));
    }
    let calibration = match options.quantity {
        Quantity::F => None,
        Quantity::U => Some(match options.calibration {
            Some(c) => c,
            None => calibrate_u_on(
                expansion,
                family,
                curve,
                reference,
                GridBox::central(curve, options.calibration_scale),
                CALIBRATION_RESOLUTION,
            )?,
        }),
    };
    let ev = FieldEvaluator::new(expansion, family)?;
    let reference_ev = reference.evaluator()?;
    let grid = GridBox::bounding(curve);
    let n = options.resolution;
    let rows: Vec<Result<Vec<PointError>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut out = Vec::new();
            for i in 0..n {
                let z = grid.node(n, i, j);
                if !is_interior(curve, z) {
                    continue;
                }
                let error = match options.quantity {
                    Quantity::F => (ev.f_unchecked(z) - reference_ev.f(z)).norm(),
                    Quantity::U => {
                        let exact = reference_ev
                            .u(z)
                            .ok_or_else(|| Error::Parameter("reference has no potential".into()))?;
                        (ev.u_unchecked(z) + calibration.unwrap_or(0.0) - exact).abs()
                    }
                };
                out.push(PointError {
                    x: z.re,
                    y: z.im,
                    error,
                });
            }
            Ok(out)
        })
        .collect();
    let mut linf: f64 = 0.0;
    let mut sumsq = 0.0;
    let mut count = 0;
    let mut pointwise = options.keep_pointwise.then(Vec::new);
    for r in rows {
        let row = r?;
        for p in &row {
            // NaN must not hide behind max
            linf = if p.error.is_nan() {
                f64::NAN
            } else {
                linf.max(p.error)
            };
            sumsq += p.error * p.error;
        }
        count += row.len();
        if let Some(pw) = pointwise.as_mut() {
            pw.extend(row);
        }
    }
    Ok(ErrorReport {
        grid_resolution: n,
        quantity: options.quantity,
        linf_error: linf,
        l2_error: (sumsq * grid.cell_area(n)).sqrt(),
        evaluated_nodes: count,
        calibration_constant: calibration,
        pointwise,
    })
}
