//! Boundary data and reference solutions: the builtin test problems and
//! user expressions.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::field::ReferenceSolution;
use crate::geometry::{BoundaryCurve, BoundaryPoint};
use crate::quadrature::{integrate_curve, perimeter};
use crate::wavelets::TraceKind;

/// Singular point of `f₂`.
pub const F2_SINGULARITY: Complex64 = Complex64::new(-1.0, -0.1);

const MEAN_TOL: f64 = 1e-14;

/// `f₁(z) = e^{z/3 - iz/10} sin(z/3)`.
pub fn f1(z: Complex64) -> Complex64 {
    (z / 3.0 - Complex64::i() * z / 10.0).exp() * (z / 3.0).sin()
}

/// Potential of `f₁`: `Re(15/(10i-7) e^{(1/3+7i/30)z} - 15/(10i+13) e^{(1/3-13i/30)z})`.
pub fn u1(z: Complex64) -> f64 {
    let a = Complex64::new(-7.0, 10.0);
    let b = Complex64::new(13.0, 10.0);
    let e1 = (Complex64::new(1.0 / 3.0, 7.0 / 30.0) * z).exp();
    let e2 = (Complex64::new(1.0 / 3.0, -13.0 / 30.0) * z).exp();
    (15.0 / a * e1 - 15.0 / b * e2).re
}

/// `f₂(z) = √(z + 1 + i/10)`, principal branch.
pub fn f2(z: Complex64) -> Complex64 {
    (z - F2_SINGULARITY).sqrt()
}

/// Potential of `f₂`: `Re((2/3)(z - p)^{3/2})` with the principal branch.
pub fn u2(z: Complex64) -> f64 {
    let s = (z - F2_SINGULARITY).sqrt();
    (s * s * s * (2.0 / 3.0)).re
}

/// `h₃` with `g₃ = Re(ν h₃) - c`.
pub fn h3(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    Complex64::new(x * y * y * y.sin(), -(x * x * x).sin() * (x * y).cos())
}

/// How the boundary datum is given in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    /// `f1`, `f2`, `u1` or `g3`.
    Builtin { name: String },
    /// Closed-form analytic `f` (and optionally its potential `u`); the
    /// datum is its trace.
    Analytic {
        f: String,
        #[serde(default)]
        u: Option<String>,
        /// Boundary singularity of `f`, added to the forced mesh points.
        #[serde(default)]
        singularity: Option<[f64; 2]>,
    },
    /// Raw boundary datum in `x`, `y`, `z`, `nu`, `tau`; real part is used.
    Boundary {
        g: String,
        /// Subtract the boundary mean so that `∫ g |dw| = 0`.
        #[serde(default = "default_true")]
        zero_mean: bool,
    },
}

fn default_true() -> bool {
    true
}

impl DataSpec {
    pub fn builtin(name: &str) -> Self {
        DataSpec::Builtin {
            name: name.to_string(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            DataSpec::Builtin { name } => name.clone(),
            DataSpec::Analytic { f, .. } => format!("f = {f}"),
            DataSpec::Boundary { g, .. } => format!("g = {g}"),
        }
    }
}

type PointFn = Arc<dyn Fn(&BoundaryPoint) -> f64 + Send + Sync>;

/// Resolved boundary problem data.
#[derive(Clone)]
pub struct ProblemData {
    label: String,
    f: Option<Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>>,
    u: Option<Arc<dyn Fn(Complex64) -> f64 + Send + Sync>>,
    raw: Option<PointFn>,
    offset: f64,
    singularity: Option<Complex64>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("ProblemData")
            .field("label", &self.label)
            .field("closed_form", &self.f.is_some())
            .field("offset", &self.offset)
            .field("singularity", &self.singularity)
            .finish()
    }
}

impl ProblemData {
    /// Analytic data whose datum is `T f`.
    pub fn analytic(
        label: impl Into<String>,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        u: Option<Arc<dyn Fn(Complex64) -> f64 + Send + Sync>>,
    ) -> Self {
        ProblemData {
            label: label.into(),
            f: Some(Arc::new(f)),
            u,
            raw: None,
            offset: 0.0,
            singularity: None,
        }
    }

    /// Raw datum, shifted to zero boundary mean when `zero_mean` is set.
    pub fn raw(
        label: impl Into<String>,
        curve: &BoundaryCurve,
        g: impl Fn(&BoundaryPoint) -> f64 + Send + Sync + 'static,
        zero_mean: bool,
    ) -> Self {
        let g: PointFn = Arc::new(g);
        let offset = if zero_mean {
            integrate_curve(curve, &*g, MEAN_TOL) / perimeter(curve)
        } else {
            0.0
        };
        ProblemData {
            label: label.into(),
            f: None,
            u: None,
            raw: Some(g),
            offset,
            singularity: None,
        }
    }

    pub fn with_singularity(mut self, p: Complex64) -> Self {
        self.singularity = Some(p);
        self
    }

    pub fn from_spec(spec: &DataSpec, curve: &BoundaryCurve) -> Result<Self> {
        match spec {
            DataSpec::Builtin { name } => builtin_data(name, curve),
            DataSpec::Analytic { f, u, singularity } => {
                let fe = Expr::parse(f)?;
                if fe.uses_frame() {
                    return Err(Error::Config("analytic f may not use nu or tau".into()));
                }
                let u = match u {
                    Some(text) => {
                        let ue = Expr::parse(text)?;
                        Some(Arc::new(move |z| ue.eval_at(z).re)
                            as Arc<dyn Fn(Complex64) -> f64 + Send + Sync>)
                    }
                    None => None,
                };
                let mut data = ProblemData::analytic(spec.label(), move |z| fe.eval_at(z), u);
                data.singularity = singularity.map(|[re, im]| Complex64::new(re, im));
                Ok(data)
            }
            DataSpec::Boundary { g, zero_mean } => {
                let ge = Expr::parse(g)?;
                Ok(ProblemData::raw(
                    spec.label(),
                    curve,
                    move |pt| {
                        ge.eval(&Env {
                            z: pt.position,
                            nu: pt.normal,
                            tau: pt.tangent,
                        })
                        .re
                    },
                    *zero_mean,
                ))
            }
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Constant subtracted from a raw datum.
    pub fn mean_offset(&self) -> f64 {
        self.offset
    }

    pub fn singularity(&self) -> Option<Complex64> {
        self.singularity
    }

    /// Datum `g` at a boundary point for the given trace operator.
    pub fn boundary_value(&self, pt: &BoundaryPoint, trace: TraceKind) -> f64 {
        if let Some(g) = &self.raw {
            return g(pt) - self.offset;
        }
        let f = self.f.as_ref().expect("analytic or raw data")(pt.position);
        match trace {
            TraceKind::Neumann => (pt.normal * f).re,
            TraceKind::DirichletRegularity => (pt.tangent * f).re,
        }
    }

    /// Closed-form reference, when known.
    pub fn reference(&self) -> Option<ReferenceSolution> {
        let f = self.f.clone()?;
        Some(ReferenceSolution::ClosedForm {
            f,
            u: self.u.clone(),
        })
    }
}

/// The named test problems `f1`, `f2`, `u1` (same as `f1`) and `g3`.
pub fn builtin_data(name: &str, curve: &BoundaryCurve) -> Result<ProblemData> {
    match name {
        "f1" | "u1" => Ok(ProblemData::analytic(name, f1, Some(Arc::new(u1)))),
        "f2" => Ok(
            ProblemData::analytic(name, f2, Some(Arc::new(u2))).with_singularity(F2_SINGULARITY)
        ),
        "g3" => Ok(ProblemData::raw(
            name,
            curve,
            |pt| (pt.normal * h3(pt.position)).re,
            true,
        )),
        other => Err(Error::Config(format!("unknown builtin data {other:?}"))),
    }
}
