//! Normalized Lusin wavelets `ψ_j(w) = b_j (w - q_j)^{-(k+1)}` and their
//! boundary-element pairings.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::quadrature::{GaussRule, Segment};
use crate::whitney::SourceSet;

/// Boundary trace operator `T` of the boundary value problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// `Tf = Re(ν f)`.
    #[default]
    Neumann,
    /// `Tf = Re(τ f)`.
    DirichletRegularity,
}

const SINGULAR_SOURCE_DISTANCE: f64 = 1e-12;
const NORM_REL_TOL: f64 = 1e-10;

/// `z^{-n}` by repeated multiplication.
pub fn inv_pow(z: Complex64, n: u32) -> Complex64 {
    let inv = z.inv();
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        acc *= inv;
    }
    acc
}

/// A quadrature node on the curve: position and `|dw|` weight.
#[derive(Clone, Copy, Debug)]
pub struct CurveNode {
    pub position: Complex64,
    pub weight: f64,
}

/// Composite 10-point nodes on `γ`, with corner-split panels bisected until
/// every panel's arc length is at most `ratio` times its distance to each of
/// the given points.
pub fn refined_curve_nodes(
    curve: &BoundaryCurve,
    points: &[Complex64],
    ratio: f64,
) -> Vec<CurveNode> {
    let rule = GaussRule::ten_point();
    let mut nodes = Vec::new();
    let mut stack: Vec<(f64, f64, u32)> = curve
        .corner_panels()
        .into_iter()
        .rev()
        .map(|(a, b)| (a, b, 0))
        .collect();
    while let Some((a, b, depth)) = stack.pop() {
        let seg = Segment::new(a, b);
        let mid = 0.5 * (a + b);
        let arc = curve.speed_sided(mid, seg.side_at(mid)) * (b - a);
        let wm = curve.position(mid);
        let too_long = points.iter().any(|q| arc > ratio * (wm - q).norm());
        if too_long && depth < 80 {
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
            continue;
        }
        for (t, w) in rule.mapped(a, b) {
            nodes.push(CurveNode {
                position: curve.position(t),
                weight: w * curve.speed_sided(t, seg.side_at(t)),
            });
        }
    }
    nodes
}

/// `∫_γ |w - q|^{-2(k+1)} |dw|`, refined until the relative change between
/// successive panel ratios is below `1e-10`.
pub fn wavelet_energy(curve: &BoundaryCurve, q: Complex64, order: u32) -> f64 {
    let integral = |ratio: f64| -> f64 {
        refined_curve_nodes(curve, &[q], ratio)
            .iter()
            .map(|n| n.weight * (n.position - q).norm_sqr().powi(-(order as i32 + 1)))
            .sum()
    };
    let mut ratio = 0.5;
    let mut prev = integral(ratio);
    for _ in 0..8 {
        ratio *= 0.5;
        let next = integral(ratio);
        if (next - prev).abs() <= NORM_REL_TOL * next {
            return next;
        }
        prev = next;
    }
    prev
}

/// Wavelets on a fixed source set with `‖ψ_j‖_{L2(γ)} = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletFamily {
    sources: SourceSet,
    order: u32,
    norms: Vec<f64>,
}

/// Computes the normalizing constants `b_j = (∫_γ |w - q_j|^{-(2k+2)} |dw|)^{-1/2}`.
pub fn normalize(sources: SourceSet, curve: &BoundaryCurve, order: u32) -> Result<WaveletFamily> {
    if order == 0 {
        return Err(Error::Parameter(
            "wavelet order k must be at least 1".into(),
        ));
    }
    let norms: Vec<Result<f64>> = sources
        .points()
        .par_iter()
        .enumerate()
        .map(|(index, p)| {
            let distance = curve.distance(p.position);
            if distance < SINGULAR_SOURCE_DISTANCE {
                return Err(Error::SingularSource { index, distance });
            }
            Ok(wavelet_energy(curve, p.position, order).powf(-0.5))
        })
        .collect();
    let norms = norms.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(WaveletFamily {
        sources,
        order,
        norms,
    })
}

impl WaveletFamily {
    /// Builds a family from known constants (e.g. deserialized runs).
    pub fn from_parts(sources: SourceSet, order: u32, norms: Vec<f64>) -> Result<Self> {
        if norms.len() != sources.len() {
            return Err(Error::Parameter(
                "one normalizing constant per source required".into(),
            ));
        }
        if order == 0 || norms.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return Err(Error::Parameter(
                "order must be >= 1 and constants positive".into(),
            ));
        }
        Ok(WaveletFamily {
            sources,
            order,
            norms,
        })
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn sources(&self) -> &SourceSet {
        &self.sources
    }

    /// `b_j`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn source(&self, j: usize) -> Complex64 {
        self.sources.points()[j].position
    }

    /// `ψ_j(z) = b_j (z - q_j)^{-(k+1)}`.
    pub fn value(&self, j: usize, z: Complex64) -> Result<Complex64> {
        let d = z - self.source(j);
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole { index: j });
        }
        Ok(inv_pow(d, self.order + 1) * self.norms[j])
    }

    /// `(φ_j, χ_m)` for the element from `start` to `end`, computed from the
    /// primitive `-(1/k)(w - q_j)^{-k}`. With `imaginary` set this is the
    /// companion function `T(iψ_j)`.
    pub fn element_inner_product(
        &self,
        j: usize,
        start: Complex64,
        end: Complex64,
        trace: TraceKind,
        imaginary: bool,
    ) -> f64 {
        if start == end {
            return 0.0;
        }
        let q = self.source(j);
        let k = self.order;
        let x = (inv_pow(start - q, k) - inv_pow(end - q, k)) * (self.norms[j] / k as f64);
        match (trace, imaginary) {
            (TraceKind::Neumann, false) => x.im,
            (TraceKind::Neumann, true) => x.re,
            (TraceKind::DirichletRegularity, false) => x.re,
            (TraceKind::DirichletRegularity, true) => -x.im,
        }
    }

    /// Hermitian Gram matrix `G_ij = ∫_γ ψ_i conj(ψ_j) |dw|` (row-major).
    pub fn independence_gram(&self, curve: &BoundaryCurve) -> Result<GramMatrix> {
        let q: Vec<Complex64> = self.sources.positions().collect();
        for i in 0..q.len() {
            for j in 0..i {
                if (q[i] - q[j]).norm() <= 1e-14 * q[i].norm().max(1.0) {
                    return Err(Error::DegenerateFamily {
                        first: j,
                        second: i,
                    });
                }
            }
        }
        let nodes = refined_curve_nodes(curve, &q, 0.2);
        let n = q.len();
        let values: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                nodes
                    .iter()
                    .map(|node| {
                        inv_pow(node.position - q[j], self.order + 1)
                            * (self.norms[j] * node.weight.sqrt())
                    })
                    .collect()
            })
            .collect();
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..=i {
                let g: Complex64 = values[i]
                    .iter()
                    .zip(&values[j])
                    .map(|(a, b)| a * b.conj())
                    .sum();
                entries[i * n + j] = g;
                entries[j * n + i] = g.conj();
            }
        }
        Ok(GramMatrix { size: n, entries })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<Complex64>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.size + j]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let m = faer::Mat::<faer::c64>::from_fn(self.size, self.size, |i, j| self.get(i, j));
        let mut ev = m
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}
