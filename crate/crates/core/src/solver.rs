//! Minimum-norm least-squares solve by complete orthogonal decomposition.

use faer::linalg::solvers::SolveLstsq;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::{BoundarySystem, DenseMatrix};
use crate::error::{Error, Result};

/// Real coefficients `d` of length `2 s_N`, with `c_j = d_j + i d_{s_N + j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub coeff_norm: f64,
}

impl Expansion {
    pub fn zeros(sources: usize) -> Self {
        Expansion {
            coefficients: vec![0.0; 2 * sources],
            residual_norm: 0.0,
            coeff_norm: 0.0,
        }
    }

    /// Builds an expansion from complex coefficients `c_j`.
    pub fn from_complex(c: &[Complex64]) -> Self {
        let mut d: Vec<f64> = c.iter().map(|c| c.re).collect();
        d.extend(c.iter().map(|c| c.im));
        let coeff_norm = norm(&d);
        Expansion {
            coefficients: d,
            residual_norm: 0.0,
            coeff_norm,
        }
    }

    /// `s_N`.
    pub fn len(&self) -> usize {
        self.coefficients.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn complex(&self, j: usize) -> Complex64 {
        Complex64::new(self.coefficients[j], self.coefficients[self.len() + j])
    }

    pub fn complex_coefficients(&self) -> Vec<Complex64> {
        (0..self.len()).map(|j| self.complex(j)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Singular values above `σ_max · max(M, 2s_N) · ε_mach` (diagnostic only;
    /// the solve does not truncate).
    pub rank_estimate: usize,
    pub residual_norm: f64,
    pub coeff_norm: f64,
}

impl SolveDiagnostics {
    /// `σ_max / σ_min` over the nonzero singular values.
    pub fn condition_number(&self) -> f64 {
        let max = self.singular_values.first().copied().unwrap_or(0.0);
        let min = self
            .singular_values
            .iter()
            .rev()
            .copied()
            .find(|&s| s > 0.0)
            .unwrap_or(0.0);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `min ‖A d - b‖₂` with minimal `‖d‖₂` through a complete orthogonal
/// decomposition `A P = Q [R₁; 0]`, `R₁ᵀ = Z T`. Every pivot of `R` above
/// the underflow threshold is kept; there is no rank truncation.
///
/// The singular values are computed separately for the diagnostics only.
pub fn min_norm_lstsq(a: &DenseMatrix, b: &[f64]) -> Result<(Expansion, SolveDiagnostics)> {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return Err(Error::Parameter("empty system".into()));
    }
    if b.len() != m {
        return Err(Error::Parameter(format!(
            "rhs has {} entries for {m} rows",
            b.len()
        )));
    }
    a.check_finite()?;
    if let Some(row) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, col: n });
    }
    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a.get(i, j));
    let d = cod_solve(&mat, b);
    if let Some(col) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::Factorization(format!(
            "non-finite coefficient {col}"
        )));
    }
    let mut singular_values = mat
        .singular_values()
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    singular_values.sort_by(|x, y| y.total_cmp(x));

    let ad = a.mul_vec(&d);
    let residual_norm = ad
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let coeff_norm = norm(&d);
    let floor = singular_values.first().copied().unwrap_or(0.0) * m.max(n) as f64 * f64::EPSILON;
    let rank_estimate = singular_values.iter().filter(|&&s| s > floor).count();
    Ok((
        Expansion {
            coefficients: d,
            residual_norm,
            coeff_norm,
        },
        SolveDiagnostics {
            singular_values,
            rank_estimate,
            residual_norm,
            coeff_norm,
        },
    ))
}

fn cod_solve(a: &faer::Mat<f64>, b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let qr = a.col_piv_qr();
    let r = qr.R();
    let k = m.min(n);
    let rank = (0..k)
        .take_while(|&i| r[(i, i)].abs() > f64::MIN_POSITIVE)
        .count();
    if rank == n {
        let mut rhs = faer::Mat::<f64>::from_fn(m, 1, |i, _| b[i]);
        qr.solve_lstsq_in_place(&mut rhs);
        return (0..n).map(|i| rhs[(i, 0)]).collect();
    }
    let mut d = vec![0.0; n];
    if rank == 0 {
        return d;
    }
    let q = qr.compute_thin_Q();
    let c: Vec<f64> = (0..rank)
        .map(|i| (0..m).map(|row| q[(row, i)] * b[row]).sum())
        .collect();
    // R₁ᵀ = Z T with T upper triangular, so R₁ = Tᵀ Zᵀ
    let r1t = faer::Mat::<f64>::from_fn(n, rank, |i, j| r[(j, i)]);
    let qr2 = r1t.qr();
    let t = qr2.R();
    let z = qr2.compute_thin_Q();
    let mut w = vec![0.0; rank];
    for i in 0..rank {
        let s: f64 = (0..i).map(|j| t[(j, i)] * w[j]).sum();
        w[i] = (c[i] - s) / t[(i, i)];
    }
    let (forward, _) = qr.P().arrays();
    for (j, &col) in forward.iter().enumerate() {
        d[col] = (0..rank).map(|i| z[(j, i)] * w[i]).sum();
    }
    d
}

pub fn min_norm_solve(system: &BoundarySystem) -> Result<(Expansion, SolveDiagnostics)> {
    min_norm_lstsq(&system.matrix, &system.rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSweepRow {
    pub sources: usize,
    pub coeff_norm: f64,
    pub residual_norm: f64,
    pub condition_number: f64,
}

/// One row per system in input order; failed solves are returned in place.
pub fn coefficient_norm_sweep(systems: &[BoundarySystem]) -> Vec<Result<NormSweepRow>> {
    systems
        .iter()
        .map(|sys| {
            let (e, diag) = min_norm_solve(sys)?;
            Ok(NormSweepRow {
                sources: sys.family.len(),
                coeff_norm: e.coeff_norm,
                residual_norm: e.residual_norm,
                condition_number: diag.condition_number(),
            })
        })
        .collect()
}
