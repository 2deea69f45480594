//! Boundary partition adapted to the sources and the real least-squares
//! system `Σ d_j (φ_j, χ_m) = (g, χ_m)`.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, BoundaryCurve, BoundaryPoint};
use crate::quadrature::{integrate_data, Segment};
use crate::wavelets::{TraceKind, WaveletFamily};
use crate::whitney::SourceSet;

/// Angles closer than this are treated as the same partition point when a
/// forced angle is merged in.
pub const ANGLE_TOL: f64 = 1e-12;

/// Partition points `w_m` (by angle) and the segments between them.
///
/// Segment 0 is the wrap-around piece from the last angle to the first one
/// plus `2π`; segment `m > 0` runs from `angles[m-1]` to `angles[m]`.
/// Coincident offset angles are kept and give empty segments, so `M` stays
/// `M_0·s_N` plus the number of forced angles that were new.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMesh {
    angles: Vec<f64>,
    forced: Vec<f64>,
    segments: Vec<Segment>,
}

impl BoundaryMesh {
    /// Builds a mesh from arbitrary angles; corners and `forced` are merged
    /// in unless an angle within [`ANGLE_TOL`] is already present.
    pub fn from_angles(
        curve: &BoundaryCurve,
        angles: impl IntoIterator<Item = f64>,
        forced: &[f64],
    ) -> Result<Self> {
        let mut angles: Vec<f64> = angles.into_iter().map(wrap_angle).collect();
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parameter("non-finite partition angle".into()));
        }
        let mut forced_all: Vec<f64> = curve
            .corners()
            .iter()
            .copied()
            .chain(forced.iter().map(|&t| wrap_angle(t)))
            .collect();
        forced_all.sort_by(f64::total_cmp);
        forced_all.dedup_by(|a, b| (*a - *b).abs() <= ANGLE_TOL);
        angles.sort_by(f64::total_cmp);
        for &f in &forced_all {
            let present = angles.iter().any(|&a| {
                let gap = (a - f).abs();
                gap.min(TAU - gap) <= ANGLE_TOL
            });
            if !present {
                angles.push(f);
            }
        }
        angles.sort_by(f64::total_cmp);
        if angles.is_empty() {
            return Err(Error::Parameter("mesh needs at least one angle".into()));
        }
        let m = angles.len();
        let mut segments = Vec::with_capacity(m);
        segments.push(Segment::new(angles[m - 1], angles[0] + TAU));
        for w in angles.windows(2) {
            segments.push(Segment::new(w[0], w[1]));
        }
        Ok(BoundaryMesh {
            angles,
            forced: forced_all,
            segments,
        })
    }

    /// Partition angles, nondecreasing in `[-π, π)`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Corner and singularity angles that the mesh always contains.
    pub fn forced(&self) -> &[f64] {
        &self.forced
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// `M`.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Number of zero-length segments (rows that are identically zero).
    pub fn empty_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.is_empty()).count()
    }
}

/// Angles `θ_j + offsets` for every source, with `M_0` points per source.
pub fn adapted_boundary_points(
    sources: &SourceSet,
    curve: &BoundaryCurve,
    m0: usize,
    forced: &[f64],
) -> Result<BoundaryMesh> {
    if m0 == 0 {
        return Err(Error::Parameter("M_0 must be at least 1".into()));
    }
    if sources.is_empty() {
        return Err(Error::Parameter("source set is empty".into()));
    }
    let mut angles = Vec::with_capacity(m0 * sources.len());
    for p in sources.points() {
        let (theta, r) = curve.radial_factor(p.position);
        let excess = r - 1.0;
        if m0.is_multiple_of(2) {
            let half = (m0 / 2) as f64;
            for i in 1..=m0 / 2 {
                let off = excess * i as f64 / half;
                angles.push(theta - off);
                angles.push(theta + off);
            }
        } else {
            angles.push(theta);
            let half = ((m0 - 1) / 2) as f64;
            for i in 1..=(m0 - 1) / 2 {
                let off = excess * i as f64 / half;
                angles.push(theta - off);
                angles.push(theta + off);
            }
        }
    }
    BoundaryMesh::from_angles(curve, angles, forced)
}

/// Row-major dense real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "expected {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First non-finite entry.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(Error::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            }),
            None => Ok(()),
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Assembled `M × 2s_N` system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySystem {
    pub matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    pub mesh: BoundaryMesh,
    pub family: WaveletFamily,
    pub trace: TraceKind,
}

/// Boundary datum `g` evaluated at a point of `γ` (normal and tangent taken
/// from the smooth side).
pub type BoundaryData<'a> = &'a (dyn Fn(&BoundaryPoint) -> f64 + Sync);

/// Fills column `j` with `(φ_j, χ_m)` and column `s_N + j` with
/// `(φ_{-j}, χ_m)`; the right-hand side uses one 10-point panel per segment.
pub fn assemble(
    family: &WaveletFamily,
    curve: &BoundaryCurve,
    mesh: &BoundaryMesh,
    trace: TraceKind,
    g: BoundaryData<'_>,
) -> Result<BoundarySystem> {
    let s = family.len();
    let m = mesh.len();
    let positions: Vec<_> = mesh
        .segments()
        .iter()
        .map(|seg| {
            (
                curve.position(seg.theta_start),
                curve.position(seg.theta_end),
            )
        })
        .collect();
    let rows: Vec<Result<(Vec<f64>, f64)>> = mesh
        .segments()
        .par_iter()
        .enumerate()
        .map(|(row, seg)| {
            let (a, b) = positions[row];
            let mut out = vec![0.0; 2 * s];
            if !seg.is_empty() {
                for j in 0..s {
                    let q = family.source(j);
                    if a == q || b == q {
                        return Err(Error::SingularEntry {
                            source_index: j,
                            segment: row,
                        });
                    }
                    out[j] = family.element_inner_product(j, a, b, trace, false);
                    out[s + j] = family.element_inner_product(j, a, b, trace, true);
                }
            }
            if let Some(col) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
            let rhs = integrate_data(curve, seg, g)?;
            Ok((out, rhs))
        })
        .collect();
    let mut data = Vec::with_capacity(m * 2 * s);
    let mut rhs = Vec::with_capacity(m);
    for r in rows {
        let (row, b) = r?;
        data.extend(row);
        rhs.push(b);
    }
    Ok(BoundarySystem {
        matrix: DenseMatrix {
            rows: m,
            cols: 2 * s,
            data,
        },
        rhs,
        mesh: mesh.clone(),
        family: family.clone(),
        trace,
    })
}

/// On-disk encoding of a dumped matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFormat {
    /// Little-endian `f64`, row-major.
    #[default]
    Binary,
    Csv,
}

/// JSON manifest written next to the matrix file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemManifest {
    pub curve: BoundaryCurve,
    pub m0: usize,
    pub data: String,
    pub rows: usize,
    pub cols: usize,
    pub format: MatrixFormat,
    pub matrix_file: String,
    pub rhs: Vec<f64>,
    pub mesh: BoundaryMesh,
    pub family: WaveletFamily,
    pub trace: TraceKind,
}

impl BoundarySystem {
    /// `M`.
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// `2 s_N`.
    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Writes `manifest.json` and `matrix.bin` or `matrix.csv` into `dir`.
    pub fn dump(
        &self,
        dir: &Path,
        curve: &BoundaryCurve,
        m0: usize,
        data: &str,
        format: MatrixFormat,
    ) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let matrix_file = match format {
            MatrixFormat::Binary => "matrix.bin",
            MatrixFormat::Csv => "matrix.csv",
        };
        let mut out = BufWriter::new(File::create(dir.join(matrix_file))?);
        match format {
            MatrixFormat::Binary => {
                for v in self.matrix.as_slice() {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            MatrixFormat::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .has_headers(false)
                    .from_writer(&mut out);
                for i in 0..self.rows() {
                    w.write_record(self.matrix.row(i).iter().map(|v| format!("{v:e}")))?;
                }
                w.flush()?;
            }
        }
        out.flush()?;
        let manifest = SystemManifest {
            curve: curve.clone(),
            m0,
            data: data.to_string(),
            rows: self.rows(),
            cols: self.cols(),
            format,
            matrix_file: matrix_file.to_string(),
            rhs: self.rhs.clone(),
            mesh: self.mesh.clone(),
            family: self.family.clone(),
            trace: self.trace,
        };
        serde_json::to_writer_pretty(
            BufWriter::new(File::create(dir.join("manifest.json"))?),
            &manifest,
        )?;
        Ok(())
    }

    /// Reads a system written by [`BoundarySystem::dump`]; `path` is the
    /// manifest file or its directory.
    pub fn load(path: &Path) -> Result<(BoundarySystem, SystemManifest)> {
        let manifest_path = if path.is_dir() {
            path.join("manifest.json")
        } else {
            path.to_path_buf()
        };
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        let manifest: SystemManifest =
            serde_json::from_reader(BufReader::new(File::open(&manifest_path)?))?;
        let n = manifest.rows * manifest.cols;
        let data = match manifest.format {
            MatrixFormat::Binary => {
                let mut bytes = Vec::new();
                File::open(dir.join(&manifest.matrix_file))?.read_to_end(&mut bytes)?;
                if bytes.len() != 8 * n {
                    return Err(Error::Parameter(format!(
                        "matrix file holds {} bytes, expected {}",
                        bytes.len(),
                        8 * n
                    )));
                }
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect()
            }
            MatrixFormat::Csv => {
                let mut r = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .from_path(dir.join(&manifest.matrix_file))?;
                let mut data = Vec::with_capacity(n);
                for rec in r.records() {
                    for field in rec?.iter() {
                        data.push(field.trim().parse::<f64>().map_err(|e| {
                            Error::Parameter(format!("bad matrix entry {field:?}: {e}"))
                        })?);
                    }
                }
                data
            }
        };
        let system = BoundarySystem {
            matrix: DenseMatrix::from_row_major(manifest.rows, manifest.cols, data)?,
            rhs: manifest.rhs.clone(),
            mesh: manifest.mesh.clone(),
            family: manifest.family.clone(),
            trace: manifest.trace,
        };
        Ok((system, manifest))
    }
}

/// Total angle covered by the segments (should be `2π`).
pub fn covered_angle(mesh: &BoundaryMesh) -> f64 {
    mesh.segments().iter().map(Segment::angle_span).sum()
}

/// Angle at which the ray through `z` meets the curve, in `[-π, π)`.
pub fn boundary_angle(z: num_complex::Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return -PI;
    }
    wrap_angle(z.arg())
}
