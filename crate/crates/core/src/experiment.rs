//! Config-driven runs: sources → wavelets → mesh → system → solve → error
//! grid, over a cartesian sweep of parameters.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{adapted_boundary_points, assemble, boundary_angle, BoundarySystem};
use crate::data::{DataSpec, ProblemData};
use crate::error::{Error, Result};
use crate::field::{
    error_grid, ErrorReport, GridOptions, Quantity, ReferenceSolution, CALIBRATION_SCALE,
};
use crate::geometry::BoundaryCurve;
use crate::solver::{min_norm_solve, Expansion, SolveDiagnostics};
use crate::wavelets::{normalize, TraceKind, WaveletFamily};
use crate::whitney::{
    cone_points, interior_whitney_layers, mfs_ring, verify_cover, whitney_layers, ConeRule,
    CoverBand, CoverReport, SourceSet, DEFAULT_CONE_HALF_ANGLE, MIN_COVER_SAMPLES,
};

/// A named builtin curve or a full shape description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveConfig {
    Named(String),
    Full(BoundaryCurve),
}

impl CurveConfig {
    pub fn build(&self) -> Result<BoundaryCurve> {
        match self {
            CurveConfig::Named(name) => BoundaryCurve::by_name(name),
            CurveConfig::Full(curve) => Ok(curve.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApexSite {
    /// One cone at every corner of the curve.
    Corners,
    /// One cone at the data singularity.
    Singularity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConeApex {
    /// Boundary angle of the apex.
    Theta(f64),
    Site(ApexSite),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeConfig {
    #[serde(alias = "apex_theta")]
    pub apex: ConeApex,
    pub levels: u32,
    #[serde(default)]
    pub half_angle: Option<f64>,
    /// Defaults to `(1+ε)^{-N} r(θ_apex)`, just inside the innermost layer.
    #[serde(default)]
    pub rho0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Whitney {
        /// `[N_0, N]`.
        layers: [u32; 2],
        #[serde(default)]
        interior: bool,
        #[serde(default)]
        cones: Vec<ConeConfig>,
    },
    Mfs {
        count: usize,
        r_mfs: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Write `grid_<i>.csv` with pointwise errors.
    #[serde(default)]
    pub pointwise_csv: bool,
    /// Size of the centroid-centered box used to calibrate `u`, relative to
    /// the bounding box.
    #[serde(default = "default_calibration_scale")]
    pub calibration_scale: f64,
}

fn default_resolution() -> usize {
    1000
}

fn default_calibration_scale() -> f64 {
    CALIBRATION_SCALE
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: default_resolution(),
            pointwise_csv: false,
            calibration_scale: default_calibration_scale(),
        }
    }
}

/// Sweep axes; an absent axis keeps the base value, and the run list is the
/// cartesian product of the present ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Last layer `N`.
    #[serde(default)]
    pub layers: Option<Vec<u32>>,
    #[serde(default)]
    pub m0: Option<Vec<usize>>,
    #[serde(default)]
    pub r_mfs: Option<Vec<f64>>,
    #[serde(default)]
    pub mfs_count: Option<Vec<usize>>,
    /// Levels of every cone.
    #[serde(default)]
    pub cone_levels: Option<Vec<u32>>,
}

/// High-resolution run used as the reference when no closed form exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub sources: SourceConfig,
    #[serde(default)]
    pub m0: Option<usize>,
    /// Expansion file to reuse; written after the first computation.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub eps_prime: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100_000
}

fn default_eps() -> f64 {
    0.3
}

fn default_order() -> u32 {
    1
}

fn default_m0() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub curve: CurveConfig,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Wavelet order `k`.
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default = "default_m0")]
    pub m0: usize,
    #[serde(default)]
    pub trace: TraceKind,
    pub sources: SourceConfig,
    pub data: DataSpec,
    #[serde(default)]
    pub quantity: Quantity,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    /// Seed for the cover check.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

impl ExperimentConfig {
    /// Reads JSON, or TOML when the extension is `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.curve.build()?;
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::Config(format!(
                "eps must lie in (0, 1/2], got {}",
                self.eps
            )));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if self.m0 == 0 {
            return Err(Error::Config("m0 must be at least 1".into()));
        }
        if self.grid.resolution < 2 {
            return Err(Error::Config("grid resolution must be at least 2".into()));
        }
        if !(self.grid.calibration_scale > 0.0 && self.grid.calibration_scale <= 1.0) {
            return Err(Error::Config(format!(
                "calibration scale must lie in (0, 1], got {}",
                self.grid.calibration_scale
            )));
        }
        if let Some(s) = &self.sweep {
            let mfs_axes = s.r_mfs.is_some() || s.mfs_count.is_some();
            let whitney_axes = s.layers.is_some() || s.cone_levels.is_some();
            match self.sources {
                SourceConfig::Whitney { .. } if mfs_axes => {
                    return Err(Error::Config(
                        "r_mfs/mfs_count sweeps need mfs sources".into(),
                    ));
                }
                SourceConfig::Mfs { .. } if whitney_axes => {
                    return Err(Error::Config(
                        "layers/cone_levels sweeps need whitney sources".into(),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Configs for every sweep point, in order.
    pub fn sweep_points(&self) -> Vec<ExperimentConfig> {
        let Some(sweep) = &self.sweep else {
            return vec![self.clone()];
        };
        let mut points = vec![ExperimentConfig {
            sweep: None,
            ..self.clone()
        }];
        fn expand<T: Clone>(
            points: Vec<ExperimentConfig>,
            axis: &Option<Vec<T>>,
            set: impl Fn(&mut ExperimentConfig, T),
        ) -> Vec<ExperimentConfig> {
            match axis {
                None => points,
                Some(values) => points
                    .into_iter()
                    .flat_map(|p| {
                        values
                            .iter()
                            .map(|v| {
                                let mut q = p.clone();
                                set(&mut q, v.clone());
                                q
                            })
                            .collect::<Vec<_>>()
                    })
                    .collect(),
            }
        }
        points = expand(points, &sweep.m0, |c, v| c.m0 = v);
        points = expand(points, &sweep.layers, |c, v| {
            if let SourceConfig::Whitney { layers, .. } = &mut c.sources {
                layers[1] = v;
            }
        });
        points = expand(points, &sweep.cone_levels, |c, v| {
            if let SourceConfig::Whitney { cones, .. } = &mut c.sources {
                cones.iter_mut().for_each(|k| k.levels = v);
            }
        });
        points = expand(points, &sweep.r_mfs, |c, v| {
            if let SourceConfig::Mfs { r_mfs, .. } = &mut c.sources {
                *r_mfs = v;
            }
        });
        points = expand(points, &sweep.mfs_count, |c, v| {
            if let SourceConfig::Mfs { count, .. } = &mut c.sources {
                *count = v;
            }
        });
        points
    }
}

/// Generates the source set described by `cfg`.
pub fn build_sources(
    cfg: &SourceConfig,
    curve: &BoundaryCurve,
    eps: f64,
    data: &ProblemData,
) -> Result<SourceSet> {
    match cfg {
        SourceConfig::Mfs { count, r_mfs } => mfs_ring(curve, *count, *r_mfs),
        SourceConfig::Whitney {
            layers: [first, last],
            interior,
            cones,
        } => {
            if first > last {
                return Err(Error::Config(format!(
                    "layer range [{first}, {last}] is empty"
                )));
            }
            let mut set = if *interior {
                interior_whitney_layers(curve, eps, *first, *last)?
            } else {
                whitney_layers(curve, eps, *first, *last)?
            };
            for cone in cones {
                let apexes: Vec<f64> = match cone.apex {
                    ConeApex::Theta(t) => vec![t],
                    ConeApex::Site(ApexSite::Corners) => curve.corners().to_vec(),
                    ConeApex::Site(ApexSite::Singularity) => {
                        let p = data.singularity().ok_or_else(|| {
                            Error::Config("data declares no singularity for the cone".into())
                        })?;
                        vec![boundary_angle(p)]
                    }
                };
                for theta in apexes {
                    let rho0 = cone
                        .rho0
                        .unwrap_or_else(|| (1.0 + eps).powi(-(*last as i32)) * curve.radius(theta));
                    let rule = ConeRule {
                        half_angle: cone.half_angle.unwrap_or(DEFAULT_CONE_HALF_ANGLE),
                        rho0,
                    };
                    set.extend(cone_points(
                        curve,
                        curve.position(theta),
                        cone.levels,
                        &rule,
                        eps,
                    )?);
                }
            }
            Ok(set)
        }
    }
}

/// Everything produced by one solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub family: WaveletFamily,
    pub system: BoundarySystem,
    pub expansion: Expansion,
    pub diagnostics: SolveDiagnostics,
}

/// Sources, system and min-norm solve for one config (sweep ignored).
pub fn solve_config(
    cfg: &ExperimentConfig,
    curve: &BoundaryCurve,
    data: &ProblemData,
) -> Result<Solution> {
    let family = normalize(
        build_sources(&cfg.sources, curve, cfg.eps, data)?,
        curve,
        cfg.order,
    )?;
    let system = assemble_config(cfg, curve, data, &family)?;
    let (expansion, diagnostics) = min_norm_solve(&system)?;
    Ok(Solution {
        family,
        system,
        expansion,
        diagnostics,
    })
}

pub fn assemble_config(
    cfg: &ExperimentConfig,
    curve: &BoundaryCurve,
    data: &ProblemData,
    family: &WaveletFamily,
) -> Result<BoundarySystem> {
    let forced: Vec<f64> = data.singularity().map(boundary_angle).into_iter().collect();
    let mesh = adapted_boundary_points(family.sources(), curve, cfg.m0, &forced)?;
    let trace = cfg.trace;
    let g = |pt: &crate::geometry::BoundaryPoint| data.boundary_value(pt, trace);
    assemble(family, curve, &mesh, trace, &g)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StoredReference {
    family: WaveletFamily,
    expansion: Expansion,
}

/// Closed-form reference from the data, or the numerical one from the
/// config (loaded from `path` when present, computed and saved otherwise).
pub fn reference_solution(
    cfg: &ExperimentConfig,
    curve: &BoundaryCurve,
    data: &ProblemData,
    out: Option<&Path>,
) -> Result<Option<ReferenceSolution>> {
    if let Some(r) = data.reference() {
        return Ok(Some(r));
    }
    let Some(rc) = &cfg.reference else {
        return Ok(None);
    };
    let path = rc
        .path
        .clone()
        .or_else(|| out.map(|o| o.join("reference.json")));
    if let Some(p) = path.as_ref().filter(|p| p.exists()) {
        let stored: StoredReference =
            serde_json::from_reader(std::io::BufReader::new(File::open(p)?))?;
        return Ok(Some(ReferenceSolution::Numerical {
            expansion: stored.expansion,
            family: stored.family,
        }));
    }
    let ref_cfg = ExperimentConfig {
        sources: rc.sources.clone(),
        m0: rc.m0.unwrap_or(cfg.m0),
        sweep: None,
        ..cfg.clone()
    };
    let sol = solve_config(&ref_cfg, curve, data)?;
    if let Some(p) = path {
        if let Some(dir) = p.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let stored = StoredReference {
            family: sol.family.clone(),
            expansion: sol.expansion.clone(),
        };
        serde_json::to_writer(BufWriter::new(File::create(p)?), &stored)?;
    }
    Ok(Some(ReferenceSolution::Numerical {
        expansion: sol.expansion,
        family: sol.family,
    }))
}

/// One sweep point's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub config: ExperimentConfig,
    pub sources: usize,
    pub rows: usize,
    pub cols: usize,
    pub linf_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub calibration_constant: Option<f64>,
    pub coeff_norm: Option<f64>,
    pub residual: Option<f64>,
    pub rank_estimate: Option<usize>,
    pub condition_number: Option<f64>,
    pub wall_time: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

fn run_point(
    index: usize,
    cfg: &ExperimentConfig,
    curve: &BoundaryCurve,
    data: &ProblemData,
    reference: Option<&ReferenceSolution>,
) -> (RunRecord, Option<ErrorReport>) {
    let start = Instant::now();
    let mut record = RunRecord {
        index,
        config: cfg.clone(),
        sources: 0,
        rows: 0,
        cols: 0,
        linf_error: None,
        l2_error: None,
        calibration_constant: None,
        coeff_norm: None,
        residual: None,
        rank_estimate: None,
        condition_number: None,
        wall_time: 0.0,
        error: None,
    };
    let result = (|| -> Result<Option<ErrorReport>> {
        let sol = solve_config(cfg, curve, data)?;
        record.sources = sol.family.len();
        record.rows = sol.system.rows();
        record.cols = sol.system.cols();
        record.coeff_norm = Some(sol.expansion.coeff_norm);
        record.residual = Some(sol.expansion.residual_norm);
        record.rank_estimate = Some(sol.diagnostics.rank_estimate);
        record.condition_number = Some(sol.diagnostics.condition_number());
        let Some(reference) = reference else {
            return Ok(None);
        };
        let options = GridOptions {
            resolution: cfg.grid.resolution,
            quantity: cfg.quantity,
            keep_pointwise: cfg.grid.pointwise_csv,
            calibration: None,
            calibration_scale: cfg.grid.calibration_scale,
        };
        let report = error_grid(&sol.expansion, &sol.family, curve, reference, &options)?;
        record.linf_error = Some(report.linf_error);
        record.l2_error = Some(report.l2_error);
        record.calibration_constant = report.calibration_constant;
        Ok(Some(report))
    })();
    record.wall_time = start.elapsed().as_secs_f64();
    match result {
        Ok(report) => (record, report),
        Err(e) => {
            record.error = Some(e.to_string());
            (record, None)
        }
    }
}

/// Runs every sweep point and, when `out` is given, writes `records.jsonl`,
/// `records.csv` and optional `grid_<i>.csv` there. Failed points are
/// recorded with their error and skipped.
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let curve = config.curve.build()?;
    let data = ProblemData::from_spec(&config.data, &curve)?;
    let points = config.sweep_points();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    if points.is_empty() {
        if let Some(dir) = out {
            write_records(dir, &[])?;
        }
        return Ok(Vec::new());
    }
    let reference = reference_solution(config, &curve, &data, out)?;
    let results: Vec<(RunRecord, Option<ErrorReport>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| run_point(i, cfg, &curve, &data, reference.as_ref()))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    for (record, report) in results {
        if let (Some(dir), Some(report)) = (out, report.as_ref()) {
            if report.pointwise.is_some() {
                report.write_pointwise_csv(BufWriter::new(File::create(
                    dir.join(format!("grid_{}.csv", record.index)),
                )?))?;
            }
        }
        records.push(record);
    }
    if let Some(dir) = out {
        write_records(dir, &records)?;
    }
    Ok(records)
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn write_records(dir: &Path, records: &[RunRecord]) -> Result<()> {
    let mut jsonl = BufWriter::new(File::create(dir.join("records.jsonl"))?);
    for r in records {
        serde_json::to_writer(&mut jsonl, r)?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;
    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    w.write_record([
        "index",
        "sources",
        "rows",
        "cols",
        "m0",
        "linf_error",
        "l2_error",
        "calibration",
        "coeff_norm",
        "residual",
        "rank",
        "condition",
        "wall_time",
        "error",
    ])?;
    for r in records {
        w.write_record([
            r.index.to_string(),
            r.sources.to_string(),
            r.rows.to_string(),
            r.cols.to_string(),
            r.config.m0.to_string(),
            opt(&r.linf_error),
            opt(&r.l2_error),
            opt(&r.calibration_constant),
            opt(&r.coeff_norm),
            opt(&r.residual),
            opt(&r.rank_estimate),
            opt(&r.condition_number),
            r.wall_time.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Monte-Carlo cover check of the configured source set over the band its
/// layers span.
pub fn verify_config(cfg: &ExperimentConfig) -> Result<CoverReport> {
    let curve = cfg.curve.build()?;
    let data = ProblemData::from_spec(&cfg.data, &curve)?;
    let set = build_sources(&cfg.sources, &curve, cfg.eps, &data)?;
    let verify = cfg.verify.clone().unwrap_or(VerifyConfig {
        eps_prime: 1.5 * curve.lipschitz_constant().powi(2) * cfg.eps,
        samples: default_samples(),
    });
    let band = CoverBand::spanned_by(&set)
        .ok_or_else(|| Error::Config("source set spans no exterior band".into()))?;
    verify_cover(
        &set,
        &curve,
        verify.eps_prime,
        band,
        verify.samples.max(MIN_COVER_SAMPLES),
        cfg.seed,
    )
}

/// Convenience for evaluating an expansion at a point set (used by tests
/// and the CLI).
pub fn sample_points(curve: &BoundaryCurve, count: usize, seed: u64) -> Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (x0, x1, y0, y1) = curve.bounding_box();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = Complex64::new(rng.random_range(x0..x1), rng.random_range(y0..y1));
        if crate::field::is_interior(curve, z) && curve.distance(z) > 0.05 {
            out.push(z);
        }
    }
    out
}
