//! Source-point sets: truncated Whitney layers, cone refinements at boundary
//! singularities, classical MFS rings, and a Monte-Carlo Whitney-cover check.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, BoundaryCurve, Side};

/// Where a source point came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Layer,
    /// Cone number within the set.
    Cone(u32),
    Ring,
}

impl SourceTag {
    pub fn label(&self) -> String {
        match self {
            SourceTag::Layer => "layer".into(),
            SourceTag::Cone(i) => format!("cone{i}"),
            SourceTag::Ring => "mfs".into(),
        }
    }
}

/// A source `q = s·r(θ)e^{iθ}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourcePoint {
    pub position: Complex64,
    pub theta: f64,
    pub radial_factor: f64,
    /// Layer index `l` for layers, level `m` for cones, 0 for rings.
    pub level: u32,
    pub tag: SourceTag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub layer: u32,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceSet {
    points: Vec<SourcePoint>,
    fineness: f64,
    layer_counts: Vec<LayerCount>,
}

impl SourceSet {
    pub fn from_points(points: Vec<SourcePoint>, fineness: f64) -> Self {
        SourceSet {
            points,
            fineness,
            layer_counts: Vec::new(),
        }
    }

    pub fn points(&self) -> &[SourcePoint] {
        &self.points
    }

    pub fn positions(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.points.iter().map(|p| p.position)
    }

    /// `s_N`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn fineness(&self) -> f64 {
        self.fineness
    }

    /// `n_l` for every generated layer.
    pub fn layer_counts(&self) -> &[LayerCount] {
        &self.layer_counts
    }

    pub fn cone_count(&self) -> usize {
        self.points
            .iter()
            .filter(|p| matches!(p.tag, SourceTag::Cone(_)))
            .count()
    }

    /// Appends `other`, renumbering its cones after the ones already present.
    pub fn extend(&mut self, other: SourceSet) {
        let offset = self
            .points
            .iter()
            .filter_map(|p| match p.tag {
                SourceTag::Cone(i) => Some(i + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        self.points.extend(other.points.into_iter().map(|mut p| {
            if let SourceTag::Cone(i) = p.tag {
                p.tag = SourceTag::Cone(i + offset);
            }
            p
        }));
        self.layer_counts.extend(other.layer_counts);
        if self.fineness == 0.0 {
            self.fineness = other.fineness;
        }
    }

    /// CSV with columns `re, im, layer, tag`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["re", "im", "layer", "tag"])?;
        for p in &self.points {
            w.write_record([
                p.position.re.to_string(),
                p.position.im.to_string(),
                p.level.to_string(),
                p.tag.label(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_fineness(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::Parameter(format!(
            "fineness must lie in (0, 1/2], got {eps}"
        )));
    }
    Ok(())
}

/// `n_l = ⌈2π ε⁻¹ (1 + (1+ε)^l)⌉`.
pub fn layer_count(eps: f64, layer: u32) -> usize {
    (TAU / eps * (1.0 + (1.0 + eps).powi(layer as i32))).ceil() as usize
}

fn layered(
    curve: &BoundaryCurve,
    eps: f64,
    layers: std::ops::RangeInclusive<u32>,
    factor: impl Fn(u32) -> f64,
) -> SourceSet {
    let mut points = Vec::new();
    let mut layer_counts = Vec::new();
    for l in layers {
        let n = layer_count(eps, l);
        let s = factor(l);
        for j in 1..=n {
            let theta = wrap_angle(-PI + TAU * j as f64 / n as f64);
            points.push(SourcePoint {
                position: Complex64::from_polar(s * curve.radius(theta), theta),
                theta,
                radial_factor: s,
                level: l,
                tag: SourceTag::Layer,
            });
        }
        layer_counts.push(LayerCount { layer: l, count: n });
    }
    SourceSet {
        points,
        fineness: eps,
        layer_counts,
    }
}

/// Exterior layers `q_{j,l} = (1 + (1+ε)^{-l}) r(θ_{j,l}) e^{iθ_{j,l}}` with
/// `θ_{j,l} = -π + 2πj/n_l`, for `l = first..=last`, layer-major.
pub fn whitney_layers(curve: &BoundaryCurve, eps: f64, first: u32, last: u32) -> Result<SourceSet> {
    check_fineness(eps)?;
    if first > last {
        return Err(Error::Parameter(format!(
            "first layer {first} exceeds last layer {last}"
        )));
    }
    Ok(layered(curve, eps, first..=last, |l| {
        1.0 + (1.0 + eps).powi(-(l as i32))
    }))
}

/// Interior layers with radial factor `1 - (1+ε)^{-l}`, `l ≥ 1`.
pub fn interior_whitney_layers(
    curve: &BoundaryCurve,
    eps: f64,
    first: u32,
    last: u32,
) -> Result<SourceSet> {
    check_fineness(eps)?;
    if first == 0 {
        return Err(Error::Parameter("interior layers start at l = 1".into()));
    }
    if first > last {
        return Err(Error::Parameter(format!(
            "first layer {first} exceeds last layer {last}"
        )));
    }
    Ok(layered(curve, eps, first..=last, |l| {
        1.0 - (1.0 + eps).powi(-(l as i32))
    }))
}

/// Geometry of a cone of sources opening out of the domain at a boundary
/// point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeRule {
    /// Half opening angle around the outward direction.
    pub half_angle: f64,
    /// Base radius; level `m` sits at `rho0 (1+ε)^{-m}` from the apex.
    pub rho0: f64,
}

pub const DEFAULT_CONE_HALF_ANGLE: f64 = PI / 3.0;

/// Points per cone level, `⌈2α/ε⌉`.
pub fn cone_level_count(half_angle: f64, eps: f64) -> usize {
    (2.0 * half_angle / eps).ceil() as usize
}

/// Sources in a cone with apex on the curve.
///
/// Level `m = 1..=levels` is an arc of radius `ρ_m = ρ_0 (1+ε)^{-m}` about the
/// apex, centred on the outward normal (the bisector of the two one-sided
/// normals at a corner) and spanning `±half_angle`, with `⌈2α/ε⌉` points at
/// arc spacing about `ε ρ_m`.
pub fn cone_points(
    curve: &BoundaryCurve,
    apex: Complex64,
    levels: u32,
    rule: &ConeRule,
    eps: f64,
) -> Result<SourceSet> {
    check_fineness(eps)?;
    if !(rule.half_angle > 0.0 && rule.half_angle < PI / 2.0) {
        return Err(Error::Parameter(format!(
            "cone half angle must lie in (0, pi/2), got {}",
            rule.half_angle
        )));
    }
    if !(rule.rho0 > 0.0 && rule.rho0.is_finite()) {
        return Err(Error::Parameter(format!(
            "cone base radius must be positive, got {}",
            rule.rho0
        )));
    }
    let apex_distance = curve.distance(apex);
    if apex_distance > 1e-10 {
        return Err(Error::Parameter(format!(
            "cone apex is {apex_distance:e} away from the curve"
        )));
    }
    let theta_a = wrap_angle(apex.arg());
    let direction = if curve.is_corner(theta_a) {
        let (_, left) = curve.frame_sided(theta_a, Side::Left);
        let (_, right) = curve.frame_sided(theta_a, Side::Right);
        let b = left + right;
        b / b.norm()
    } else {
        curve.frame_sided(theta_a, Side::Right).1
    };
    let per_level = cone_level_count(rule.half_angle, eps);
    let mut points = Vec::with_capacity(per_level * levels as usize);
    for m in 1..=levels {
        let rho = rule.rho0 * (1.0 + eps).powi(-(m as i32));
        for i in 0..per_level {
            let phi =
                -rule.half_angle + 2.0 * rule.half_angle * (i as f64 + 0.5) / per_level as f64;
            let q = apex + direction * Complex64::from_polar(rho, phi);
            let (theta, s) = curve.radial_factor(q);
            if s <= 1.0 || curve.distance(q) < 0.05 * rho {
                return Err(Error::Parameter(format!(
                    "cone point at level {m} falls inside or too close to the curve; reduce the half angle"
                )));
            }
            points.push(SourcePoint {
                position: q,
                theta,
                radial_factor: s,
                level: m,
                tag: SourceTag::Cone(0),
            });
        }
    }
    Ok(SourceSet {
        points,
        fineness: eps,
        layer_counts: Vec::new(),
    })
}

/// Classical MFS sources `q_j = r_MFS r(2πj/s_N) e^{i2πj/s_N}`, `j = 1..=s_N`.
pub fn mfs_ring(curve: &BoundaryCurve, count: usize, r_mfs: f64) -> Result<SourceSet> {
    if !(r_mfs > 1.0 && r_mfs.is_finite()) {
        return Err(Error::Parameter(format!(
            "MFS radial factor must exceed 1, got {r_mfs}"
        )));
    }
    if count == 0 {
        return Err(Error::Parameter(
            "MFS ring needs at least one source".into(),
        ));
    }
    let points = (1..=count)
        .map(|j| {
            let t = TAU * j as f64 / count as f64;
            SourcePoint {
                position: Complex64::from_polar(r_mfs * curve.radius(t), t),
                theta: wrap_angle(t),
                radial_factor: r_mfs,
                level: 0,
                tag: SourceTag::Ring,
            }
        })
        .collect();
    Ok(SourceSet {
        points,
        fineness: 0.0,
        layer_counts: Vec::new(),
    })
}

/// Sampling region for [`verify_cover`]: exterior points `s·r(θ)e^{iθ}` with
/// `s - 1` in `[inner, outer]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverBand {
    pub inner: f64,
    pub outer: f64,
}

impl CoverBand {
    /// The band spanned by a layered set: from the innermost to the
    /// outermost layer.
    pub fn spanned_by(set: &SourceSet) -> Option<CoverBand> {
        let excess = set.points().iter().map(|p| p.radial_factor - 1.0);
        let inner = excess.clone().fold(f64::INFINITY, f64::min);
        let outer = excess.fold(f64::NEG_INFINITY, f64::max);
        (inner.is_finite() && inner > 0.0).then_some(CoverBand { inner, outer })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    /// Largest number of balls containing a single sample.
    pub covering_constant_estimate: usize,
    pub fineness_checked: f64,
    pub covered: bool,
    pub sample_count: usize,
    pub uncovered_count: usize,
}

pub const MIN_COVER_SAMPLES: usize = 10_000;

/// Monte-Carlo check of the Whitney conditions for balls
/// `B(q_j, ε'·d(q_j))` over the band.
pub fn verify_cover(
    set: &SourceSet,
    curve: &BoundaryCurve,
    eps_prime: f64,
    band: CoverBand,
    samples: usize,
    seed: u64,
) -> Result<CoverReport> {
    if samples < MIN_COVER_SAMPLES {
        return Err(Error::Parameter(format!(
            "need at least {MIN_COVER_SAMPLES} samples, got {samples}"
        )));
    }
    if !(band.inner >= 0.0 && band.outer > band.inner) {
        return Err(Error::Parameter(format!(
            "invalid cover band [{}, {}]",
            band.inner, band.outer
        )));
    }
    let balls: Vec<(Complex64, f64)> = set
        .positions()
        .map(|q| {
            let r = eps_prime * curve.distance(q);
            (q, r * r)
        })
        .collect();

    let (r_min, r_max) = curve_radius_range(curve);
    let annulus = ((1.0 + band.inner) * r_min, (1.0 + band.outer) * r_max);
    const CHUNK: usize = 4096;
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<(usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let n = CHUNK.min(samples - c * CHUNK);
            let (mut max_count, mut uncovered) = (0usize, 0usize);
            let mut drawn = 0;
            while drawn < n {
                let z = sample_annulus(&mut rng, annulus);
                let (_, s) = curve.radial_factor(z);
                if !(s - 1.0 >= band.inner && s - 1.0 <= band.outer) {
                    continue;
                }
                drawn += 1;
                let count = balls
                    .iter()
                    .filter(|(q, r2)| (z - q).norm_sqr() < *r2)
                    .count();
                max_count = max_count.max(count);
                if count == 0 {
                    uncovered += 1;
                }
            }
            (max_count, uncovered)
        })
        .collect();
    let covering_constant_estimate = per_chunk.iter().map(|c| c.0).max().unwrap_or(0);
    let uncovered_count = per_chunk.iter().map(|c| c.1).sum();
    Ok(CoverReport {
        covering_constant_estimate,
        fineness_checked: eps_prime,
        covered: uncovered_count == 0,
        sample_count: samples,
        uncovered_count,
    })
}

fn curve_radius_range(curve: &BoundaryCurve) -> (f64, f64) {
    (0..4096)
        .map(|i| curve.radius(-PI + TAU * i as f64 / 4096.0))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        })
}

fn sample_annulus(rng: &mut impl Rng, (r1, r2): (f64, f64)) -> Complex64 {
    let u: f64 = rng.random();
    let phi: f64 = rng.random_range(-PI..PI);
    let r = (r1 * r1 + u * (r2 * r2 - r1 * r1)).sqrt();
    Complex64::from_polar(r, phi)
}
