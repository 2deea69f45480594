//! Randomized checks of the numerical building blocks against independent
//! oracles, shared by the property and acceptance targets.

use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use wmfs::assembly::DenseMatrix;
use wmfs::field::{is_interior, ReferenceSolution};
use wmfs::geometry::BoundaryCurve;
use wmfs::quadrature::{GaussRule, Segment};
use wmfs::solver::{min_norm_lstsq, Expansion};
use wmfs::wavelets::{normalize, TraceKind, WaveletFamily};
use wmfs::whitney::{verify_cover, whitney_layers, CoverBand, SourcePoint, SourceSet, SourceTag};

fn curve(index: usize) -> BoundaryCurve {
    match index {
        0 => BoundaryCurve::unit_circle(),
        1 => BoundaryCurve::star(),
        _ => BoundaryCurve::square(),
    }
}

fn exterior_source(curve: &BoundaryCurve, phi: f64, s: f64) -> SourcePoint {
    SourcePoint {
        position: curve.position(phi) * s,
        theta: phi,
        radial_factor: s,
        level: 0,
        tag: SourceTag::Ring,
    }
}

fn single_wavelet(curve: &BoundaryCurve, phi: f64, s: f64) -> WaveletFamily {
    normalize(
        SourceSet::from_points(vec![exterior_source(curve, phi, s)], 0.3),
        curve,
        1,
    )
    .unwrap()
}

fn trace_pair(index: usize) -> (TraceKind, bool) {
    match index {
        0 => (TraceKind::Neumann, false),
        1 => (TraceKind::Neumann, true),
        2 => (TraceKind::DirichletRegularity, false),
        _ => (TraceKind::DirichletRegularity, true),
    }
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        let b_c = b[c];
        let (upper, lower) = a.split_at_mut(c + 1);
        let pivot = &upper[c];
        for (row, rhs) in lower.iter_mut().zip(&mut b[c + 1..]) {
            let f = row[c] / pivot[c];
            for (x, p) in row[c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            *rhs -= f * b_c;
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Runs `test` on `cases` draws from a fixed-seed generator.
fn check<S: Strategy>(
    cases: u32,
    strategy: &S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
        .run(strategy, test)
        .map_err(|e| e.to_string())
}

pub fn gauss_rule_integrates_degree_19_exactly(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(-1.0f64..1.0, 20),
        -2.0f64..1.0,
        0.1f64..3.0,
    );
    check(cases, &strategy, |(coeffs, a, len)| {
        let b = a + len;
        let poly = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let exact: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (b.powi(i as i32 + 1) - a.powi(i as i32 + 1)) / (i as f64 + 1.0))
            .sum();
        let scale: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c.abs() * (b.abs().max(a.abs())).powi(i as i32) * len)
            .sum();
        let got = GaussRule::ten_point().integrate(a, b, poly);
        prop_assert!(
            (got - exact).abs() <= 1e-13 * scale.max(1.0),
            "got {got}, exact {exact}"
        );
        Ok(())
    })
}

/// Closed-form element integrals against a fine composite Gauss rule of
/// `Re(T ψ)` along the curve, relative to `∫|ψ| |dw|` over the element.
pub fn element_integrals_match_refined_quadrature(cases: u32) -> Result<(), String> {
    let strategy = (
        0usize..3,
        -PI..PI,
        1.02f64..2.5,
        0usize..4,
        0.0f64..1.0,
        0.0f64..1.0,
        0usize..4,
    );
    check(
        cases,
        &strategy,
        |(curve_index, phi, s, panel_pick, u0, u1, trace_index)| {
            let curve = curve(curve_index);
            let fam = single_wavelet(&curve, phi, s);
            let panels = curve.corner_panels();
            let (pa, pb) = panels[panel_pick % panels.len()];
            let (lo, hi) = (u0.min(u1), u0.max(u1));
            prop_assume!(hi - lo > 1e-3);
            let (a, b) = (pa + lo * (pb - pa), pa + hi * (pb - pa));
            let seg = Segment::new(a, b);
            let (trace, imaginary) = trace_pair(trace_index);
            let rule = GaussRule::legendre(20);
            let composite = |f: &dyn Fn(f64) -> f64| -> f64 {
                let panels = 2048;
                let h = (b - a) / panels as f64;
                (0..panels)
                    .map(|p| rule.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, f))
                    .sum()
            };
            let integrand = |t: f64| -> f64 {
                let pt = seg.point(&curve, t);
                let mut psi = fam.value(0, pt.position).unwrap();
                if imaginary {
                    psi *= Complex64::i();
                }
                let dir = if trace == TraceKind::Neumann {
                    pt.normal
                } else {
                    pt.tangent
                };
                (dir * psi).re * curve.speed_sided(t, seg.side_at(t))
            };
            let mass_fn = |t: f64| -> f64 {
                let pt = seg.point(&curve, t);
                fam.value(0, pt.position).unwrap().norm() * curve.speed_sided(t, seg.side_at(t))
            };
            let mass = composite(&mass_fn);
            let quad = composite(&integrand);
            let exact = fam.element_inner_product(
                0,
                curve.position(a),
                curve.position(b),
                trace,
                imaginary,
            );
            prop_assert!(
                (exact - quad).abs() <= 1e-10 * mass,
                "exact {exact} quad {quad} mass {mass}"
            );
            Ok(())
        },
    )
}

pub fn element_integrals_telescope_over_closed_partitions(cases: u32) -> Result<(), String> {
    let strategy = (
        0usize..3,
        -PI..PI,
        1.02f64..3.0,
        prop::collection::vec(-PI..PI, 1..200),
        0usize..4,
    );
    check(
        cases,
        &strategy,
        |(curve_index, phi, s, cuts, trace_index)| {
            let curve = curve(curve_index);
            let fam = single_wavelet(&curve, phi, s);
            let (trace, imaginary) = trace_pair(trace_index);
            let mut angles = cuts;
            angles.push(-PI);
            angles.push(PI);
            angles.sort_by(f64::total_cmp);
            let sum: f64 = angles
                .windows(2)
                .map(|w| {
                    fam.element_inner_product(
                        0,
                        curve.position(w[0]),
                        curve.position(w[1]),
                        trace,
                        imaginary,
                    )
                })
                .sum();
            let scale = fam.norms()[0] / curve.distance(fam.source(0));
            prop_assert!(sum.abs() <= 1e-11 * scale, "sum {sum} scale {scale}");
            Ok(())
        },
    )
}

/// `∫|ψ|² |dw| = 1` by a uniform composite rule with no source-aware
/// refinement.
pub fn normalized_wavelets_have_unit_norm(cases: u32) -> Result<(), String> {
    let strategy = (0usize..3, -PI..PI, 1.05f64..3.0);
    check(cases, &strategy, |(curve_index, phi, s)| {
        let curve = curve(curve_index);
        let fam = single_wavelet(&curve, phi, s);
        let rule = GaussRule::legendre(20);
        let mut total = 0.0;
        for (a, b) in curve.corner_panels() {
            let panels = 2048;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let seg = Segment::new(a + p as f64 * h, a + (p + 1) as f64 * h);
                total += rule.integrate(seg.theta_start, seg.theta_end, |t| {
                    let pt = seg.point(&curve, t);
                    fam.value(0, pt.position).unwrap().norm_sqr()
                        * curve.speed_sided(t, seg.side_at(t))
                });
            }
        }
        prop_assert!((total - 1.0).abs() <= 1e-6, "norm² {total}");
        Ok(())
    })
}

/// Up to 200 jittered sources whose distance from the curve is comparable to
/// their angular spacing. Tighter families are independent too,
/// but their Gram spectrum drops below double-precision roundoff.
pub fn gram_of_distinct_sources_is_positive_definite(cases: u32) -> Result<(), String> {
    let strategy = (
        0usize..3,
        2usize..=200,
        0.5f64..1.0,
        prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 200),
    );
    check(cases, &strategy, |(curve_index, n, ratio, jitter)| {
        let curve = curve(curve_index);
        let gap = ratio * 2.0 * PI / n as f64;
        let pts: Vec<SourcePoint> = (0..n)
            .map(|i| {
                let (u, v) = jitter[i];
                let phi = -PI + 2.0 * PI * (i as f64 + 0.25 * u) / n as f64;
                exterior_source(&curve, phi, 1.0 + gap * (1.0 + 0.25 * v))
            })
            .collect();
        let fam = normalize(SourceSet::from_points(pts, 0.3), &curve, 1).unwrap();
        let gram = fam.independence_gram(&curve).unwrap();
        for i in 0..gram.size() {
            prop_assert!((gram.get(i, i).re - 1.0).abs() < 1e-8);
        }
        let ev = gram.eigenvalues().unwrap();
        prop_assert!(ev[0] > 0.0, "n {n}: smallest eigenvalue {}", ev[0]);
        Ok(())
    })
}

pub fn min_norm_solve_matches_dense_oracle(cases: u32) -> Result<(), String> {
    let strategy = (
        prop::collection::vec(-1.0f64..1.0, 160),
        prop::collection::vec(-1.0f64..1.0, 20),
        any::<bool>(),
    );
    check(cases, &strategy, |(entries, rhs, wide)| {
        let (m, n) = if wide { (8, 20) } else { (20, 8) };
        let a = DenseMatrix::from_row_major(m, n, entries.clone()).unwrap();
        let b = &rhs[..m];
        let at = |i: usize, j: usize| entries[i * n + j];
        let oracle = if wide {
            // x = Aᵀ (A Aᵀ)⁻¹ b
            let aat: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| (0..n).map(|k| at(i, k) * at(j, k)).sum())
                        .collect()
                })
                .collect();
            let y = gauss_solve(aat, b.to_vec());
            (0..n)
                .map(|k| (0..m).map(|i| at(i, k) * y[i]).sum())
                .collect::<Vec<f64>>()
        } else {
            // x = (AᵀA)⁻¹ Aᵀ b
            let ata: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..m).map(|k| at(k, i) * at(k, j)).sum())
                        .collect()
                })
                .collect();
            let atb: Vec<f64> = (0..n)
                .map(|i| (0..m).map(|k| at(k, i) * b[k]).sum())
                .collect();
            gauss_solve(ata, atb)
        };
        let (x, diag) = min_norm_lstsq(&a, b).unwrap();
        prop_assume!(diag.condition_number() < 1e4);
        let scale = oracle.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for (got, want) in x.coefficients.iter().zip(&oracle) {
            prop_assert!((got - want).abs() <= 1e-10 * scale, "got {got} want {want}");
        }
        Ok(())
    })
}

/// Layer sets with `3ε/2 ≤ 1/4` on the unit circle are covered with a
/// bounded covering constant.
pub fn fine_layer_sets_cover_their_band(cases: u32) -> Result<(), String> {
    let strategy = (0.05f64..(1.0 / 6.0), 1u32..4, any::<u64>());
    check(cases, &strategy, |(eps, last, seed)| {
        let circle = BoundaryCurve::unit_circle();
        let set = whitney_layers(&circle, eps, 0, last).unwrap();
        let band = CoverBand::spanned_by(&set).unwrap();
        let report = verify_cover(&set, &circle, 1.5 * eps, band, 10_000, seed).unwrap();
        prop_assert!(report.covered, "{report:?}");
        prop_assert!(report.covering_constant_estimate >= 1);
        prop_assert!(report.covering_constant_estimate <= 3 * 40 * 40);
        Ok(())
    })
}

pub fn evaluated_field_satisfies_cauchy_riemann(cases: u32) -> Result<(), String> {
    let strategy = (
        0usize..3,
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 42),
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20),
    );
    check(cases, &strategy, |(curve_index, coeffs, probes)| {
        let curve = curve(curve_index);
        let fam = normalize(whitney_layers(&curve, 0.3, 0, 0).unwrap(), &curve, 1).unwrap();
        let c: Vec<Complex64> = coeffs
            .iter()
            .take(fam.len())
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        let (x0, x1, y0, y1) = curve.bounding_box();
        let points: Vec<Complex64> = probes
            .iter()
            .map(|&(u, v)| {
                Complex64::new(
                    x0 + 0.5 * (u + 1.0) * (x1 - x0),
                    y0 + 0.5 * (v + 1.0) * (y1 - y0),
                )
            })
            .filter(|&z| is_interior(&curve, z) && curve.distance(z) > 0.05)
            .collect();
        let reference = ReferenceSolution::Numerical {
            expansion: Expansion::from_complex(&c),
            family: fam,
        };
        let residual = reference.cauchy_riemann_residual(&points, 1e-5).unwrap();
        prop_assert!(residual <= 1e-6, "residual {residual}");
        Ok(())
    })
}

pub type Property = fn(u32) -> Result<(), String>;

/// Every property with its default case count.
pub const ALL: &[(&str, Property, u32)] = &[
    (
        "gauss_rule_integrates_degree_19_exactly",
        gauss_rule_integrates_degree_19_exactly,
        256,
    ),
    (
        "element_integrals_match_refined_quadrature",
        element_integrals_match_refined_quadrature,
        100,
    ),
    (
        "element_integrals_telescope_over_closed_partitions",
        element_integrals_telescope_over_closed_partitions,
        256,
    ),
    (
        "normalized_wavelets_have_unit_norm",
        normalized_wavelets_have_unit_norm,
        24,
    ),
    (
        "gram_of_distinct_sources_is_positive_definite",
        gram_of_distinct_sources_is_positive_definite,
        16,
    ),
    (
        "min_norm_solve_matches_dense_oracle",
        min_norm_solve_matches_dense_oracle,
        256,
    ),
    (
        "fine_layer_sets_cover_their_band",
        fine_layer_sets_cover_their_band,
        8,
    ),
    (
        "evaluated_field_satisfies_cauchy_riemann",
        evaluated_field_satisfies_cauchy_riemann,
        32,
    ),
];
