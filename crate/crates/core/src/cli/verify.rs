//! The property suite behind `weylstrat verify`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometries::{catalog_entry, sphere_to_stereographic, GeometryCatalogEntry, Params, CATALOG};
use crate::homogeneity::{
    killing_residual, killing_tangency_check, ptv_test, HomogeneityError, VectorFieldExpr, DEFAULT_CONSTANCY_TOLERANCE,
};
use crate::tensor::{CurvatureOptions, MetricChart, PointCurvature, TensorError};
use crate::weyl::{console_olmos_map, enumerate_invariants, InvariantCaps, SampleGrid, WeylEvaluator};

/// Environment variable overriding the finite-difference oracle tolerance.
pub const FD_TOLERANCE_ENV: &str = "WEYLSTRAT_FD_TOL";

pub const SYMMETRY_TOLERANCE: f64 = 1e-9;
pub const FIRST_BIANCHI_TOLERANCE: f64 = 1e-9;
pub const SECOND_BIANCHI_TOLERANCE: f64 = 1e-8;
pub const METRIC_COMPATIBILITY_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_FD_TOLERANCE: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-4;
pub const CHART_TOLERANCE: f64 = 1e-8;
pub const KILLING_RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const TANGENCY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// random points per chart for the pointwise identities
    pub points: usize,
    /// random points per chart for the finite-difference oracles
    pub oracle_points: usize,
    pub fd_tolerance: f64,
    /// Test-only: corrupts the curvature by flipping the sign of its
    /// quadratic Christoffel terms.
    pub corrupt_sign: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 1, points: 50, oracle_points: 10, fd_tolerance: DEFAULT_FD_TOLERANCE, corrupt_sign: false }
    }
}

impl VerifyOptions {
    /// Defaults, with the oracle tolerance taken from [`FD_TOLERANCE_ENV`]
    /// when set.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(tol) = std::env::var(FD_TOLERANCE_ENV).ok().and_then(|s| s.trim().parse().ok()) {
            o.fd_tolerance = tol;
        }
        o
    }

    fn curvature_options(&self) -> CurvatureOptions {
        CurvatureOptions { flip_quadratic_terms: self.corrupt_sign }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    /// worst observed value against the threshold, or the failure
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub results: Vec<PropertyResult>,
}

impl VerifySummary {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for VerifySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(0);
        for r in &self.results {
            writeln!(f, "{:<width$}  {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail)?;
        }
        let passed = self.results.iter().filter(|r| r.passed).count();
        write!(f, "{passed}/{} properties passed", self.results.len())
    }
}

pub const PROPERTIES: &[&str] = &[
    "curvature symmetries",
    "Bianchi identities",
    "metric compatibility",
    "finite-difference oracles",
    "chart independence",
    "catalog verdicts",
    "Killing fields",
];

/// Runs every property in [`PROPERTIES`].
pub fn verify_suite(options: &VerifyOptions) -> VerifySummary {
    VerifySummary { results: PROPERTIES.iter().map(|p| run_property(p, options)).collect() }
}

/// Runs one named property; unknown names fail.
pub fn run_property(name: &str, options: &VerifyOptions) -> PropertyResult {
    let outcome = match name {
        "curvature symmetries" => symmetries(options),
        "Bianchi identities" => bianchi(options),
        "metric compatibility" => metric_compatibility(options),
        "finite-difference oracles" => fd_oracles(options),
        "chart independence" => chart_independence(options),
        "catalog verdicts" => catalog_verdicts(),
        "Killing fields" => killing_fields(),
        _ => Err(format!("no property named `{name}`")),
    };
    let name = PROPERTIES.iter().copied().find(|p| *p == name).unwrap_or("unknown");
    match outcome {
        Ok(detail) => PropertyResult { name, passed: true, detail },
        Err(detail) => PropertyResult { name, passed: false, detail },
    }
}

type Check = Result<String, String>;

fn catalog() -> Result<Vec<GeometryCatalogEntry>, String> {
    CATALOG.iter().map(|(name, _)| catalog_entry(name, &Params::new()).map_err(|e| e.to_string())).collect()
}

/// Uniform random points inside the sampling box, pulled in from the edges
/// by `pad` of each width.
pub fn random_points(chart: &MetricChart, count: usize, pad: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let box_ = chart.interior();
    (0..count)
        .map(|_| {
            box_.iter()
                .map(|iv| {
                    let iv = iv.shrink(pad);
                    rng.random_range(iv.lo..iv.hi)
                })
                .collect()
        })
        .collect()
}

fn ratio(residual: f64, scale: f64) -> f64 {
    if residual == 0.0 {
        0.0
    } else {
        residual / scale
    }
}

/// Worst value of `measure` over random points of every catalog chart,
/// compared against `tol`.
fn over_catalog(
    options: &VerifyOptions,
    order: usize,
    tol: f64,
    measure: impl Fn(&PointCurvature) -> f64,
) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst = (0.0f64, String::new());
    for entry in catalog()? {
        for cc in &entry.charts {
            let ev = WeylEvaluator::with_options(&cc.chart, order, options.curvature_options()).map_err(|e| e.to_string())?;
            for p in random_points(&cc.chart, options.points, 0.0, &mut rng) {
                let pc = ev.curvature_at(&p).map_err(|e| format!("{} at {p:?}: {e}", cc.chart.label()))?;
                let v = measure(&pc);
                if !(v <= worst.0) {
                    worst = (v, format!("{} at {p:?}", cc.chart.label()));
                }
            }
        }
    }
    if worst.0 < tol {
        Ok(format!("max {:.2e} < {tol:e}", worst.0))
    } else {
        Err(format!("{:.2e} >= {tol:e} on {}", worst.0, worst.1))
    }
}

/// Largest relative violation of `R_lkij = −R_lkji = −R_klij = R_ijlk`.
pub fn symmetry_residual(pc: &PointCurvature) -> f64 {
    let r = &pc.nabla_riemann[0];
    let n = pc.dim();
    let mut worst = 0.0f64;
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = r.get(&[l, k, i, j]);
                    worst = worst
                        .max((v + r.get(&[l, k, j, i])).abs())
                        .max((v + r.get(&[k, l, i, j])).abs())
                        .max((v - r.get(&[i, j, l, k])).abs());
                }
            }
        }
    }
    ratio(worst, r.max_abs())
}

/// `R^l_kij + R^l_ijk + R^l_jki`, relative to `‖R‖`.
pub fn first_bianchi_residual(pc: &PointCurvature) -> f64 {
    let r = &pc.riemann;
    let n = pc.dim();
    let mut worst = 0.0f64;
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let s = r.get(&[l, k, i, j]) + r.get(&[l, i, j, k]) + r.get(&[l, j, k, i]);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    ratio(worst, r.max_abs())
}

/// `∇_m R_lkij + ∇_i R_lkjm + ∇_j R_lkmi`, relative to `‖R‖ + ‖∇R‖` so that
/// locally symmetric spaces, where `∇R` vanishes, are measured sensibly.
pub fn second_bianchi_residual(pc: &PointCurvature) -> f64 {
    let d = &pc.nabla_riemann[1];
    let n = pc.dim();
    let mut worst = 0.0f64;
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for m in 0..n {
                        let s = d.get(&[l, k, i, j, m]) + d.get(&[l, k, j, m, i]) + d.get(&[l, k, m, i, j]);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
    }
    ratio(worst, d.max_abs() + pc.nabla_riemann[0].max_abs())
}

fn symmetries(options: &VerifyOptions) -> Check {
    over_catalog(options, 0, SYMMETRY_TOLERANCE, symmetry_residual)
}

fn bianchi(options: &VerifyOptions) -> Check {
    let first = over_catalog(options, 1, FIRST_BIANCHI_TOLERANCE, first_bianchi_residual).map_err(|e| format!("first: {e}"))?;
    let second = over_catalog(options, 1, SECOND_BIANCHI_TOLERANCE, second_bianchi_residual).map_err(|e| format!("second: {e}"))?;
    Ok(format!("first {first}; second {second}"))
}

fn metric_compatibility(options: &VerifyOptions) -> Check {
    over_catalog(options, 0, METRIC_COMPATIBILITY_TOLERANCE, |pc| {
        ratio(pc.nabla_metric.max_abs(), pc.metric.amax().max(1.0))
    })
}

/// `(f(x + h e_a) − f(x − h e_a)) / 2h` at `h` and `h/2`, combined by
/// Richardson extrapolation.
fn richardson<F>(f: &F, x: &[f64], a: usize, h: f64) -> Result<Vec<f64>, TensorError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, TensorError>,
{
    let central = |h: f64| -> Result<Vec<f64>, TensorError> {
        let mut y = x.to_vec();
        y[a] = x[a] + h;
        let plus = f(&y)?;
        y[a] = x[a] - h;
        let minus = f(&y)?;
        Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// `Γ^k_ij` from differenced metric values, flattened `[k, i, j]`.
pub fn fd_christoffel(chart: &MetricChart, x: &[f64], h: f64) -> Result<Vec<f64>, TensorError> {
    let n = chart.dim();
    let metric = |p: &[f64]| chart.metric_at(p).map(|g| g.as_slice().to_vec());
    let dg: Vec<Vec<f64>> = (0..n).map(|a| richardson(&metric, x, a, h)).collect::<Result<_, _>>()?;
    let g = chart.metric_at(x)?;
    let ginv = g.try_inverse().ok_or(TensorError::SingularMetric { point: x.to_vec(), determinant: 0.0 })?;
    // nalgebra storage is column-major; g is symmetric so dg[a][i + n j] = ∂_a g_ij
    let d = |a: usize, i: usize, j: usize| dg[a][i + n * j];
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gamma[(k * n + i) * n + j] =
                    0.5 * (0..n).map(|l| ginv[(k, l)] * (d(i, l, j) + d(j, l, i) - d(l, i, j))).sum::<f64>();
            }
        }
    }
    Ok(gamma)
}

/// `R^l_kij` by differencing [`fd_christoffel`], flattened `[l, k, i, j]`.
///
/// The inner differences use `10 h`: roundoff from the inner level is
/// divided by `h` again at the outer level, while the extrapolated
/// truncation error of the inner level is only `O(h⁴)`.
pub fn fd_riemann(chart: &MetricChart, x: &[f64], h: f64) -> Result<Vec<f64>, TensorError> {
    let n = chart.dim();
    let gam = |p: &[f64]| fd_christoffel(chart, p, 10.0 * h);
    let dgam: Vec<Vec<f64>> = (0..n).map(|a| richardson(&gam, x, a, h)).collect::<Result<_, _>>()?;
    let g0 = gam(x)?;
    let c = |k: usize, i: usize, j: usize| g0[(k * n + i) * n + j];
    let dc = |a: usize, k: usize, i: usize, j: usize| dgam[a][(k * n + i) * n + j];
    let mut r = vec![0.0; n.pow(4)];
    for l in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut v = dc(i, l, j, k) - dc(j, l, i, k);
                    for m in 0..n {
                        v += c(l, i, m) * c(m, j, k) - c(l, j, m) * c(m, i, k);
                    }
                    r[((l * n + k) * n + i) * n + j] = v;
                }
            }
        }
    }
    Ok(r)
}

/// `g^kj R^i_kij` from a flattened `R^l_kij`.
pub fn scalar_from_riemann(ginv: &DMatrix<f64>, r: &[f64]) -> f64 {
    let n = ginv.nrows();
    let mut s = 0.0;
    for k in 0..n {
        for j in 0..n {
            let ric: f64 = (0..n).map(|i| r[((i * n + k) * n + i) * n + j]).sum();
            s += ginv[(k, j)] * ric;
        }
    }
    s
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_oracles(options: &VerifyOptions) -> Check {
    let tol = options.fd_tolerance;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xfd);
    let mut worst = (0.0f64, String::new());
    for entry in catalog()? {
        for cc in &entry.charts {
            let chart = &cc.chart;
            let ev = WeylEvaluator::with_options(chart, 0, options.curvature_options()).map_err(|e| e.to_string())?;
            // keep the nested stencils, which reach 11h from the point, inside the domain
            let pad = 20.0 * FD_STEP / chart.interior().iter().map(|iv| iv.width()).fold(f64::INFINITY, f64::min);
            for p in random_points(chart, options.oracle_points, pad, &mut rng) {
                let pc = ev.curvature_at(&p).map_err(|e| e.to_string())?;
                let gamma = fd_christoffel(chart, &p, FD_STEP).map_err(|e| e.to_string())?;
                let riemann = fd_riemann(chart, &p, FD_STEP).map_err(|e| e.to_string())?;
                let scal = scalar_from_riemann(&pc.inverse, &riemann);
                let exact_scal = scalar_from_riemann(&pc.inverse, pc.riemann.data());
                let errs = [
                    ("Γ", max_diff(&gamma, pc.christoffel.data()) / max_abs(pc.christoffel.data()).max(1.0)),
                    ("R", max_diff(&riemann, pc.riemann.data()) / max_abs(pc.riemann.data()).max(1.0)),
                    ("scal", (scal - exact_scal).abs() / exact_scal.abs().max(1.0)),
                ];
                for (what, e) in errs {
                    if !(e <= worst.0) {
                        worst = (e, format!("{what} on {} at {p:?}", chart.label()));
                    }
                }
            }
        }
    }
    if worst.0 < tol {
        Ok(format!("max rel. err {:.2e} < {tol:e} ({})", worst.0, worst.1))
    } else {
        Err(format!("rel. err {:.2e} >= {tol:e} ({})", worst.0, worst.1))
    }
}

fn chart_independence(options: &VerifyOptions) -> Check {
    let entry = catalog_entry("sphere2", &Params::new()).map_err(|e| e.to_string())?;
    let (spherical, stereo) = (&entry.charts[0].chart, &entry.charts[1].chart);
    let caps = InvariantCaps::default_for(2);
    let specs = enumerate_invariants(2, caps.max_order, caps.max_factors);
    let ea = WeylEvaluator::with_options(spherical, caps.max_order, options.curvature_options()).map_err(|e| e.to_string())?;
    let eb = WeylEvaluator::with_options(stereo, caps.max_order, options.curvature_options()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xc4a7);
    let mut worst = 0.0f64;
    let mut compared = 0;
    while compared < 100 {
        let p = random_points(spherical, 1, 0.0, &mut rng).remove(0);
        let q = sphere_to_stereographic(p[0], p[1]);
        if !stereo.contains(&q) {
            continue;
        }
        let a = ea.evaluate(&specs, &p).map_err(|e| e.to_string())?;
        let b = eb.evaluate(&specs, &q).map_err(|e| e.to_string())?;
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs() / (1.0 + y.abs()));
        }
        compared += 1;
    }
    if worst < CHART_TOLERANCE {
        Ok(format!("{} invariants at 100 points, max rel. err {worst:.2e}", specs.len()))
    } else {
        Err(format!("rel. err {worst:.2e} >= {CHART_TOLERANCE:e}"))
    }
}

/// Small grids: the verdicts do not need resolution, only coverage.
fn check_density(n: usize) -> usize {
    match n {
        0..=2 => 12,
        3 => 6,
        _ => 4,
    }
}

fn catalog_verdicts() -> Check {
    let mut checked = Vec::new();
    for entry in catalog()? {
        let Some(expected) = entry.expected_verdict else { continue };
        for cc in &entry.charts {
            let n = cc.chart.dim();
            let caps = InvariantCaps::default_for(n);
            let specs = enumerate_invariants(n, caps.max_order, caps.max_factors);
            let grid = SampleGrid::new(&cc.chart, check_density(n));
            let field = console_olmos_map(&cc.chart, &specs, &grid).map_err(|e| e.to_string())?;
            let report = ptv_test(&field, DEFAULT_CONSTANCY_TOLERANCE).map_err(|e| e.to_string())?;
            if report.verdict != expected {
                return Err(format!("{}: got {}, expected {expected}", cc.chart.label(), report.verdict));
            }
            checked.push(cc.chart.label().to_string());
        }
    }
    Ok(format!("{} charts as expected", checked.len()))
}

fn killing_fields() -> Check {
    let mut worst_residual = 0.0f64;
    let mut worst_tangency = 0.0f64;
    let mut count = 0;
    for entry in catalog()? {
        for cc in &entry.charts {
            if cc.killing_fields.is_empty() {
                continue;
            }
            let n = cc.chart.dim();
            let caps = InvariantCaps::default_for(n);
            let specs = enumerate_invariants(n, caps.max_order, caps.max_factors);
            let per_axis = if n <= 2 { 8 } else if n == 3 { 4 } else { 2 };
            let grid = SampleGrid::new(&cc.chart, per_axis);
            let field = console_olmos_map(&cc.chart, &specs, &grid).map_err(|e| e.to_string())?;
            for kf in &cc.killing_fields {
                let residual = max_killing_residual(&cc.chart, &kf.field, &SampleGrid::new(&cc.chart, 6))?;
                if !(residual < KILLING_RESIDUAL_TOLERANCE) {
                    return Err(format!("{} on {}: |L_ξ g| = {residual:.2e}", kf.label, cc.chart.label()));
                }
                worst_residual = worst_residual.max(residual);
                let t = killing_tangency_check(&field, &kf.field, &grid)
                    .map_err(|e| format!("{} on {}: {e}", kf.label, cc.chart.label()))?;
                if !(t < TANGENCY_TOLERANCE) {
                    return Err(format!("{} on {}: |dW(ξ)| = {t:.2e}", kf.label, cc.chart.label()));
                }
                worst_tangency = worst_tangency.max(t);
                count += 1;
            }
        }
    }
    // control: x∂x is not Killing for the flat metric
    let flat = catalog_entry("euclidean2", &Params::new()).map_err(|e| e.to_string())?;
    let chart = flat.chart();
    let xi = VectorFieldExpr::parse(&["x", "0"], chart.coords()).map_err(|e| e.to_string())?;
    let caps = InvariantCaps::default_for(2);
    let grid = SampleGrid::new(chart, 6);
    let field = console_olmos_map(chart, &enumerate_invariants(2, caps.max_order, caps.max_factors), &grid)
        .map_err(|e| e.to_string())?;
    match killing_tangency_check(&field, &xi, &grid) {
        Err(HomogeneityError::NotKilling { .. }) => {}
        other => return Err(format!("control field x∂x was not rejected: {other:?}")),
    }
    Ok(format!("{count} fields, max |L_ξ g| {worst_residual:.2e}, max |dW(ξ)| {worst_tangency:.2e}; x∂x rejected"))
}

fn max_killing_residual(chart: &Arc<MetricChart>, xi: &VectorFieldExpr, grid: &SampleGrid) -> Result<f64, String> {
    let residual = killing_residual(chart, xi).map_err(|e| e.to_string())?.compile().map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for p in grid.points() {
        worst = worst.max(residual.eval(&p).map_err(|e| e.to_string())?.max_abs());
    }
    Ok(worst)
}
