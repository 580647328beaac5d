use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ConfigError, ParamValue, ScenarioConfig};
use super::CliError;
use crate::geometries::{catalog_entry, KillingField, Param, Params};
use crate::homogeneity::{
    fiber_induced_metric, killing_tangency_check, ptv_test, stratify, trace_level_set, HomogeneityError,
    HomogeneityReport, LevelSet, StratificationReport, Stratum, INCONCLUSIVE_FRACTION,
};
use crate::tensor::{Interval, MetricChart};
use crate::weyl::{
    console_olmos_map, enumerate_invariants, singer_bound, ConsoleOlmosField, InvariantCaps, SampleGrid,
    HIGH_DIM_ORDER_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: ScenarioReport,
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapsProvenance {
    pub dimension: usize,
    pub singer_bound: usize,
    pub max_order: usize,
    pub max_factors: usize,
    /// where `max_order` came from
    pub max_order_source: String,
    pub max_factors_source: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSetSummary {
    pub curve_id: usize,
    pub kind: &'static str,
    pub seed: Vec<f64>,
    pub points: usize,
    pub closed: bool,
    pub coord_min: Vec<f64>,
    pub coord_max: Vec<f64>,
    /// largest `|w_i − w_i(seed)| / (1 + |w_i(seed)|)` along the curve
    pub invariant_drift: f64,
    pub length: Option<f64>,
    pub geodesic_curvature_spread: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KillingSummary {
    pub label: String,
    pub max_tangency: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub constancy: f64,
    pub rank: f64,
    pub killing: f64,
    pub pd_floor: f64,
    pub inconclusive_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub geometry: String,
    pub chart: String,
    pub coords: Vec<String>,
    pub seed: u64,
    pub grid_shape: Vec<usize>,
    pub caps: CapsProvenance,
    pub invariants: Vec<String>,
    pub verdict: String,
    pub expected_verdict: Option<String>,
    pub homogeneity: HomogeneityReport,
    pub flagged_fraction: f64,
    pub stratification: Option<StratificationSummary>,
    pub level_sets: Vec<LevelSetSummary>,
    pub level_set_failures: Vec<String>,
    pub killing: Vec<KillingSummary>,
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, Serialize)]
pub struct StratificationSummary {
    pub rank_tolerance: f64,
    pub rank_histogram: Vec<(usize, usize)>,
    pub unranked: usize,
    pub strata: Vec<Stratum>,
}

struct Geometry {
    name: String,
    chart: Arc<MetricChart>,
    killing: Vec<KillingField>,
    expected: Option<String>,
}

fn build_geometry(config: &ScenarioConfig) -> Result<Geometry, ConfigError> {
    let g = &config.geometry;
    let floor = config.tolerances.pd_floor;
    if let Some(name) = &g.catalog {
        let params: Params = config
            .params
            .iter()
            .map(|(k, v)| {
                let p = match v {
                    ParamValue::Number(x) => Param::Number(*x),
                    ParamValue::Text(t) => Param::Text(t.clone()),
                };
                (k.clone(), p)
            })
            .collect();
        let entry = catalog_entry(name, &params).map_err(|e| ConfigError::new("geometry.catalog", e.to_string()))?;
        let Some(cc) = entry.charts.get(g.chart) else {
            return Err(ConfigError::new(
                "geometry.chart",
                format!("`{name}` has {} chart(s), index {} is out of range", entry.charts.len(), g.chart),
            ));
        };
        let mut chart = (*cc.chart).clone().with_pd_floor(floor);
        if let Some(label) = &g.label {
            chart = chart.with_label(label.clone());
        }
        return Ok(Geometry {
            name: name.clone(),
            chart: Arc::new(chart),
            killing: cc.killing_fields.clone(),
            expected: entry.expected_verdict.map(|v| v.to_string()),
        });
    }
    let coords: Vec<&str> = g.coords.as_ref().expect("validated").iter().map(String::as_str).collect();
    let domain = g.domain.as_ref().expect("validated").iter().map(|iv| Interval::new(iv[0], iv[1])).collect();
    let label = g.label.clone().unwrap_or_else(|| "inline".to_string());
    let mut chart = MetricChart::from_text(label.clone(), &coords, g.metric.as_ref().expect("validated"), domain)
        .map_err(|e| ConfigError::new("geometry.metric", e.to_string()))?
        .with_margin(g.margin.unwrap_or(0.0))
        .with_pd_floor(floor);
    for (axis, p) in g.periods.iter().flatten().enumerate() {
        if *p > 0.0 {
            chart = chart.with_period(axis, *p);
        }
    }
    Ok(Geometry { name: label, chart: Arc::new(chart), killing: Vec::new(), expected: None })
}

fn caps(config: &ScenarioConfig, n: usize) -> CapsProvenance {
    let defaults = InvariantCaps::default_for(n);
    let bound = singer_bound(n);
    let (max_order, max_order_source) = match config.invariants.max_order {
        Some(v) => (v, "config".to_string()),
        None if defaults.max_order < bound => {
            (defaults.max_order, format!("singer_bound({n}) = {bound}, capped at {HIGH_DIM_ORDER_CAP}"))
        }
        None => (defaults.max_order, format!("singer_bound({n})")),
    };
    let (max_factors, max_factors_source) = match config.invariants.max_factors {
        Some(v) => (v, "config".to_string()),
        None => (defaults.max_factors, "default".to_string()),
    };
    CapsProvenance { dimension: n, singer_bound: bound, max_order, max_factors, max_order_source, max_factors_source }
}

/// Spreads `count` seeds over the rank-`rank` points ordered by `w_1`, one
/// per quantile bin, the position inside each bin drawn from `rng`.
fn pick_seeds(field: &ConsoleOlmosField, strat: &StratificationReport, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = field.chart().dim();
    let wanted = |r: usize| if n == 2 { r == 1 } else { r >= 1 };
    let mut candidates: Vec<usize> =
        (0..field.len()).filter(|&k| strat.ranks[k].is_some_and(wanted)).collect();
    if candidates.is_empty() || count == 0 {
        return Vec::new();
    }
    candidates.sort_by(|&a, &b| field.values()[a][0].total_cmp(&field.values()[b][0]).then(a.cmp(&b)));
    let bins = count.min(candidates.len());
    (0..bins)
        .map(|b| {
            let lo = b * candidates.len() / bins;
            let hi = ((b + 1) * candidates.len() / bins).max(lo + 1);
            candidates[rng.random_range(lo..hi)]
        })
        .collect()
}

fn summarize_level_set(
    field: &ConsoleOlmosField,
    curve_id: usize,
    seed: &[f64],
    set: &LevelSet,
) -> Result<LevelSetSummary, HomogeneityError> {
    let pts = set.points();
    let n = seed.len();
    let mut coord_min = vec![f64::INFINITY; n];
    let mut coord_max = vec![f64::NEG_INFINITY; n];
    for p in pts {
        for a in 0..n {
            coord_min[a] = coord_min[a].min(p[a]);
            coord_max[a] = coord_max[a].max(p[a]);
        }
    }
    let w0 = field.evaluate_at(seed)?;
    let mut drift = 0.0f64;
    for p in pts {
        let w = field.evaluate_at(p)?;
        for (a, b) in w.iter().zip(&w0) {
            drift = drift.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    let (closed, length, spread) = match set {
        LevelSet::Curve(poly) => match fiber_induced_metric(field.chart(), poly) {
            Ok(fm) => (poly.closed, Some(fm.total_length), Some(fm.curvature_spread)),
            Err(_) => (poly.closed, None, None),
        },
        LevelSet::Cluster(_) => (false, None, None),
    };
    Ok(LevelSetSummary {
        curve_id,
        kind: if matches!(set, LevelSet::Curve(_)) { "curve" } else { "cluster" },
        seed: seed.to_vec(),
        points: pts.len(),
        closed,
        coord_min,
        coord_max,
        invariant_drift: drift,
        length,
        geodesic_curvature_spread: spread,
    })
}

/// A random tensor grid inside the interior, pulled in from the edges so
/// that finite-difference stencils fit.
fn random_grid(chart: &MetricChart, per_axis: usize, rng: &mut ChaCha8Rng) -> SampleGrid {
    let axes = chart
        .interior()
        .iter()
        .map(|iv| {
            let iv = iv.shrink(0.01);
            let mut xs: Vec<f64> = (0..per_axis).map(|_| rng.random_range(iv.lo..iv.hi)).collect();
            xs.sort_by(f64::total_cmp);
            xs
        })
        .collect();
    SampleGrid::from_axes(axes)
}

/// Runs the scenario pipeline and writes the requested outputs.
///
/// Exit code 3 means the run finished but too many grid points were flagged
/// for the verdict to mean anything.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let geo = build_geometry(config)?;
    let chart = geo.chart.clone();
    let n = chart.dim();
    if let Some(ds) = &config.grid.densities {
        if ds.len() != n {
            return Err(ConfigError::new("grid.densities", format!("need {n} entries, got {}", ds.len())).into());
        }
    }
    let caps = caps(config, n);
    let specs = enumerate_invariants(n, caps.max_order, caps.max_factors);
    let grid = match &config.grid.densities {
        Some(ds) => SampleGrid::with_densities(&chart, ds),
        None => SampleGrid::new(&chart, config.grid.density),
    };
    let field = console_olmos_map(&chart, &specs, &grid).map_err(|e| CliError::Pipeline(e.to_string()))?;
    let tol = &config.tolerances;
    let homogeneity = match ptv_test(&field, tol.constancy) {
        Ok(h) => h,
        Err(HomogeneityError::InsufficientSamples { valid }) => {
            return Err(CliError::Pipeline(format!("only {valid} valid sample points")));
        }
        Err(e) => return Err(CliError::Pipeline(e.to_string())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let out = &config.outputs;

    let strat = if out.needs_ranks() {
        Some(stratify(&field, tol.rank).map_err(|e| CliError::Pipeline(e.to_string()))?)
    } else {
        None
    };

    let mut level_sets = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    if let (true, Some(strat)) = (out.level_sets, &strat) {
        for k in pick_seeds(&field, strat, out.level_set_count, &mut rng) {
            let seed = grid.point(k);
            let traced = trace_level_set(&field, &seed)
                .and_then(|set| summarize_level_set(&field, level_sets.len(), &seed, &set).map(|s| (set, s)));
            match traced {
                Ok((set, summary)) => {
                    level_sets.push(set);
                    summaries.push(summary);
                }
                Err(e) => failures.push(format!("seed {seed:?}: {e}")),
            }
        }
    }

    let mut killing = Vec::new();
    if out.killing && !geo.killing.is_empty() {
        let sample = random_grid(&chart, out.killing_samples, &mut rng);
        for kf in &geo.killing {
            let (max_tangency, error) = match killing_tangency_check(&field, &kf.field, &sample) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            killing.push(KillingSummary { label: kf.label.clone(), max_tangency, error });
        }
    }

    let flagged_fraction = field.flagged_fraction();
    let report = ScenarioReport {
        geometry: geo.name.clone(),
        chart: chart.label().to_string(),
        coords: chart.coords().to_vec(),
        seed: config.seed,
        grid_shape: grid.shape(),
        caps,
        invariants: specs.iter().map(|s| s.to_string()).collect(),
        verdict: homogeneity.verdict.to_string(),
        expected_verdict: geo.expected.clone(),
        homogeneity,
        flagged_fraction,
        stratification: strat.as_ref().map(|s| StratificationSummary {
            rank_tolerance: s.rank_tolerance,
            rank_histogram: s.rank_histogram.clone(),
            unranked: s.ranks.iter().filter(|r| r.is_none()).count(),
            strata: s.strata.clone(),
        }),
        level_sets: summaries,
        level_set_failures: failures,
        killing,
        tolerances: Tolerances {
            constancy: tol.constancy,
            rank: tol.rank,
            killing: tol.killing,
            pd_floor: tol.pd_floor,
            inconclusive_fraction: INCONCLUSIVE_FRACTION,
        },
    };

    std::fs::create_dir_all(&out.dir)?;
    let mut files = Vec::new();
    if out.report {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Pipeline(e.to_string()))?;
        files.push(write_atomic(&out.dir, "report.json", &(json + "\n"))?);
    }
    if out.invariant_field {
        files.push(write_atomic(&out.dir, "invariant_field.csv", &invariant_field_csv(&field, strat.as_ref()))?);
    }
    if out.level_sets {
        files.push(write_atomic(&out.dir, "level_sets.csv", &level_sets_csv(n, &level_sets))?);
    }
    if let (true, Some(s)) = (out.stratification, &strat) {
        files.push(write_atomic(&out.dir, "strata.csv", &strata_csv(field.k(), s))?);
    }
    let exit_code = if flagged_fraction >= INCONCLUSIVE_FRACTION { EXIT_FLAGGED } else { EXIT_OK };
    Ok(RunOutcome { exit_code, report, files })
}

/// Shortest decimal that parses back to the same `f64`; empty for NaN.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

fn header(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}_{i}"))
}

pub fn invariant_field_csv(field: &ConsoleOlmosField, strat: Option<&StratificationReport>) -> String {
    let n = field.chart().dim();
    let mut out = String::new();
    let cols: Vec<String> =
        header("coord", n).chain(header("w", field.k())).chain(["rank".to_string(), "flag".to_string()]).collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for (k, point) in field.grid().points().enumerate() {
        let mut row: Vec<String> = point.iter().map(|v| format_float(*v)).collect();
        row.extend(field.values()[k].iter().map(|v| format_float(*v)));
        row.push(strat.and_then(|s| s.ranks[k]).map(|r| r.to_string()).unwrap_or_default());
        row.push(field.flags()[k].as_str().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn level_sets_csv(n: usize, sets: &[LevelSet]) -> String {
    let mut out = String::new();
    let cols: Vec<String> = ["curve_id".to_string(), "seq".to_string()].into_iter().chain(header("coord", n)).collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for (id, set) in sets.iter().enumerate() {
        for (seq, p) in set.points().iter().enumerate() {
            let _ = write!(out, "{id},{seq}");
            for v in p {
                let _ = write!(out, ",{}", format_float(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn strata_csv(k: usize, strat: &StratificationReport) -> String {
    let mut out = String::new();
    let cols: Vec<String> = ["stratum_id", "rank", "size", "fiber_dimension"]
        .into_iter()
        .map(String::from)
        .chain(header("w_min", k))
        .chain(header("w_max", k))
        .collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in &strat.strata {
        let _ = write!(out, "{},{},{},{}", s.id, s.rank, s.size, s.fiber_dimension);
        for v in s.w_min.iter().chain(&s.w_max) {
            let _ = write!(out, ",{}", format_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}
