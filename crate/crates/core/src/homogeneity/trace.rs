use std::sync::Arc;

use serde::Serialize;

use super::{jacobian, jacobian_rank, HomogeneityError, Result, DEFAULT_RANK_TOLERANCE, FD_STEP_FRACTION};
use crate::tensor::{LeviCivita, MetricChart};
use crate::weyl::ConsoleOlmosField;

/// Predictor step, in coordinates normalized by the domain width.
pub const TRACE_STEP: f64 = 1e-2;
const MAX_CORRECTOR_ITERATIONS: usize = 20;
const MAX_STEPS: usize = 20_000;
const CLUSTER_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polyline {
    pub points: Vec<Vec<f64>>,
    /// The last point connects back to the first.
    pub closed: bool,
}

impl Polyline {
    pub fn open(points: Vec<Vec<f64>>) -> Self {
        Polyline { points, closed: false }
    }

    pub fn closed(points: Vec<Vec<f64>>) -> Self {
        Polyline { points, closed: true }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A numerically traced fiber of `W`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LevelSet {
    /// Continuation along `ker dW` on a surface.
    Curve(Polyline),
    /// Grid points where `W` matches the seed value, in higher dimensions.
    Cluster(Vec<Vec<f64>>),
}

impl LevelSet {
    pub fn points(&self) -> &[Vec<f64>] {
        match self {
            LevelSet::Curve(p) => &p.points,
            LevelSet::Cluster(c) => c,
        }
    }

    pub fn as_curve(&self) -> Option<&Polyline> {
        match self {
            LevelSet::Curve(p) => Some(p),
            LevelSet::Cluster(_) => None,
        }
    }
}

/// Follows the level set of `W` through `seed`.
///
/// On a surface the curve is traced by predictor-corrector continuation:
/// a step along the unit kernel direction of `dW`, then damped Newton on the
/// invariant with the largest gradient until it is back at its seed value.
/// Tracing stops when the curve closes up or reaches the sampling box; in
/// the latter case the other direction from the seed is traced too.
pub fn trace_level_set(field: &ConsoleOlmosField, seed: &[f64]) -> Result<LevelSet> {
    let rank = jacobian_rank(field, seed, DEFAULT_RANK_TOLERANCE)?;
    let n = field.chart().dim();
    if n != 2 {
        if rank == 0 {
            return Err(HomogeneityError::CriticalSeed { rank });
        }
        let w0 = field.evaluate_at(seed)?;
        let tol = CLUSTER_TOLERANCE * (1.0 + w0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let cluster = field
            .valid_indices()
            .filter(|&k| field.values()[k].iter().zip(&w0).all(|(a, b)| (a - b).abs() < tol))
            .map(|k| field.grid().point(k))
            .collect();
        return Ok(LevelSet::Cluster(cluster));
    }
    if rank != 1 {
        return Err(HomogeneityError::CriticalSeed { rank });
    }
    let tracer = Tracer::new(field, seed)?;
    let (forward, closed) = tracer.march(1.0)?;
    let points = if closed {
        forward
    } else {
        let (backward, _) = tracer.march(-1.0)?;
        backward.into_iter().skip(1).rev().chain(forward).collect()
    };
    let chart = field.chart();
    let wrapped = points.into_iter().map(|p| wrap(chart, p)).collect();
    Ok(LevelSet::Curve(Polyline { points: wrapped, closed }))
}

fn wrap(chart: &MetricChart, mut p: Vec<f64>) -> Vec<f64> {
    for (a, per) in chart.periods().iter().enumerate() {
        if let Some(per) = per {
            let lo = chart.domain()[a].lo;
            p[a] = lo + (p[a] - lo).rem_euclid(*per);
        }
    }
    p
}

struct Tracer<'a> {
    field: &'a ConsoleOlmosField,
    seed: Vec<f64>,
    /// index of the invariant used by the corrector, and its seed value
    dominant: usize,
    target: f64,
    tolerance: f64,
    widths: Vec<f64>,
    /// allowed box per axis; `None` on periodic axes
    bounds: Vec<Option<(f64, f64)>>,
}

impl<'a> Tracer<'a> {
    fn new(field: &'a ConsoleOlmosField, seed: &[f64]) -> Result<Self> {
        let chart = field.chart();
        let widths: Vec<f64> = chart.domain().iter().map(|iv| iv.width()).collect();
        let jac = jacobian(field, seed)?;
        let dominant = (0..field.k())
            .max_by(|&a, &b| {
                let na: f64 = (0..2).map(|c| (jac[(a, c)] * widths[c]).powi(2)).sum();
                let nb: f64 = (0..2).map(|c| (jac[(b, c)] * widths[c]).powi(2)).sum();
                na.total_cmp(&nb).then(b.cmp(&a))
            })
            .expect("at least one invariant");
        let target = field.evaluate_at(seed)?[dominant];
        let bounds = chart
            .interior()
            .iter()
            .zip(chart.periods())
            .zip(&widths)
            .map(|((iv, per), w)| per.is_none().then(|| (iv.lo + FD_STEP_FRACTION * w, iv.hi - FD_STEP_FRACTION * w)))
            .collect();
        Ok(Tracer {
            field,
            seed: seed.to_vec(),
            dominant,
            target,
            tolerance: 1e-11 * (1.0 + target.abs()),
            widths,
            bounds,
        })
    }

    fn inside(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(v, b)| b.is_none_or(|(lo, hi)| lo <= *v && *v <= hi))
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let spec = &self.field.specs()[self.dominant];
        Ok(self.field.evaluator().evaluate(std::slice::from_ref(spec), x)?[0] - self.target)
    }

    /// Gradient of the dominant invariant in normalized coordinates.
    fn gradient(&self, x: &[f64]) -> Result<[f64; 2]> {
        let mut g = [0.0; 2];
        for (a, ga) in g.iter_mut().enumerate() {
            let h = FD_STEP_FRACTION;
            let mut y = x.to_vec();
            y[a] = x[a] + h * self.widths[a];
            let plus = self.value(&y)?;
            y[a] = x[a] - h * self.widths[a];
            let minus = self.value(&y)?;
            *ga = (plus - minus) / (2.0 * h);
        }
        Ok(g)
    }

    fn normalized_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.field.chart().displacement(a, b);
        d.iter().zip(&self.widths).map(|(v, w)| (v / w).powi(2)).sum::<f64>().sqrt()
    }

    fn correct(&self, mut y: Vec<f64>) -> Result<Vec<f64>> {
        let mut f = self.value(&y)?;
        for _ in 0..MAX_CORRECTOR_ITERATIONS {
            if f.abs() <= self.tolerance {
                return Ok(y);
            }
            let g = self.gradient(&y)?;
            let gg = g[0] * g[0] + g[1] * g[1];
            if gg == 0.0 {
                break;
            }
            let mut damping = 1.0;
            loop {
                let trial: Vec<f64> =
                    (0..2).map(|a| y[a] - damping * f * g[a] / gg * self.widths[a]).collect();
                let ft = self.value(&trial)?;
                if ft.abs() < f.abs() || damping < 1e-3 {
                    y = trial;
                    f = ft;
                    break;
                }
                damping *= 0.5;
            }
        }
        if f.abs() <= self.tolerance {
            Ok(y)
        } else {
            Err(HomogeneityError::LostTrack { point: y, residual: f })
        }
    }

    /// Returns the traced points starting at the seed and whether the
    /// curve closed up.
    fn march(&self, direction: f64) -> Result<(Vec<Vec<f64>>, bool)> {
        let mut points = vec![self.seed.clone()];
        let mut x = self.seed.clone();
        let mut previous: Option<[f64; 2]> = None;
        let mut farthest: f64 = 0.0;
        for _ in 0..MAX_STEPS {
            let g = self.gradient(&x)?;
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if norm == 0.0 {
                return Err(HomogeneityError::LostTrack { point: x, residual: 0.0 });
            }
            let mut t = [-g[1] / norm * direction, g[0] / norm * direction];
            if let Some(p) = previous {
                if t[0] * p[0] + t[1] * p[1] < 0.0 {
                    t = [-t[0], -t[1]];
                }
            }
            let predicted: Vec<f64> = (0..2).map(|a| x[a] + TRACE_STEP * t[a] * self.widths[a]).collect();
            if !self.inside(&predicted) {
                return Ok((points, false));
            }
            let y = self.correct(predicted)?;
            if !self.inside(&y) {
                return Ok((points, false));
            }
            let back = self.normalized_distance(&self.seed, &y);
            farthest = farthest.max(back);
            if points.len() > 2 && farthest > 2.0 * TRACE_STEP && back < TRACE_STEP {
                return Ok((points, true));
            }
            points.push(y.clone());
            previous = Some(t);
            x = y;
        }
        Ok((points, false))
    }
}

/// Geometry of a traced fiber as seen by the ambient metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberMetric {
    /// `g`-length of each segment by the midpoint rule, including the closing
    /// segment of a closed polyline
    pub segment_lengths: Vec<f64>,
    pub total_length: f64,
    /// segment lengths divided by their mean
    pub density: Vec<f64>,
    /// signed geodesic curvature at the vertices (surfaces only)
    pub geodesic_curvature: Vec<f64>,
    /// `(max − min) / (1 + |mean|)` of the geodesic curvature
    pub curvature_spread: f64,
}

/// Induced length elements and geodesic curvature along a polyline.
pub fn fiber_induced_metric(chart: &Arc<MetricChart>, polyline: &Polyline) -> Result<FiberMetric> {
    let m = polyline.len();
    if m < 3 {
        return Err(HomogeneityError::DegeneratePolyline(format!("{m} points, need at least 3")));
    }
    let n = chart.dim();
    if let Some(bad) = polyline.points.iter().find(|p| p.len() != n) {
        return Err(HomogeneityError::DegeneratePolyline(format!("point {bad:?} has the wrong dimension")));
    }
    let pts = &polyline.points;
    let segments = if polyline.closed { m } else { m - 1 };
    let mut lengths = Vec::with_capacity(segments);
    for k in 0..segments {
        let (a, b) = (&pts[k], &pts[(k + 1) % m]);
        let d = chart.displacement(a, b);
        let mid: Vec<f64> = a.iter().zip(&d).map(|(x, dx)| x + 0.5 * dx).collect();
        let g = chart.metric_at(&mid)?;
        let l2 = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * d[i] * d[j]).sum::<f64>()).sum::<f64>();
        if !(l2 > 0.0) {
            return Err(HomogeneityError::DegeneratePolyline(format!("segment {k} has zero length")));
        }
        lengths.push(l2.sqrt());
    }
    let total: f64 = lengths.iter().sum();
    let mean = total / lengths.len() as f64;
    let density = lengths.iter().map(|l| l / mean).collect();

    let mut kappa = Vec::new();
    if n == 2 {
        let gamma = LeviCivita::new(chart)?.christoffel().compile()?;
        let vertices: Vec<usize> = if polyline.closed { (0..m).collect() } else { (1..m - 1).collect() };
        for k in vertices {
            let (prev, next) = ((k + m - 1) % m, (k + 1) % m);
            let x = &pts[k];
            let dm = chart.displacement(x, &pts[prev]);
            let dp = chart.displacement(x, &pts[next]);
            // chord parameters: −s₋ at the previous vertex, +s₊ at the next
            let sm = lengths[if k == 0 { segments - 1 } else { k - 1 }];
            let sp = lengths[k % segments];
            let beta: Vec<f64> = (0..2).map(|i| (dp[i] / sp + dm[i] / sm) / (sm + sp)).collect();
            let v: Vec<f64> = (0..2).map(|i| dp[i] / sp - beta[i] * sp).collect();
            let acc: Vec<f64> = beta.iter().map(|b| 2.0 * b).collect();
            let g = chart.metric_at(x)?;
            let gm = gamma.eval(x)?;
            let quad = |c: usize| (0..2).map(|i| (0..2).map(|j| gm.get(&[c, i, j]) * v[i] * v[j]).sum::<f64>()).sum::<f64>();
            let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(0, 1)];
            let speed2 = (0..2).map(|i| (0..2).map(|j| g[(i, j)] * v[i] * v[j]).sum::<f64>()).sum::<f64>();
            let num = v[0] * (acc[1] + quad(1)) - v[1] * (acc[0] + quad(0));
            kappa.push(det.sqrt() * num / speed2.powf(1.5));
        }
    }
    let spread = if kappa.is_empty() {
        0.0
    } else {
        let (lo, hi) = kappa.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        let mean = kappa.iter().sum::<f64>() / kappa.len() as f64;
        (hi - lo) / (1.0 + mean.abs())
    };
    Ok(FiberMetric {
        segment_lengths: lengths,
        total_length: total,
        density,
        geodesic_curvature: kappa,
        curvature_spread: spread,
    })
}
