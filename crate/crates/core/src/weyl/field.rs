use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{InvariantSpec, WeylError, WeylEvaluator};
use crate::expr::EvalError;
use crate::tensor::{Interval, MetricChart, TensorError};

/// A cell-centred lattice over the chart's sampling box (domain minus
/// margin): axis `a` with density `N` gets `lo + (i + 1/2)·w/N`, so no
/// sample sits on the boundary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleGrid {
    axes: Vec<Vec<f64>>,
}

impl SampleGrid {
    pub fn new(chart: &MetricChart, density: usize) -> Self {
        Self::with_densities(chart, &vec![density; chart.dim()])
    }

    pub fn with_densities(chart: &MetricChart, densities: &[usize]) -> Self {
        assert_eq!(densities.len(), chart.dim(), "one density per axis");
        let axes = chart
            .interior()
            .iter()
            .zip(densities)
            .map(|(iv, &m)| cell_centres(iv, m))
            .collect();
        SampleGrid { axes }
    }

    /// A grid from explicit per-axis sample coordinates.
    pub fn from_axes(axes: Vec<Vec<f64>>) -> Self {
        SampleGrid { axes }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index of point `k` (last axis fastest).
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let m = self.axes[a].len();
            idx[a] = k % m;
            k /= m;
        }
        idx
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k).iter().zip(&self.axes).map(|(&i, ax)| ax[i]).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Grid neighbours of point `k` along each axis.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let idx = self.multi_index(k);
        let mut out = Vec::with_capacity(2 * self.dim());
        for a in 0..self.dim() {
            for delta in [-1i64, 1] {
                let j = idx[a] as i64 + delta;
                if j >= 0 && (j as usize) < self.axes[a].len() {
                    let mut nb = idx.clone();
                    nb[a] = j as usize;
                    out.push(self.linear_index(&nb));
                }
            }
        }
        out
    }
}

fn cell_centres(iv: &Interval, m: usize) -> Vec<f64> {
    let h = iv.width() / m as f64;
    (0..m).map(|i| iv.lo + (i as f64 + 0.5) * h).collect()
}

/// Why a grid point carries no invariant values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    Ok,
    SingularMetric,
    NotPositiveDefinite,
    DomainError,
    Failed,
}

impl PointFlag {
    pub fn is_ok(self) -> bool {
        self == PointFlag::Ok
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::SingularMetric => "singular_metric",
            PointFlag::NotPositiveDefinite => "not_positive_definite",
            PointFlag::DomainError => "domain_error",
            PointFlag::Failed => "failed",
        }
    }

    pub fn from_error(e: &WeylError) -> Self {
        match e {
            WeylError::Tensor(TensorError::SingularMetric { .. }) => PointFlag::SingularMetric,
            WeylError::Tensor(TensorError::NotPositiveDefinite { .. }) => PointFlag::NotPositiveDefinite,
            WeylError::Tensor(TensorError::Eval(EvalError::Domain { .. })) => PointFlag::DomainError,
            _ => PointFlag::Failed,
        }
    }
}

/// The invariant vector `W(x)` sampled over a grid.
#[derive(Clone, Debug)]
pub struct ConsoleOlmosField {
    evaluator: Arc<WeylEvaluator>,
    specs: Vec<InvariantSpec>,
    grid: SampleGrid,
    /// row per grid point; flagged rows hold NaN
    values: Vec<Vec<f64>>,
    flags: Vec<PointFlag>,
}

impl ConsoleOlmosField {
    pub fn chart(&self) -> &Arc<MetricChart> {
        self.evaluator.chart()
    }

    pub fn evaluator(&self) -> &Arc<WeylEvaluator> {
        &self.evaluator
    }

    pub fn specs(&self) -> &[InvariantSpec] {
        &self.specs
    }

    pub fn grid(&self) -> &SampleGrid {
        &self.grid
    }

    /// Number of invariants `k`.
    pub fn k(&self) -> usize {
        self.specs.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn flags(&self) -> &[PointFlag] {
        &self.flags
    }

    /// `W` at grid point `k`, `None` when the point is flagged.
    pub fn value(&self, k: usize) -> Option<&[f64]> {
        self.flags[k].is_ok().then(|| self.values[k].as_slice())
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.flags[k].is_ok())
    }

    pub fn flagged_count(&self) -> usize {
        self.flags.iter().filter(|f| !f.is_ok()).count()
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.flagged_count() as f64 / self.len() as f64
        }
    }

    /// `W` at an arbitrary point, e.g. a finite-difference stencil node.
    pub fn evaluate_at(&self, point: &[f64]) -> Result<Vec<f64>, WeylError> {
        self.evaluator.evaluate(&self.specs, point)
    }
}

/// Samples every spec over the grid. Failures at individual points (poles,
/// degenerate metric) flag the point rather than aborting.
pub fn console_olmos_map(
    chart: &Arc<MetricChart>,
    specs: &[InvariantSpec],
    grid: &SampleGrid,
) -> Result<ConsoleOlmosField, WeylError> {
    let order = specs.iter().flat_map(|s| s.factors().iter().copied()).max().unwrap_or(0);
    let evaluator = Arc::new(WeylEvaluator::new(chart, order)?);
    console_olmos_map_with(evaluator, specs, grid)
}

/// As [`console_olmos_map`], with a prepared evaluator.
pub fn console_olmos_map_with(
    evaluator: Arc<WeylEvaluator>,
    specs: &[InvariantSpec],
    grid: &SampleGrid,
) -> Result<ConsoleOlmosField, WeylError> {
    if specs.is_empty() {
        return Err(WeylError::NoSpecs);
    }
    let n = evaluator.chart().dim();
    if grid.dim() != n {
        return Err(WeylError::GridDimension { grid: grid.dim(), chart: n });
    }
    let needed = specs.iter().flat_map(|s| s.factors().iter().copied()).max().unwrap_or(0);
    if needed > evaluator.max_order() {
        return Err(WeylError::OrderTooHigh { needed, available: evaluator.max_order() });
    }
    let rows: Vec<(Vec<f64>, PointFlag)> = (0..grid.len())
        .into_par_iter()
        .map(|k| match evaluator.evaluate(specs, &grid.point(k)) {
            Ok(w) if w.iter().all(|v| v.is_finite()) => (w, PointFlag::Ok),
            Ok(_) => (vec![f64::NAN; specs.len()], PointFlag::Failed),
            Err(e) => (vec![f64::NAN; specs.len()], PointFlag::from_error(&e)),
        })
        .collect();
    let (values, flags) = rows.into_iter().unzip();
    Ok(ConsoleOlmosField { evaluator, specs: specs.to_vec(), grid: grid.clone(), values, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let chart = MetricChart::from_text("e", &["x", "y"], &["1", "0", "1"], vec![Interval::new(0.0, 1.0); 2])
            .unwrap()
            .with_margin(0.1);
        let g = SampleGrid::with_densities(&chart, &[4, 3]);
        assert_eq!(g.len(), 12);
        for (x, want) in g.axes()[0].iter().zip([0.2, 0.4, 0.6, 0.8]) {
            assert!((x - want).abs() < 1e-15);
        }
        let k = g.linear_index(&[2, 1]);
        assert_eq!(g.multi_index(k), vec![2, 1]);
        assert_eq!(g.neighbors(0).len(), 2);
        assert_eq!(g.neighbors(k).len(), 4);
    }
}
