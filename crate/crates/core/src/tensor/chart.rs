use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Result, TensorError};
use crate::expr::{parse_expression, CompiledExprs, ScalarExpr};

/// Closed coordinate interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Removes `fraction * width` from both ends.
    pub fn shrink(&self, fraction: f64) -> Interval {
        let cut = fraction * self.width();
        Interval::new(self.lo + cut, self.hi - cut)
    }
}

pub const DEFAULT_PD_FLOOR: f64 = 1e-10;

/// An n-dimensional coordinate chart carrying a Riemannian metric.
///
/// Only the upper triangle `g_ij, i <= j` is stored, so the metric is
/// symmetric by construction. Axes may be periodic (angles), which matters
/// for level-set tracing and for stencils that cross the chart seam.
#[derive(Clone)]
pub struct MetricChart {
    label: String,
    coords: Vec<String>,
    upper: Vec<ScalarExpr>,
    domain: Vec<Interval>,
    periods: Vec<Option<f64>>,
    margins: Vec<f64>,
    pd_floor: f64,
    compiled: CompiledExprs,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("label", &self.label)
            .field("coords", &self.coords)
            .field("upper", &self.upper)
            .field("domain", &self.domain)
            .field("periods", &self.periods)
            .field("margins", &self.margins)
            .finish()
    }
}

impl PartialEq for MetricChart {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.coords == other.coords
            && self.upper == other.upper
            && self.domain == other.domain
            && self.periods == other.periods
            && self.margins == other.margins
    }
}

impl MetricChart {
    /// Builds a chart from the packed upper triangle of `g`, row by row:
    /// `g_00, g_01, .., g_0(n-1), g_11, ..`.
    pub fn new(
        label: impl Into<String>,
        coords: Vec<String>,
        upper: Vec<ScalarExpr>,
        domain: Vec<Interval>,
    ) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(TensorError::InvalidChart("no coordinates".into()));
        }
        let distinct: HashSet<&String> = coords.iter().collect();
        if distinct.len() != n {
            return Err(TensorError::InvalidChart(format!("repeated coordinate names in {coords:?}")));
        }
        if upper.len() != n * (n + 1) / 2 {
            return Err(TensorError::InvalidChart(format!(
                "expected {} upper-triangle components, got {}",
                n * (n + 1) / 2,
                upper.len()
            )));
        }
        if domain.len() != n {
            return Err(TensorError::InvalidChart(format!("expected {n} domain intervals, got {}", domain.len())));
        }
        for iv in &domain {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(TensorError::InvalidChart(format!("bad interval [{}, {}]", iv.lo, iv.hi)));
            }
        }
        for e in &upper {
            for v in e.variables() {
                if !coords.contains(&v) {
                    return Err(TensorError::InvalidChart(format!("component uses undeclared coordinate `{v}`")));
                }
            }
        }
        let upper: Vec<ScalarExpr> = upper.iter().map(ScalarExpr::simplify).collect();
        let compiled = CompiledExprs::compile(&upper, &coords)?;
        Ok(MetricChart {
            label: label.into(),
            periods: vec![None; n],
            coords,
            upper,
            domain,
            margins: vec![0.0; n],
            pd_floor: DEFAULT_PD_FLOOR,
            compiled,
        })
    }

    /// Builds a chart from a full matrix, which must be structurally symmetric.
    pub fn from_matrix(
        label: impl Into<String>,
        coords: Vec<String>,
        matrix: Vec<Vec<ScalarExpr>>,
        domain: Vec<Interval>,
    ) -> Result<Self> {
        let n = coords.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(TensorError::InvalidChart(format!("metric matrix must be {n}x{n}")));
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                if matrix[i][j].simplify() != matrix[j][i].simplify() {
                    return Err(TensorError::InvalidChart(format!("g_{i}{j} and g_{j}{i} differ")));
                }
                upper.push(matrix[i][j].clone());
            }
        }
        Self::new(label, coords, upper, domain)
    }

    /// Parses the packed upper triangle from expression text.
    pub fn from_text<S: AsRef<str>>(
        label: impl Into<String>,
        coords: &[&str],
        upper: &[S],
        domain: Vec<Interval>,
    ) -> Result<Self> {
        let names: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let exprs = upper
            .iter()
            .map(|t| parse_expression(t.as_ref(), &names))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| TensorError::InvalidChart(e.to_string()))?;
        Self::new(label, names, exprs, domain)
    }

    /// Margin, as a fraction of the width, cut from both ends of every axis
    /// when sampling.
    pub fn with_margin(mut self, fraction: f64) -> Self {
        self.margins.iter_mut().for_each(|m| *m = fraction);
        self
    }

    pub fn with_axis_margin(mut self, axis: usize, fraction: f64) -> Self {
        self.margins[axis] = fraction;
        self
    }

    pub fn with_period(mut self, axis: usize, period: f64) -> Self {
        self.periods[axis] = Some(period);
        self
    }

    pub fn with_pd_floor(mut self, floor: f64) -> Self {
        self.pd_floor = floor;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn pd_floor(&self) -> f64 {
        self.pd_floor
    }

    /// The sampling box: the domain with the boundary margin removed.
    pub fn interior(&self) -> Vec<Interval> {
        self.domain.iter().zip(&self.margins).map(|(iv, m)| iv.shrink(*m)).collect()
    }

    /// `g_ij` (symmetric access).
    pub fn component(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.upper[packed(self.dim(), i, j)]
    }

    pub fn upper_components(&self) -> &[ScalarExpr] {
        &self.upper
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// True when every coordinate lies in the closed domain; periodic axes
    /// accept any value.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.domain)
                .zip(&self.periods)
                .all(|((x, iv), per)| per.is_some() || iv.contains(*x))
    }

    fn check_point(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(TensorError::PointDimension { point: point.to_vec(), got: point.len(), n: self.dim() });
        }
        Ok(())
    }

    /// The metric matrix at `point`, without positivity checks.
    pub fn metric_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(point)?;
        let vals = self.compiled.eval(point)?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, j| vals[packed(n, i, j)]))
    }

    /// The metric matrix at `point`, checked to be positive definite with
    /// every eigenvalue above the chart's floor.
    pub fn validated_metric_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric_at(point)?;
        let eig = SymmetricEigen::new(g.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > self.pd_floor) {
            return Err(TensorError::NotPositiveDefinite { point: point.to_vec(), min_eigenvalue: min });
        }
        Ok(g)
    }

    /// Shortest displacement `b - a`, taking periodic axes into account.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.periods)
            .map(|((x, y), per)| {
                let d = y - x;
                match per {
                    Some(p) => d - p * (d / p).round(),
                    None => d,
                }
            })
            .collect()
    }
}

pub(crate) fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row i starts after n + (n-1) + .. + (n-i+1) entries
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_layout() {
        let n = 4;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(packed(n, i, j), k);
                assert_eq!(packed(n, j, i), k);
                k += 1;
            }
        }
    }

    #[test]
    fn validation() {
        let iv = vec![Interval::new(0.0, 1.0); 2];
        assert!(MetricChart::from_text("e", &["x", "y"], &["1", "0", "1"], iv.clone()).is_ok());
        assert!(MetricChart::from_text("e", &["x", "y"], &["1", "0"], iv.clone()).is_err());
        assert!(MetricChart::from_text("e", &["x", "x"], &["1", "0", "1"], iv.clone()).is_err());
        assert!(MetricChart::from_text("e", &["x", "y"], &["1", "z", "1"], iv.clone()).is_err());
        assert!(MetricChart::from_text("e", &["x", "y"], &["1", "0", "1"], vec![Interval::new(1.0, 0.0); 2]).is_err());
        let asym = vec![
            vec![ScalarExpr::one(), ScalarExpr::var("x")],
            vec![ScalarExpr::var("y"), ScalarExpr::one()],
        ];
        assert!(MetricChart::from_matrix("a", vec!["x".into(), "y".into()], asym, iv).is_err());
    }

    #[test]
    fn positivity_floor() {
        let iv = vec![Interval::new(-1.0, 1.0); 2];
        let chart = MetricChart::from_text("c", &["x", "y"], &["1", "x", "1"], iv).unwrap();
        assert!(chart.validated_metric_at(&[0.5, 0.0]).is_ok());
        assert!(matches!(
            chart.validated_metric_at(&[1.0, 0.0]),
            Err(TensorError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn periodic_displacement() {
        let iv = vec![Interval::new(0.0, 1.0), Interval::new(0.0, 6.0)];
        let chart = MetricChart::from_text("c", &["x", "y"], &["1", "0", "1"], iv)
            .unwrap()
            .with_period(1, 6.0);
        assert_eq!(chart.displacement(&[0.0, 5.5], &[0.0, 0.5]), vec![0.0, 1.0]);
        assert!(chart.contains(&[0.5, 7.0]));
        assert!(!chart.contains(&[1.5, 1.0]));
    }
}
