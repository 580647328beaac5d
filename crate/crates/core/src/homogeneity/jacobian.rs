use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{HomogeneityError, LevelSet, Result};
use crate::weyl::ConsoleOlmosField;

/// Central-difference step as a fraction of the domain width per axis.
pub const FD_STEP_FRACTION: f64 = 1e-4;

pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-6;

/// A Jacobian whose largest singular value is below this multiple of
/// `1 + ‖W‖∞` is treated as zero: that is finite-difference noise on a
/// constant map, not a direction of change.
pub const RANK_ABS_FLOOR: f64 = 1e-8;

/// The `k × n` Jacobian of `W` at `point` by central differences.
pub fn jacobian(field: &ConsoleOlmosField, point: &[f64]) -> Result<DMatrix<f64>> {
    jacobian_with_step(field, point, FD_STEP_FRACTION)
}

pub fn jacobian_with_step(field: &ConsoleOlmosField, point: &[f64], step_fraction: f64) -> Result<DMatrix<f64>> {
    let chart = field.chart();
    let n = chart.dim();
    let mut jac = DMatrix::zeros(field.k(), n);
    for a in 0..n {
        let iv = chart.domain()[a];
        let h = step_fraction * iv.width();
        let periodic = chart.periods()[a].is_some();
        if !periodic && !(iv.contains(point[a] - h) && iv.contains(point[a] + h)) {
            return Err(HomogeneityError::StencilOutOfDomain { point: point.to_vec(), axis: a });
        }
        let mut x = point.to_vec();
        x[a] = point[a] + h;
        let plus = field.evaluate_at(&x)?;
        x[a] = point[a] - h;
        let minus = field.evaluate_at(&x)?;
        for i in 0..field.k() {
            jac[(i, a)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Rank of `jac` after rescaling each column by its axis width, counting
/// singular values above `rank_tolerance · σ_max`, with the absolute floor
/// [`RANK_ABS_FLOOR`] relative to `w_scale`.
pub fn numerical_rank(jac: &DMatrix<f64>, widths: &[f64], w_scale: f64, rank_tolerance: f64) -> usize {
    if jac.nrows() == 0 || jac.ncols() == 0 {
        return 0;
    }
    let scaled = DMatrix::from_fn(jac.nrows(), jac.ncols(), |i, a| jac[(i, a)] * widths[a]);
    let sv = scaled.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if !(smax > RANK_ABS_FLOOR * w_scale) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rank_tolerance * smax).count()
}

fn widths(field: &ConsoleOlmosField) -> Vec<f64> {
    field.chart().domain().iter().map(|iv| iv.width()).collect()
}

fn w_scale(w: &[f64]) -> f64 {
    1.0 + w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Rank of `dW` at `point`.
pub fn jacobian_rank(field: &ConsoleOlmosField, point: &[f64], rank_tolerance: f64) -> Result<usize> {
    let jac = jacobian(field, point)?;
    let w = field.evaluate_at(point)?;
    Ok(numerical_rank(&jac, &widths(field), w_scale(&w), rank_tolerance))
}

/// A grid-connected set of points sharing one rank of `dW`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stratum {
    pub id: usize,
    pub rank: usize,
    pub size: usize,
    /// `n − rank`, the dimension of the level sets through the stratum.
    pub fiber_dimension: usize,
    pub w_min: Vec<f64>,
    pub w_max: Vec<f64>,
    #[serde(skip)]
    pub points: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratificationReport {
    /// per grid point; `None` for flagged points or failed stencils
    #[serde(skip)]
    pub ranks: Vec<Option<usize>>,
    pub strata: Vec<Stratum>,
    pub rank_tolerance: f64,
    /// `(rank, point count)`
    pub rank_histogram: Vec<(usize, usize)>,
    #[serde(skip)]
    pub level_sets: Vec<LevelSet>,
}

impl StratificationReport {
    pub fn ranked_count(&self) -> usize {
        self.ranks.iter().flatten().count()
    }

    /// Fraction of ranked points with the given rank.
    pub fn rank_fraction(&self, rank: usize) -> f64 {
        let total = self.ranked_count();
        if total == 0 {
            return 0.0;
        }
        self.ranks.iter().filter(|r| **r == Some(rank)).count() as f64 / total as f64
    }

    pub fn max_rank(&self) -> Option<usize> {
        self.ranks.iter().flatten().copied().max()
    }

    /// The largest stratum.
    pub fn dominant(&self) -> Option<&Stratum> {
        self.strata.iter().max_by_key(|s| (s.size, std::cmp::Reverse(s.id)))
    }
}

/// Ranks `dW` at every valid grid point and splits each rank class into
/// grid-connected strata.
pub fn stratify(field: &ConsoleOlmosField, rank_tolerance: f64) -> Result<StratificationReport> {
    let grid = field.grid();
    let ws = widths(field);
    let ranks: Vec<Option<usize>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let w = field.value(k)?;
            let jac = jacobian(field, &grid.point(k)).ok()?;
            Some(numerical_rank(&jac, &ws, w_scale(w), rank_tolerance))
        })
        .collect();
    let n = field.chart().dim();
    let mut seen = vec![false; grid.len()];
    let mut strata = Vec::new();
    for start in 0..grid.len() {
        let Some(rank) = ranks[start] else { continue };
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut points = Vec::new();
        while let Some(k) = queue.pop_front() {
            points.push(k);
            for nb in grid.neighbors(k) {
                if !seen[nb] && ranks[nb] == Some(rank) {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        points.sort_unstable();
        let mut w_min = vec![f64::INFINITY; field.k()];
        let mut w_max = vec![f64::NEG_INFINITY; field.k()];
        for &k in &points {
            for (i, v) in field.values()[k].iter().enumerate() {
                w_min[i] = w_min[i].min(*v);
                w_max[i] = w_max[i].max(*v);
            }
        }
        strata.push(Stratum {
            id: strata.len(),
            rank,
            size: points.len(),
            fiber_dimension: n.saturating_sub(rank),
            w_min,
            w_max,
            points,
        });
    }
    let top = ranks.iter().flatten().copied().max().unwrap_or(0);
    let rank_histogram = (0..=top)
        .map(|r| (r, ranks.iter().filter(|x| **x == Some(r)).count()))
        .filter(|&(_, c)| c > 0)
        .collect();
    Ok(StratificationReport { ranks, strata, rank_tolerance, rank_histogram, level_sets: Vec::new() })
}
