//! Additive curvature invariants and the map `W = (w_1, .., w_k)` they form.
//!
//! Invariants are full contractions of products of `∇^s R` factors. They are
//! enumerated combinatorially, reduced by the algebraic symmetries of the
//! curvature tensor, and then deduplicated numerically: two candidates are
//! merged when they agree up to sign on a set of random analytic metrics,
//! and a candidate is dropped when it vanishes on all of them.

mod eval;
mod field;
mod spec;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use eval::{evaluate_invariant, orthonormal_frame, FrameCurvature, WeylEvaluator};
pub use field::{console_olmos_map, console_olmos_map_with, ConsoleOlmosField, PointFlag, SampleGrid};
pub use spec::InvariantSpec;

use crate::expr::{sum, Func, ScalarExpr};
use crate::tensor::{Interval, MetricChart, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeylError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invariants need ∇^{needed}R but the evaluator was built for order {available}")]
    OrderTooHigh { needed: usize, available: usize },
    #[error("no invariants to evaluate")]
    NoSpecs,
    #[error("grid has dimension {grid}, chart has dimension {chart}")]
    GridDimension { grid: usize, chart: usize },
}

/// `n(n−1)/2`, the derivative order that suffices to detect local
/// homogeneity in dimension `n`.
pub fn singer_bound(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Caps for [`enumerate_invariants`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct InvariantCaps {
    pub max_order: usize,
    pub max_factors: usize,
}

/// Highest derivative order used by default in dimensions above three,
/// where the full bound makes `∇^s R` too large to sample on a grid.
pub const HIGH_DIM_ORDER_CAP: usize = 3;

pub const DEFAULT_MAX_FACTORS: usize = 2;

impl InvariantCaps {
    /// `max_order = singer_bound(n)` (capped at [`HIGH_DIM_ORDER_CAP`] for
    /// `n > 3`) and two factors.
    pub fn default_for(n: usize) -> Self {
        let bound = singer_bound(n);
        let max_order = if n <= 3 { bound } else { bound.min(HIGH_DIM_ORDER_CAP) };
        InvariantCaps { max_order, max_factors: DEFAULT_MAX_FACTORS }
    }
}

const DEDUP_SEED: u64 = 0x5eed_0fc0_ffee;
const DEDUP_METRICS: usize = 4;
const DEDUP_POINTS: usize = 2;
const DEDUP_TOL: f64 = 1e-9;

/// A positive definite metric on `[-1, 1]^n` built from random
/// trigonometric and quadratic terms. Real-analytic and generic enough that
/// no algebraic accident makes distinct invariants coincide.
pub fn random_analytic_metric<R: Rng>(n: usize, rng: &mut R) -> MetricChart {
    let coords: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    let linear = |rng: &mut R| -> ScalarExpr {
        sum(coords
            .iter()
            .map(|c| ScalarExpr::constant(round6(rng.random_range(-1.0..1.0))).mul(&ScalarExpr::var(c))))
        .add(&ScalarExpr::constant(round6(rng.random_range(-1.0..1.0))))
    };
    let mut upper = Vec::new();
    for i in 0..n {
        for j in i..n {
            let e = if i == j {
                let wave = ScalarExpr::call(Func::Sin, &linear(rng));
                let bowl = linear(rng).powi(2);
                ScalarExpr::constant(1.5)
                    .add(&ScalarExpr::constant(0.3).mul(&wave))
                    .add(&ScalarExpr::constant(0.05).mul(&bowl))
            } else {
                ScalarExpr::constant(0.12).mul(&ScalarExpr::call(Func::Cos, &linear(rng)))
            };
            upper.push(e);
        }
    }
    MetricChart::new("random", coords, upper, vec![Interval::new(-1.0, 1.0); n]).expect("well-formed random metric")
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

type CacheKey = (usize, usize, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Vec<InvariantSpec>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Vec<InvariantSpec>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// All independent additive invariants with `Σs <= max_order` and at most
/// `max_factors` factors, scalar curvature first.
///
/// Deterministic: the candidate order is fixed and the numerical
/// deduplication uses a fixed seed. Results are memoized per argument tuple.
pub fn enumerate_invariants(n: usize, max_order: usize, max_factors: usize) -> Vec<InvariantSpec> {
    let key = (n, max_order, max_factors.max(1));
    if let Some(v) = cache().lock().expect("cache lock").get(&key) {
        return v.clone();
    }
    let v = enumerate_uncached(n, max_order, max_factors.max(1));
    cache().lock().expect("cache lock").insert(key, v.clone());
    v
}

fn enumerate_uncached(n: usize, max_order: usize, max_factors: usize) -> Vec<InvariantSpec> {
    let scal = InvariantSpec::scalar_curvature();
    let mut candidates = vec![scal.clone()];
    for factors in spec::factor_sequences(max_order, max_factors) {
        candidates.extend(spec::canonical_pairings(&factors).into_iter().filter(|s| *s != scal));
    }
    if n < 2 {
        return vec![scal];
    }
    let needed = candidates.iter().flat_map(|s| s.factors().iter().copied()).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(DEDUP_SEED ^ n as u64);
    // values[c][sample], bounds[c][sample]
    let mut values = vec![Vec::new(); candidates.len()];
    let mut bounds = vec![Vec::new(); candidates.len()];
    for _ in 0..DEDUP_METRICS {
        let chart = Arc::new(random_analytic_metric(n, &mut rng));
        let ev = WeylEvaluator::jet(&chart, needed).expect("random metric builds");
        for _ in 0..DEDUP_POINTS {
            let point: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let pc = ev.curvature_at(&point).expect("random metric is regular");
            let frame = FrameCurvature::new(&pc, needed);
            let norms: Vec<f64> = (0..=needed).map(|s| frame.norm(s)).collect();
            for (c, spec) in candidates.iter().enumerate() {
                values[c].push(frame.contract(spec));
                bounds[c].push(spec.factors().iter().map(|&s| norms[s]).product::<f64>());
            }
        }
    }
    let mut kept: Vec<(InvariantSpec, Vec<f64>)> = Vec::new();
    for (c, spec) in candidates.into_iter().enumerate() {
        let nonzero = values[c].iter().zip(&bounds[c]).any(|(v, b)| v.abs() > DEDUP_TOL * b);
        if !nonzero && !spec.is_scalar_curvature() {
            continue;
        }
        let norm = values[c].iter().map(|v| v * v).sum::<f64>().sqrt();
        let unit: Vec<f64> = values[c].iter().map(|v| v / norm).collect();
        let duplicate = kept.iter().any(|(_, u)| {
            let plus = u.iter().zip(&unit).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let minus = u.iter().zip(&unit).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
            plus.min(minus) < DEDUP_TOL
        });
        if !duplicate {
            kept.push((spec, unit));
        }
    }
    kept.into_iter().map(|(s, _)| s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singer_values() {
        let got: Vec<usize> = (1..=6).map(singer_bound).collect();
        assert_eq!(got, vec![0, 1, 3, 6, 10, 15]);
    }

    #[test]
    fn default_caps() {
        assert_eq!(InvariantCaps::default_for(2), InvariantCaps { max_order: 1, max_factors: 2 });
        assert_eq!(InvariantCaps::default_for(3).max_order, 3);
        assert_eq!(InvariantCaps::default_for(4).max_order, 3);
    }

    #[test]
    fn surfaces_have_only_scalar_curvature_at_order_zero() {
        assert_eq!(enumerate_invariants(2, 0, 1), vec![InvariantSpec::scalar_curvature()]);
        // products of two curvature factors all reduce to scal² in dimension two
        assert_eq!(enumerate_invariants(2, 1, 2).len(), 2);
    }

    #[test]
    fn enumeration_is_deterministic() {
        let a = enumerate_uncached(3, 2, 2);
        let b = enumerate_uncached(3, 2, 2);
        assert_eq!(a, b);
        assert!(a[0].is_scalar_curvature());
    }
}
