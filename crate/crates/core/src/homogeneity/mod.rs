//! Deciding local homogeneity from a sampled invariant field, and the
//! finer structure: rank of `dW`, strata, level sets and Killing fields.

mod jacobian;
mod killing;
mod trace;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use jacobian::{
    jacobian, jacobian_rank, jacobian_with_step, numerical_rank, stratify, StratificationReport, Stratum,
    DEFAULT_RANK_TOLERANCE, FD_STEP_FRACTION, RANK_ABS_FLOOR,
};
pub use killing::{killing_residual, killing_tangency_check, VectorFieldExpr, KILLING_TOLERANCE};
pub use trace::{fiber_induced_metric, trace_level_set, FiberMetric, LevelSet, Polyline, TRACE_STEP};

use crate::tensor::TensorError;
use crate::weyl::{ConsoleOlmosField, WeylError};

/// Points flagged above this fraction make a verdict inconclusive.
pub const INCONCLUSIVE_FRACTION: f64 = 0.05;

pub const DEFAULT_CONSTANCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomogeneityError {
    #[error("need at least 2 valid sample points, have {valid}")]
    InsufficientSamples { valid: usize },
    #[error("finite-difference stencil at {point:?} leaves the domain along axis {axis}")]
    StencilOutOfDomain { point: Vec<f64>, axis: usize },
    #[error("seed is critical (rank of dW is {rank}, need 1)")]
    CriticalSeed { rank: usize },
    #[error("corrector failed to return to the level set near {point:?} (residual {residual:e})")]
    LostTrack { point: Vec<f64>, residual: f64 },
    #[error("degenerate polyline: {0}")]
    DegeneratePolyline(String),
    #[error("vector field is not Killing: max |L_ξ g| = {max_residual:e}")]
    NotKilling { max_residual: f64 },
    #[error("invalid vector field: {0}")]
    InvalidVectorField(String),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T, E = HomogeneityError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LocallyHomogeneous,
    NotLocallyHomogeneous,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::LocallyHomogeneous => "locally homogeneous",
            Verdict::NotLocallyHomogeneous => "not locally homogeneous",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantStats {
    pub name: String,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `(max − min) / (1 + |mean|)`
    pub relative_spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub invariants: Vec<InvariantStats>,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub samples: usize,
    pub flagged: usize,
}

impl HomogeneityReport {
    pub fn max_spread(&self) -> f64 {
        self.invariants.iter().fold(0.0, |m, s| m.max(s.relative_spread))
    }
}

/// Every invariant constant over the valid samples (relative spread below
/// `tolerance`) means locally homogeneous, unless too many points are
/// flagged to say anything.
pub fn ptv_test(field: &ConsoleOlmosField, tolerance: f64) -> Result<HomogeneityReport> {
    let valid: Vec<usize> = field.valid_indices().collect();
    if valid.len() < 2 {
        return Err(HomogeneityError::InsufficientSamples { valid: valid.len() });
    }
    let invariants: Vec<InvariantStats> = field
        .specs()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let (mut min, mut max, mut total) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for &k in &valid {
                let v = field.values()[k][i];
                min = min.min(v);
                max = max.max(v);
                total += v;
            }
            let mean = total / valid.len() as f64;
            InvariantStats { name: spec.to_string(), mean, min, max, relative_spread: (max - min) / (1.0 + mean.abs()) }
        })
        .collect();
    let flagged = field.flagged_count();
    let verdict = if field.flagged_fraction() >= INCONCLUSIVE_FRACTION {
        Verdict::Inconclusive
    } else if invariants.iter().all(|s| s.relative_spread < tolerance) {
        Verdict::LocallyHomogeneous
    } else {
        Verdict::NotLocallyHomogeneous
    };
    Ok(HomogeneityReport { invariants, verdict, tolerance, samples: field.len(), flagged })
}
