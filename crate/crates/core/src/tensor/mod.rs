//! Metric charts, symbolic tensor fields and the Levi-Civita calculus on them.
//!
//! Two evaluation routes produce curvature data at points:
//!
//! * the symbolic route ([`LeviCivita`]) builds every component as a
//!   [`ScalarExpr`]; it needs the symbolic inverse metric and is limited to
//!   charts of dimension at most [`SYMBOLIC_MAX_DIM`];
//! * the jet route ([`JetCurvature`]) propagates truncated Taylor expansions
//!   of the metric through the same formulas numerically, one point at a time,
//!   and works in any dimension.
//!
//! Both hand out [`PointCurvature`] values, so everything downstream is
//! agnostic of the route.
//!
//! Sign convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` with
//! components `R^l_kij` defined by `R(∂_i, ∂_j)∂_k = R^l_kij ∂_l`, so that
//! `R_lkij = g_la R^a_kij` and the sectional curvature of the plane spanned
//! by `∂_i, ∂_j` is `R_ijij / (g_ii g_jj − g_ij²)`.

mod chart;
mod field;
mod jet;
mod point;
mod symbolic;

pub use chart::{Interval, MetricChart, DEFAULT_PD_FLOOR};
pub use field::{contract, tensor_product, MultiIndices, TensorField};
pub use jet::{JetCurvature, JetSpace};
pub use point::{PointCurvature, PointTensor};
pub use symbolic::{
    christoffel, covariant_derivative, inverse_metric, metric_tensor, ricci_tensor,
    riemann_curvature, scalar_curvature, CurvatureOptions, LeviCivita, SymbolicCurvature,
    SYMBOLIC_MAX_DIM,
};

use thiserror::Error;

use crate::expr::EvalError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("metric is singular at {point:?} (determinant {determinant:e})")]
    SingularMetric { point: Vec<f64>, determinant: f64 },
    #[error("metric determinant is identically zero")]
    DegenerateMetric,
    #[error("metric is not positive definite at {point:?} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { point: Vec<f64>, min_eigenvalue: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("slot {upper} must be contravariant and slot {lower} covariant")]
    SlotTypeMismatch { upper: usize, lower: usize },
    #[error("slot {slot} out of range for a tensor with {rank} slots")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("tensors live on different charts")]
    ChartMismatch,
    #[error("multi-index {index:?} is invalid for a ({p},{q}) tensor in dimension {n}")]
    BadMultiIndex { index: Vec<usize>, p: usize, q: usize, n: usize },
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("symbolic inverse metric is limited to dimension {max}, chart has dimension {n}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("point {point:?} has {got} coordinates, chart dimension is {n}")]
    PointDimension { point: Vec<f64>, got: usize, n: usize },
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
