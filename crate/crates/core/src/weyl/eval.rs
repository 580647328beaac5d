use std::sync::Arc;

use nalgebra::DMatrix;

use super::{InvariantSpec, WeylError};
use crate::tensor::{
    CurvatureOptions, JetCurvature, MetricChart, PointCurvature, PointTensor, SymbolicCurvature, SYMBOLIC_MAX_DIM,
};

#[derive(Clone, Debug)]
enum Backend {
    Symbolic(SymbolicCurvature),
    Jet(JetCurvature),
}

/// Evaluates invariants on one chart, holding the compiled curvature
/// factors so that repeated evaluations share them.
///
/// Charts of dimension up to three use the symbolic route, larger ones the
/// jet route.
#[derive(Clone, Debug)]
pub struct WeylEvaluator {
    chart: Arc<MetricChart>,
    max_order: usize,
    backend: Backend,
}

impl WeylEvaluator {
    pub fn new(chart: &Arc<MetricChart>, max_order: usize) -> Result<Self, WeylError> {
        Self::with_options(chart, max_order, CurvatureOptions::default())
    }

    pub fn with_options(chart: &Arc<MetricChart>, max_order: usize, options: CurvatureOptions) -> Result<Self, WeylError> {
        let backend = if chart.dim() <= SYMBOLIC_MAX_DIM {
            Backend::Symbolic(SymbolicCurvature::with_options(chart, max_order, options)?)
        } else {
            Backend::Jet(JetCurvature::with_options(chart, max_order, options)?)
        };
        Ok(WeylEvaluator { chart: chart.clone(), max_order, backend })
    }

    /// Always uses the jet route, whatever the dimension.
    pub fn jet(chart: &Arc<MetricChart>, max_order: usize) -> Result<Self, WeylError> {
        Ok(WeylEvaluator {
            chart: chart.clone(),
            max_order,
            backend: Backend::Jet(JetCurvature::new(chart, max_order)?),
        })
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.chart
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn is_symbolic(&self) -> bool {
        matches!(self.backend, Backend::Symbolic(_))
    }

    pub fn curvature_at(&self, point: &[f64]) -> Result<PointCurvature, WeylError> {
        Ok(match &self.backend {
            Backend::Symbolic(s) => s.at(point)?,
            Backend::Jet(j) => j.at(point)?,
        })
    }

    /// All `specs` at `point`.
    pub fn evaluate(&self, specs: &[InvariantSpec], point: &[f64]) -> Result<Vec<f64>, WeylError> {
        let needed = specs.iter().flat_map(|s| s.factors().iter().copied()).max().unwrap_or(0);
        if needed > self.max_order {
            return Err(WeylError::OrderTooHigh { needed, available: self.max_order });
        }
        let pc = self.curvature_at(point)?;
        let frame = FrameCurvature::new(&pc, needed);
        Ok(specs.iter().map(|s| frame.contract(s)).collect())
    }
}

/// `∇^s R` in an orthonormal frame, where every contraction is a plain sum
/// over matching indices.
#[derive(Clone, Debug)]
pub struct FrameCurvature {
    n: usize,
    factors: Vec<PointTensor>,
}

impl FrameCurvature {
    pub fn new(pc: &PointCurvature, max_order: usize) -> Self {
        let e = orthonormal_frame(&pc.metric);
        let factors = pc.nabla_riemann[..=max_order].iter().map(|t| t.transform_covariant(&e)).collect();
        FrameCurvature { n: pc.dim(), factors }
    }

    pub fn factor(&self, s: usize) -> &PointTensor {
        &self.factors[s]
    }

    /// Frobenius norm of `∇^s R`.
    pub fn norm(&self, s: usize) -> f64 {
        self.factors[s].data().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Sums the product of the factors over every index assignment
    /// consistent with the pairing.
    pub fn contract(&self, spec: &InvariantSpec) -> f64 {
        let n = self.n;
        let offsets = spec.factor_offsets();
        let mut owner = vec![(0usize, 0usize); spec.slot_count()];
        for (f, &s) in spec.factors().iter().enumerate() {
            let rank = 4 + s;
            for r in 0..rank {
                owner[offsets[f] + r] = (f, n.pow((rank - 1 - r) as u32));
            }
        }
        // per pair, the flat-offset increments it causes in each factor
        let pairs = spec.pairing();
        let mut step = vec![vec![0usize; spec.factor_count()]; pairs.len()];
        for (k, &(a, b)) in pairs.iter().enumerate() {
            for slot in [a, b] {
                let (f, stride) = owner[slot];
                step[k][f] += stride;
            }
        }
        let data: Vec<&[f64]> = spec.factors().iter().map(|&s| self.factors[s].data()).collect();
        let mut idx = vec![0usize; pairs.len()];
        let mut off = vec![0usize; spec.factor_count()];
        let mut total = 0.0;
        loop {
            total += off.iter().zip(&data).map(|(&o, d)| d[o]).product::<f64>();
            let mut k = pairs.len();
            loop {
                if k == 0 {
                    return total;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < n {
                    for (o, d) in off.iter_mut().zip(&step[k]) {
                        *o += d;
                    }
                    break;
                }
                idx[k] = 0;
                for (o, d) in off.iter_mut().zip(&step[k]) {
                    *o -= d * (n - 1);
                }
            }
        }
    }
}

/// `E` with `Eᵀ g E = I`, from the Cholesky factor `g = L Lᵀ`: `E = L⁻ᵀ`.
pub fn orthonormal_frame(g: &DMatrix<f64>) -> DMatrix<f64> {
    let l = g.clone().cholesky().expect("metric checked positive definite").l();
    let linv = l.try_inverse().expect("triangular factor is invertible");
    linv.transpose()
}

/// One-off evaluation of a single invariant at a point.
pub fn evaluate_invariant(spec: &InvariantSpec, chart: &Arc<MetricChart>, point: &[f64]) -> Result<f64, WeylError> {
    let max_order = spec.factors().iter().copied().max().unwrap_or(0);
    let ev = WeylEvaluator::new(chart, max_order)?;
    Ok(ev.evaluate(std::slice::from_ref(spec), point)?[0])
}
