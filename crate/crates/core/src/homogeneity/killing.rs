use std::sync::Arc;

use rayon::prelude::*;

use super::{jacobian, HomogeneityError, Result};
use crate::expr::{parse_expression, sum, CompiledExprs, ScalarExpr};
use crate::tensor::{MetricChart, TensorError, TensorField};
use crate::weyl::{ConsoleOlmosField, SampleGrid};

/// `L_ξ g` below this everywhere on the grid counts as Killing.
pub const KILLING_TOLERANCE: f64 = 1e-8;

/// A vector field `ξ = ξ^m ∂_m` with symbolic components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldExpr {
    components: Vec<ScalarExpr>,
}

impl VectorFieldExpr {
    pub fn new(components: Vec<ScalarExpr>) -> Self {
        VectorFieldExpr { components }
    }

    pub fn parse<S: AsRef<str>>(components: &[S], coords: &[String]) -> Result<Self> {
        let components = components
            .iter()
            .map(|c| parse_expression(c.as_ref(), coords))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| HomogeneityError::InvalidVectorField(e.to_string()))?;
        Ok(VectorFieldExpr { components })
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    fn check(&self, chart: &MetricChart) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(HomogeneityError::InvalidVectorField(format!(
                "{} components on a chart of dimension {}",
                self.dim(),
                chart.dim()
            )));
        }
        for c in &self.components {
            if let Some(v) = c.variables().into_iter().find(|v| chart.coord_index(v).is_none()) {
                return Err(HomogeneityError::InvalidVectorField(format!("unknown coordinate `{v}`")));
            }
        }
        Ok(())
    }
}

/// `(L_ξ g)_ij = ξ^m ∂_m g_ij + g_mj ∂_i ξ^m + g_im ∂_j ξ^m`.
pub fn killing_residual(chart: &Arc<MetricChart>, xi: &VectorFieldExpr) -> Result<TensorField> {
    xi.check(chart)?;
    let n = chart.dim();
    let coords = chart.coords();
    // dxi[i][m] = ∂_i ξ^m
    let dxi: Vec<Vec<ScalarExpr>> =
        (0..n).map(|i| xi.components.iter().map(|c| c.differentiate(&coords[i])).collect()).collect();
    let entries = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| {
        let transport = sum((0..n).map(|m| xi.components[m].mul(&chart.component(i, j).differentiate(&coords[m]))));
        let left = sum((0..n).map(|m| chart.component(m, j).mul(&dxi[i][m])));
        let right = sum((0..n).map(|m| chart.component(i, m).mul(&dxi[j][m])));
        (vec![i, j], transport.add(&left).add(&right))
    });
    Ok(TensorField::from_components(chart.clone(), 0, 2, entries.collect::<Vec<_>>())?)
}

/// Largest `|dW(ξ)|` over the grid, after checking that `ξ` is Killing.
pub fn killing_tangency_check(field: &ConsoleOlmosField, xi: &VectorFieldExpr, grid: &SampleGrid) -> Result<f64> {
    let chart = field.chart();
    let residual = killing_residual(chart, xi)?.compile()?;
    let xi_prog = CompiledExprs::compile(xi.components(), chart.coords()).map_err(TensorError::from)?;
    let max_residual = (0..grid.len())
        .into_par_iter()
        .map(|k| residual.eval(&grid.point(k)).map(|t| t.max_abs()))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    if !(max_residual < KILLING_TOLERANCE) {
        return Err(HomogeneityError::NotKilling { max_residual });
    }
    (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let x = grid.point(k);
            let jac = jacobian(field, &x)?;
            let v = xi_prog.eval(&x).map_err(TensorError::from)?;
            let dw = (0..jac.nrows())
                .map(|i| (0..jac.ncols()).map(|a| jac[(i, a)] * v[a]).sum::<f64>().powi(2))
                .sum::<f64>();
            Ok(dw.sqrt())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}
