use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::field::CompiledTensor;
use super::{MetricChart, PointCurvature, Result, TensorError, TensorField};
use crate::expr::{sum, Number, ScalarExpr};

/// Largest dimension for which the inverse metric is formed symbolically.
pub const SYMBOLIC_MAX_DIM: usize = 3;

/// Knobs for the curvature assembly.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CurvatureOptions {
    /// Test hook: flips the sign of the quadratic Christoffel terms in the
    /// curvature tensor, producing a deliberately wrong convention.
    #[doc(hidden)]
    pub flip_quadratic_terms: bool,
}

fn half() -> ScalarExpr {
    ScalarExpr::number(Number::Rational(1, 2))
}

/// `g` as a (0,2) field.
pub fn metric_tensor(chart: &Arc<MetricChart>) -> TensorField {
    let n = chart.dim();
    let mut g = TensorField::zero(chart.clone(), 0, 2);
    for i in 0..n {
        for j in 0..n {
            g.set_unchecked(vec![i, j], chart.component(i, j).clone());
        }
    }
    g
}

fn is_diagonal(chart: &MetricChart) -> bool {
    let n = chart.dim();
    (0..n).all(|i| (0..n).all(|j| i == j || chart.component(i, j).is_zero()))
}

/// `g^{-1}` as a (2,0) field: adjugate over determinant, for `n <= 3`.
pub fn inverse_metric(chart: &Arc<MetricChart>) -> Result<TensorField> {
    let n = chart.dim();
    if n > SYMBOLIC_MAX_DIM {
        return Err(TensorError::DimensionTooLarge { n, max: SYMBOLIC_MAX_DIM });
    }
    let g = |i: usize, j: usize| chart.component(i, j).clone();
    let mut inv = TensorField::zero(chart.clone(), 2, 0);
    if is_diagonal(chart) {
        for i in 0..n {
            if g(i, i).is_zero() {
                return Err(TensorError::DegenerateMetric);
            }
            inv.set_unchecked(vec![i, i], ScalarExpr::one().div(&g(i, i)));
        }
        return Ok(inv);
    }
    let minor2 = |a: usize, b: usize, c: usize, d: usize| g(a, c).mul(&g(b, d)).sub(&g(a, d).mul(&g(b, c)));
    let (det, adj): (ScalarExpr, Vec<Vec<ScalarExpr>>) = match n {
        1 => (g(0, 0), vec![vec![ScalarExpr::one()]]),
        2 => (
            minor2(0, 1, 0, 1),
            vec![vec![g(1, 1), g(0, 1).neg()], vec![g(0, 1).neg(), g(0, 0)]],
        ),
        _ => {
            // cofactor C_ij = (-1)^{i+j} M_ij, adjugate = C^T (symmetric here)
            let cof = |i: usize, j: usize| {
                let rows: Vec<usize> = (0..3).filter(|&r| r != i).collect();
                let cols: Vec<usize> = (0..3).filter(|&c| c != j).collect();
                let m = minor2(rows[0], rows[1], cols[0], cols[1]);
                if (i + j).is_multiple_of(2) {
                    m
                } else {
                    m.neg()
                }
            };
            let adj: Vec<Vec<ScalarExpr>> = (0..3).map(|i| (0..3).map(|j| cof(j, i)).collect()).collect();
            let det = sum((0..3).map(|j| g(0, j).mul(&cof(0, j))));
            (det, adj)
        }
    };
    if det.is_zero() {
        return Err(TensorError::DegenerateMetric);
    }
    for i in 0..n {
        for j in 0..n {
            inv.set_unchecked(vec![i, j], adj[i][j].div(&det));
        }
    }
    Ok(inv)
}

/// The Levi-Civita connection of a chart with its Christoffel symbols held
/// symbolically.
#[derive(Clone, Debug)]
pub struct LeviCivita {
    chart: Arc<MetricChart>,
    inverse: TensorField,
    /// dense `Γ^k_ij` at `k*n*n + i*n + j`
    gamma: Vec<ScalarExpr>,
    options: CurvatureOptions,
}

impl LeviCivita {
    pub fn new(chart: &Arc<MetricChart>) -> Result<Self> {
        Self::with_options(chart, CurvatureOptions::default())
    }

    pub fn with_options(chart: &Arc<MetricChart>, options: CurvatureOptions) -> Result<Self> {
        let n = chart.dim();
        let inverse = inverse_metric(chart)?;
        let coords = chart.coords();
        // dg[l][i][j] = ∂_l g_ij
        let dg: Vec<Vec<Vec<ScalarExpr>>> = (0..n)
            .map(|l| {
                (0..n)
                    .map(|i| (0..n).map(|j| chart.component(i, j).differentiate(&coords[l])).collect())
                    .collect()
            })
            .collect();
        let mut gamma = vec![ScalarExpr::zero(); n * n * n];
        for i in 0..n {
            for j in i..n {
                // first kind Γ_{l,ij}
                let first: Vec<ScalarExpr> = (0..n)
                    .map(|l| half().mul(&dg[j][l][i].add(&dg[i][l][j]).sub(&dg[l][i][j])))
                    .collect();
                for k in 0..n {
                    let v = sum((0..n).map(|l| inverse.get(&[k, l]).mul(&first[l])));
                    gamma[k * n * n + i * n + j] = v.clone();
                    gamma[k * n * n + j * n + i] = v;
                }
            }
        }
        Ok(LeviCivita { chart: chart.clone(), inverse, gamma, options })
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.chart
    }

    pub fn inverse(&self) -> &TensorField {
        &self.inverse
    }

    /// `Γ^k_ij`.
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> &ScalarExpr {
        let n = self.chart.dim();
        &self.gamma[k * n * n + i * n + j]
    }

    /// The symbols as a (1,2) component array `[k, i, j]`. They are not the
    /// components of a tensor under chart changes.
    pub fn christoffel(&self) -> TensorField {
        let n = self.chart.dim();
        let mut t = TensorField::zero(self.chart.clone(), 1, 2)
            .with_slot_labels(vec!["k".into(), "i".into(), "j".into()]);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    t.set_unchecked(vec![k, i, j], self.gamma(k, i, j).clone());
                }
            }
        }
        t
    }

    /// `R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`.
    pub fn riemann(&self) -> TensorField {
        let n = self.chart.dim();
        let coords = self.chart.coords();
        let mut r = TensorField::zero(self.chart.clone(), 1, 3)
            .with_slot_labels(vec!["l".into(), "k".into(), "i".into(), "j".into()]);
        // dgamma[(m, l, a, b)] = ∂_m Γ^l_ab
        let mut dgamma = BTreeMap::new();
        let mut d = |m: usize, l: usize, a: usize, b: usize| -> ScalarExpr {
            let key = (m, l, a.min(b), a.max(b));
            dgamma
                .entry(key)
                .or_insert_with(|| self.gamma(l, a, b).differentiate(&coords[m]))
                .clone()
        };
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let linear = d(i, l, j, k).sub(&d(j, l, i, k));
                        let quadratic = sum((0..n).map(|m| {
                            self.gamma(l, i, m)
                                .mul(self.gamma(m, j, k))
                                .sub(&self.gamma(l, j, m).mul(self.gamma(m, i, k)))
                        }));
                        let v = if self.options.flip_quadratic_terms {
                            linear.sub(&quadratic)
                        } else {
                            linear.add(&quadratic)
                        };
                        r.set_unchecked(vec![l, k, j, i], v.neg());
                        r.set_unchecked(vec![l, k, i, j], v);
                    }
                }
            }
        }
        r
    }

    /// Lowers the first (contravariant) slot with the metric:
    /// `T_{a, ..} = g_{a b} T^b_{..}`.
    pub fn lower_first(&self, t: &TensorField) -> Result<TensorField> {
        if t.contravariant() != 1 {
            return Err(TensorError::SlotTypeMismatch { upper: 0, lower: 0 });
        }
        let n = self.chart.dim();
        let mut terms: BTreeMap<Vec<usize>, Vec<ScalarExpr>> = BTreeMap::new();
        for (idx, e) in t.components() {
            for a in 0..n {
                let g = self.chart.component(a, idx[0]);
                if g.is_zero() {
                    continue;
                }
                let mut out = idx.clone();
                out[0] = a;
                terms.entry(out).or_default().push(g.mul(e));
            }
        }
        let mut out = TensorField::zero(self.chart.clone(), 0, t.rank()).with_slot_labels(t.slot_labels().to_vec());
        for (idx, ts) in terms {
            out.set_unchecked(idx, sum(ts));
        }
        Ok(out)
    }

    /// `∇T` with the new covariant slot appended last:
    /// `∂_m T + Σ Γ^{a_r}_{m e} T^{..e..} − Σ Γ^e_{m b_r} T_{..e..}`.
    pub fn covariant_derivative(&self, t: &TensorField) -> Result<TensorField> {
        if !Arc::ptr_eq(t.chart(), &self.chart) && **t.chart() != *self.chart {
            return Err(TensorError::ChartMismatch);
        }
        let n = self.chart.dim();
        let p = t.contravariant();
        let coords = self.chart.coords();
        let mut terms: BTreeMap<Vec<usize>, Vec<ScalarExpr>> = BTreeMap::new();
        for (idx, e) in t.components() {
            for m in 0..n {
                let mut out = idx.clone();
                out.push(m);
                let de = e.differentiate(&coords[m]);
                if !de.is_zero() {
                    terms.entry(out.clone()).or_default().push(de);
                }
                for r in 0..idx.len() {
                    let src = idx[r];
                    for c in 0..n {
                        let coeff = if r < p { self.gamma(c, m, src) } else { self.gamma(src, m, c) };
                        if coeff.is_zero() {
                            continue;
                        }
                        let mut target = out.clone();
                        target[r] = c;
                        let term = coeff.mul(e);
                        terms.entry(target).or_default().push(if r < p { term } else { term.neg() });
                    }
                }
            }
        }
        let mut labels = t.slot_labels().to_vec();
        labels.push(format!("n{}", t.covariant()));
        let mut out = TensorField::zero(self.chart.clone(), p, t.covariant() + 1).with_slot_labels(labels);
        for (idx, ts) in terms {
            out.set_unchecked(idx, sum(ts));
        }
        Ok(out)
    }
}

pub fn christoffel(chart: &Arc<MetricChart>) -> Result<TensorField> {
    Ok(LeviCivita::new(chart)?.christoffel())
}

pub fn riemann_curvature(chart: &Arc<MetricChart>) -> Result<TensorField> {
    Ok(LeviCivita::new(chart)?.riemann())
}

pub fn covariant_derivative(t: &TensorField, chart: &Arc<MetricChart>) -> Result<TensorField> {
    LeviCivita::new(chart)?.covariant_derivative(t)
}

/// `Ric_kj = R^i_kij`, the contraction of the upper slot with the first
/// slot of the differentiating pair.
pub fn ricci_tensor(chart: &Arc<MetricChart>) -> Result<TensorField> {
    super::contract(&riemann_curvature(chart)?, 0, 2)
}

pub fn scalar_curvature(chart: &Arc<MetricChart>) -> Result<ScalarExpr> {
    let ric = ricci_tensor(chart)?;
    let inv = inverse_metric(chart)?;
    let mixed = super::tensor_product(&inv, &ric)?;
    let once = super::contract(&mixed, 0, 2)?;
    let scalar = super::contract(&once, 0, 1)?;
    Ok(scalar.get(&[]))
}

/// Metric and its numeric inverse at a point, with the singularity and
/// positivity checks applied.
pub(crate) fn metric_and_inverse(chart: &MetricChart, point: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let g = chart.metric_at(point)?;
    let det = g.determinant();
    if !(det.abs() >= chart.pd_floor()) {
        return Err(TensorError::SingularMetric { point: point.to_vec(), determinant: det });
    }
    let g = chart.validated_metric_at(point)?;
    let inv = g
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(TensorError::SingularMetric { point: point.to_vec(), determinant: det })?;
    Ok((g, inv))
}

/// The symbolic route: every curvature quantity up to `∇^s R` built as
/// expressions once, compiled, and evaluated per point.
#[derive(Clone, Debug)]
pub struct SymbolicCurvature {
    chart: Arc<MetricChart>,
    max_order: usize,
    christoffel: CompiledTensor,
    riemann: CompiledTensor,
    nabla_riemann: Vec<CompiledTensor>,
    nabla_metric: CompiledTensor,
    fields: Vec<TensorField>,
}

impl SymbolicCurvature {
    pub fn new(chart: &Arc<MetricChart>, max_order: usize) -> Result<Self> {
        Self::with_options(chart, max_order, CurvatureOptions::default())
    }

    pub fn with_options(chart: &Arc<MetricChart>, max_order: usize, options: CurvatureOptions) -> Result<Self> {
        let lc = LeviCivita::with_options(chart, options)?;
        let gamma = lc.christoffel();
        let r = lc.riemann();
        let mut current = lc.lower_first(&r)?;
        let mut fields = vec![current.clone()];
        for _ in 0..max_order {
            current = lc.covariant_derivative(&current)?;
            fields.push(current.clone());
        }
        let nabla_g = lc.covariant_derivative(&metric_tensor(chart))?;
        Ok(SymbolicCurvature {
            chart: chart.clone(),
            max_order,
            christoffel: gamma.compile()?,
            riemann: r.compile()?,
            nabla_riemann: fields.iter().map(TensorField::compile).collect::<Result<_>>()?,
            nabla_metric: nabla_g.compile()?,
            fields,
        })
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.chart
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// The symbolic fully covariant `∇^s R` fields, `s = 0..=max_order`.
    pub fn nabla_riemann_fields(&self) -> &[TensorField] {
        &self.fields
    }

    pub fn at(&self, point: &[f64]) -> Result<PointCurvature> {
        let (metric, inverse) = metric_and_inverse(&self.chart, point)?;
        Ok(PointCurvature {
            point: point.to_vec(),
            metric,
            inverse,
            christoffel: self.christoffel.eval(point)?,
            riemann: self.riemann.eval(point)?,
            nabla_riemann: self.nabla_riemann.iter().map(|c| c.eval(point)).collect::<Result<_>>()?,
            nabla_metric: self.nabla_metric.eval(point)?,
        })
    }
}
