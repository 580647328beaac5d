use std::collections::BTreeMap;
use std::sync::Arc;

use super::point::PointTensor;
use super::{MetricChart, Result, TensorError};
use crate::expr::{CompiledExprs, ScalarExpr};

/// Lexicographic iterator over all multi-indices in `[0, n)^rank`.
#[derive(Clone, Debug)]
pub struct MultiIndices {
    n: usize,
    current: Option<Vec<usize>>,
}

impl MultiIndices {
    pub fn new(n: usize, rank: usize) -> Self {
        let current = if n == 0 && rank > 0 { None } else { Some(vec![0; rank]) };
        MultiIndices { n, current }
    }
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut k = next.len();
        loop {
            if k == 0 {
                self.current = None;
                break;
            }
            k -= 1;
            next[k] += 1;
            if next[k] < self.n {
                self.current = Some(next);
                break;
            }
            next[k] = 0;
        }
        Some(out)
    }
}

/// A `(p, q)` tensor field with symbolic components.
///
/// Multi-indices list the `p` contravariant slots first, then the `q`
/// covariant ones. Components are stored sparsely: an absent entry is the
/// zero expression, and structural zeros are never stored.
#[derive(Clone, Debug)]
pub struct TensorField {
    chart: Arc<MetricChart>,
    contravariant: usize,
    covariant: usize,
    components: BTreeMap<Vec<usize>, ScalarExpr>,
    slot_labels: Vec<String>,
}

impl TensorField {
    /// The zero `(p, q)` field.
    pub fn zero(chart: Arc<MetricChart>, contravariant: usize, covariant: usize) -> Self {
        let slot_labels = (0..contravariant)
            .map(|k| format!("u{k}"))
            .chain((0..covariant).map(|k| format!("d{k}")))
            .collect();
        TensorField { chart, contravariant, covariant, components: BTreeMap::new(), slot_labels }
    }

    pub fn from_components<I>(chart: Arc<MetricChart>, contravariant: usize, covariant: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, ScalarExpr)>,
    {
        let mut t = Self::zero(chart, contravariant, covariant);
        for (idx, e) in entries {
            t.check_index(&idx)?;
            let acc = t.get(&idx).add(&e);
            t.set_unchecked(idx, acc);
        }
        Ok(t)
    }

    pub fn with_slot_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.rank(), "one label per slot");
        self.slot_labels = labels;
        self
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn contravariant(&self) -> usize {
        self.contravariant
    }

    pub fn covariant(&self) -> usize {
        self.covariant
    }

    pub fn rank(&self) -> usize {
        self.contravariant + self.covariant
    }

    pub fn slot_labels(&self) -> &[String] {
        &self.slot_labels
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        let n = self.dim();
        if idx.len() != self.rank() || idx.iter().any(|&i| i >= n) {
            return Err(TensorError::BadMultiIndex {
                index: idx.to_vec(),
                p: self.contravariant,
                q: self.covariant,
                n,
            });
        }
        Ok(())
    }

    /// Component at `idx`; zero when absent.
    pub fn get(&self, idx: &[usize]) -> ScalarExpr {
        self.components.get(idx).cloned().unwrap_or_else(ScalarExpr::zero)
    }

    pub fn set(&mut self, idx: Vec<usize>, value: ScalarExpr) -> Result<()> {
        self.check_index(&idx)?;
        self.set_unchecked(idx, value);
        Ok(())
    }

    pub(crate) fn set_unchecked(&mut self, idx: Vec<usize>, value: ScalarExpr) {
        if value.is_zero() {
            self.components.remove(&idx);
        } else {
            self.components.insert(idx, value);
        }
    }

    /// Nonzero components in lexicographic multi-index order.
    pub fn components(&self) -> impl Iterator<Item = (&Vec<usize>, &ScalarExpr)> {
        self.components.iter()
    }

    pub fn nonzero_count(&self) -> usize {
        self.components.len()
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.components.is_empty()
    }

    pub fn same_chart(&self, other: &TensorField) -> bool {
        Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> TensorField {
        let mut out = TensorField { components: BTreeMap::new(), ..self.clone() };
        for (idx, e) in &self.components {
            out.set_unchecked(idx.clone(), f(e));
        }
        out
    }

    pub fn scale(&self, c: &ScalarExpr) -> TensorField {
        self.map(|e| e.mul(c))
    }

    pub fn add(&self, other: &TensorField) -> Result<TensorField> {
        if !self.same_chart(other) {
            return Err(TensorError::ChartMismatch);
        }
        if (self.contravariant, self.covariant) != (other.contravariant, other.covariant) {
            return Err(TensorError::SlotTypeMismatch { upper: self.contravariant, lower: other.contravariant });
        }
        let mut out = self.clone();
        for (idx, e) in &other.components {
            let v = out.get(idx).add(e);
            out.set_unchecked(idx.clone(), v);
        }
        Ok(out)
    }

    /// Compiles every component for repeated numeric evaluation.
    pub fn compile(&self) -> Result<CompiledTensor> {
        let (indices, exprs): (Vec<Vec<usize>>, Vec<ScalarExpr>) =
            self.components.iter().map(|(i, e)| (i.clone(), e.clone())).unzip();
        let program = CompiledExprs::compile(&exprs, self.chart.coords())?;
        let n = self.dim();
        let offsets = indices.iter().map(|idx| flat_offset(n, idx)).collect();
        Ok(CompiledTensor { n, contravariant: self.contravariant, covariant: self.covariant, offsets, program })
    }

    /// Evaluates all components at `point`.
    pub fn evaluate_at(&self, point: &[f64]) -> Result<PointTensor> {
        self.compile()?.eval(point)
    }
}

pub(crate) fn flat_offset(n: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// A tensor field compiled for fast evaluation at many points.
#[derive(Clone, Debug)]
pub struct CompiledTensor {
    n: usize,
    contravariant: usize,
    covariant: usize,
    offsets: Vec<usize>,
    program: CompiledExprs,
}

impl CompiledTensor {
    pub fn eval(&self, point: &[f64]) -> Result<PointTensor> {
        let vals = self.program.eval(point)?;
        let mut t = PointTensor::zeros(self.n, self.contravariant, self.covariant);
        for (&off, v) in self.offsets.iter().zip(vals) {
            t.data_mut()[off] = v;
        }
        Ok(t)
    }
}

/// Contracts contravariant slot `upper_slot` against covariant slot
/// `lower_slot`. Slots are numbered over the whole multi-index, so
/// `upper_slot < p <= lower_slot < p + q`.
pub fn contract(t: &TensorField, upper_slot: usize, lower_slot: usize) -> Result<TensorField> {
    let rank = t.rank();
    for slot in [upper_slot, lower_slot] {
        if slot >= rank {
            return Err(TensorError::SlotOutOfRange { slot, rank });
        }
    }
    if upper_slot >= t.contravariant || lower_slot < t.contravariant {
        return Err(TensorError::SlotTypeMismatch { upper: upper_slot, lower: lower_slot });
    }
    let mut out = TensorField::zero(t.chart.clone(), t.contravariant - 1, t.covariant - 1);
    out.slot_labels = t
        .slot_labels
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != upper_slot && *k != lower_slot)
        .map(|(_, l)| l.clone())
        .collect();
    let mut sums: BTreeMap<Vec<usize>, Vec<ScalarExpr>> = BTreeMap::new();
    for (idx, e) in &t.components {
        if idx[upper_slot] != idx[lower_slot] {
            continue;
        }
        let reduced: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != upper_slot && *k != lower_slot)
            .map(|(_, &i)| i)
            .collect();
        sums.entry(reduced).or_default().push(e.clone());
    }
    for (idx, terms) in sums {
        out.set_unchecked(idx, crate::expr::sum(terms));
    }
    Ok(out)
}

/// Componentwise product. Contravariant slots are `a`'s then `b`'s, and
/// likewise for covariant slots.
pub fn tensor_product(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    if !a.same_chart(b) {
        return Err(TensorError::ChartMismatch);
    }
    let (ap, bp) = (a.contravariant, b.contravariant);
    let mut out = TensorField::zero(a.chart.clone(), ap + bp, a.covariant + b.covariant);
    out.slot_labels = a.slot_labels[..ap]
        .iter()
        .chain(&b.slot_labels[..bp])
        .chain(&a.slot_labels[ap..])
        .chain(&b.slot_labels[bp..])
        .cloned()
        .collect();
    for (ia, ea) in &a.components {
        for (ib, eb) in &b.components {
            let idx: Vec<usize> = ia[..ap]
                .iter()
                .chain(&ib[..bp])
                .chain(&ia[ap..])
                .chain(&ib[bp..])
                .copied()
                .collect();
            out.set_unchecked(idx, ea.mul(eb));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{metric_tensor, Interval};

    fn plane() -> Arc<MetricChart> {
        Arc::new(
            MetricChart::from_text("p", &["x", "y"], &["1+x^2", "x*y", "2"], vec![Interval::new(-1.0, 1.0); 2])
                .unwrap(),
        )
    }

    #[test]
    fn multi_indices_are_lexicographic() {
        let all: Vec<Vec<usize>> = MultiIndices::new(2, 2).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(MultiIndices::new(3, 0).count(), 1);
        assert_eq!(MultiIndices::new(3, 4).count(), 81);
    }

    #[test]
    fn product_signature_and_components() {
        let chart = plane();
        let g = metric_tensor(&chart);
        let gg = tensor_product(&g, &g).unwrap();
        assert_eq!((gg.contravariant(), gg.covariant()), (0, 4));
        let pt = [0.3, -0.4];
        let gv = g.evaluate_at(&pt).unwrap();
        let ggv = gg.evaluate_at(&pt).unwrap();
        for idx in MultiIndices::new(2, 4) {
            let expected = gv.get(&idx[..2]) * gv.get(&idx[2..]);
            assert_eq!(ggv.get(&idx), expected);
        }
        let zero = TensorField::zero(chart.clone(), 1, 1);
        assert!(tensor_product(&g, &zero).unwrap().is_structurally_zero());
    }

    #[test]
    fn contraction_slot_checks() {
        let chart = plane();
        let g = metric_tensor(&chart);
        assert!(matches!(contract(&g, 0, 1), Err(TensorError::SlotTypeMismatch { .. })));
        assert!(matches!(contract(&g, 0, 5), Err(TensorError::SlotOutOfRange { .. })));
    }

    #[test]
    fn chart_mismatch() {
        let a = metric_tensor(&plane());
        let other = Arc::new(
            MetricChart::from_text("q", &["x", "y"], &["1", "0", "1"], vec![Interval::new(-1.0, 1.0); 2]).unwrap(),
        );
        let b = metric_tensor(&other);
        assert_eq!(tensor_product(&a, &b).unwrap_err(), TensorError::ChartMismatch);
    }
}
