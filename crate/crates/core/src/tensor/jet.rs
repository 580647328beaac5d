use std::collections::HashMap;
use std::sync::Arc;

use super::field::flat_offset;
use super::symbolic::metric_and_inverse;
use super::{CurvatureOptions, MetricChart, MultiIndices, PointCurvature, PointTensor, Result};
use crate::expr::{CompiledExprs, ScalarExpr};

/// Truncated multivariate Taylor polynomials in `n` variables up to a fixed
/// total degree.
///
/// A jet is stored as its coefficient vector over monomials in graded
/// lexicographic order, so the part of degree `<= e` is a prefix and lower
/// degree jets are simply shorter vectors.
#[derive(Clone, Debug)]
pub struct JetSpace {
    n: usize,
    degree: usize,
    monomials: Vec<Vec<usize>>,
    /// number of monomials of degree `<= e`
    level_len: Vec<usize>,
    /// `(a, b, c)` with `x^a x^b = x^c`, ordered by `|c|`
    triples: Vec<(u32, u32, u32)>,
    /// number of triples with `|c| <= e`
    triple_len: Vec<usize>,
    /// `shift[m][k]`: index of monomial `k` times `x_m`
    shift: Vec<Vec<usize>>,
}

impl JetSpace {
    pub fn new(n: usize, degree: usize) -> Self {
        let mut monomials = Vec::new();
        let mut level_len = Vec::with_capacity(degree + 1);
        for d in 0..=degree {
            let mut level = Vec::new();
            compositions(n, d, &mut vec![0; n], 0, &mut level);
            level.reverse(); // x_0^d first
            monomials.extend(level);
            level_len.push(monomials.len());
        }
        let index: HashMap<Vec<usize>, usize> = monomials.iter().cloned().enumerate().map(|(k, m)| (m, k)).collect();
        let total = |m: &[usize]| m.iter().sum::<usize>();
        let mut triples = Vec::new();
        for (ia, a) in monomials.iter().enumerate() {
            for (ib, b) in monomials.iter().enumerate() {
                if total(a) + total(b) > degree {
                    continue;
                }
                let c: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                triples.push((ia as u32, ib as u32, index[&c] as u32));
            }
        }
        triples.sort_by_key(|&(_, _, c)| (total(&monomials[c as usize]), c));
        let triple_len = (0..=degree)
            .map(|e| triples.iter().filter(|&&(_, _, c)| total(&monomials[c as usize]) <= e).count())
            .collect();
        let shift = (0..n)
            .map(|m| {
                monomials
                    .iter()
                    .map(|mono| {
                        let mut up = mono.clone();
                        up[m] += 1;
                        index.get(&up).copied().unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();
        JetSpace { n, degree, monomials, level_len, triples, triple_len, shift }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn monomials(&self) -> &[Vec<usize>] {
        &self.monomials
    }

    /// Number of coefficients of a jet of degree `e`.
    pub fn len(&self, e: usize) -> usize {
        self.level_len[e]
    }

    pub fn constant(&self, c: f64, e: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.len(e)];
        v[0] = c;
        v
    }

    /// `a * b` truncated at degree `e`.
    pub fn mul(&self, a: &[f64], b: &[f64], e: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len(e)];
        self.mul_acc(a, b, e, 1.0, &mut out);
        out
    }

    /// `out += scale * a * b` truncated at degree `e`.
    pub fn mul_acc(&self, a: &[f64], b: &[f64], e: usize, scale: f64, out: &mut [f64]) {
        for &(ia, ib, ic) in &self.triples[..self.triple_len[e]] {
            out[ic as usize] += scale * a[ia as usize] * b[ib as usize];
        }
    }

    /// `∂f/∂x_m`, one degree lower than the input.
    pub fn derivative(&self, a: &[f64], m: usize) -> Vec<f64> {
        let e = self.degree_of(a);
        assert!(e > 0, "derivative of a degree-0 jet");
        (0..self.len(e - 1))
            .map(|k| (self.monomials[k][m] + 1) as f64 * a[self.shift[m][k]])
            .collect()
    }

    /// `∂f/∂x_m` written into `out`, whose length selects the degree.
    pub fn derivative_into(&self, a: &[f64], m: usize, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (self.monomials[k][m] + 1) as f64 * a[self.shift[m][k]];
        }
    }

    /// Degree of a jet given its length.
    pub fn degree_of(&self, a: &[f64]) -> usize {
        self.level_len.iter().position(|&l| l == a.len()).expect("jet length does not match a degree")
    }
}

/// All `n`-part compositions of `d`, in lexicographic order.
fn compositions(n: usize, d: usize, cur: &mut Vec<usize>, pos: usize, out: &mut Vec<Vec<usize>>) {
    if pos == n - 1 {
        cur[pos] = d;
        out.push(cur.clone());
        return;
    }
    for k in 0..=d {
        cur[pos] = k;
        compositions(n, d - k, cur, pos + 1, out);
    }
    cur[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn add_into(out: &mut [f64], a: &[f64], scale: f64) {
    for (o, v) in out.iter_mut().zip(a) {
        *o += scale * v;
    }
}

/// The jet route: curvature and its covariant derivatives from truncated
/// Taylor expansions of the metric, in any dimension.
///
/// Only the partial derivatives `∂^α g_ij` are symbolic; the inverse metric
/// is a truncated Neumann series and everything after is numeric.
#[derive(Clone, Debug)]
pub struct JetCurvature {
    chart: Arc<MetricChart>,
    max_order: usize,
    space: JetSpace,
    /// program for `∂^α g_ij / α!`, ordered by packed pair then monomial
    taylor: CompiledExprs,
    options: CurvatureOptions,
}

impl JetCurvature {
    pub fn new(chart: &Arc<MetricChart>, max_order: usize) -> Result<Self> {
        Self::with_options(chart, max_order, CurvatureOptions::default())
    }

    pub fn with_options(chart: &Arc<MetricChart>, max_order: usize, options: CurvatureOptions) -> Result<Self> {
        let n = chart.dim();
        let degree = max_order + 2;
        let space = JetSpace::new(n, degree);
        let coords = chart.coords();
        let mut exprs = Vec::new();
        for g in chart.upper_components() {
            let mut derived: Vec<ScalarExpr> = Vec::with_capacity(space.len(degree));
            for (k, mono) in space.monomials().iter().enumerate() {
                let e = match mono.iter().position(|&p| p > 0) {
                    None => g.clone(),
                    Some(m) => {
                        let mut parent = mono.clone();
                        parent[m] -= 1;
                        let pk = space.monomials()[..k].iter().position(|x| *x == parent).expect("graded order");
                        derived[pk].differentiate(&coords[m])
                    }
                };
                derived.push(e);
            }
            for (e, mono) in derived.into_iter().zip(space.monomials()) {
                let scale = mono.iter().map(|&p| factorial(p)).product::<f64>();
                exprs.push(if scale == 1.0 { e } else { e.div(&ScalarExpr::constant(scale)) });
            }
        }
        let taylor = CompiledExprs::compile(&exprs, coords)?;
        Ok(JetCurvature { chart: chart.clone(), max_order, space, taylor, options })
    }

    pub fn chart(&self) -> &Arc<MetricChart> {
        &self.chart
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn at(&self, point: &[f64]) -> Result<PointCurvature> {
        let (metric, inverse) = metric_and_inverse(&self.chart, point)?;
        let n = self.chart.dim();
        let sp = &self.space;
        let d = sp.degree();
        let len = sp.len(d);
        let vals = self.taylor.eval(point)?;
        let g_jet = |i: usize, j: usize| -> &[f64] {
            let p = super::chart::packed(n, i, j);
            &vals[p * len..(p + 1) * len]
        };

        // inverse metric to degree d-1: Σ_k (−G0⁻¹ N)^k G0⁻¹
        let ed = d - 1;
        let a: Vec<Vec<f64>> = (0..n * n)
            .map(|ik| {
                let (i, k) = (ik / n, ik % n);
                let mut v = vec![0.0; sp.len(ed)];
                for l in 0..n {
                    add_into(&mut v[1..], &g_jet(l, k)[1..sp.len(ed)], -inverse[(i, l)]);
                }
                v
            })
            .collect();
        let mut term: Vec<Vec<f64>> = (0..n * n).map(|ij| sp.constant(inverse[(ij / n, ij % n)], ed)).collect();
        let mut ginv = term.clone();
        for _ in 0..ed {
            let next: Vec<Vec<f64>> = (0..n * n)
                .map(|ij| {
                    let (i, j) = (ij / n, ij % n);
                    let mut v = vec![0.0; sp.len(ed)];
                    for k in 0..n {
                        sp.mul_acc(&a[i * n + k], &term[k * n + j], ed, 1.0, &mut v);
                    }
                    v
                })
                .collect();
            for (acc, t) in ginv.iter_mut().zip(&next) {
                add_into(acc, t, 1.0);
            }
            term = next;
        }

        // dg[l][i][j] = ∂_l g_ij, degree d-1
        let dg: Vec<Vec<f64>> = (0..n * n * n)
            .map(|lij| sp.derivative(g_jet((lij / n) % n, lij % n), lij / (n * n)))
            .collect();
        let dg_at = |l: usize, i: usize, j: usize| &dg[l * n * n + i * n + j];

        // Γ^k_ij, degree d-1
        let mut gamma = vec![Vec::new(); n * n * n];
        for i in 0..n {
            for j in i..n {
                let first: Vec<Vec<f64>> = (0..n)
                    .map(|l| {
                        let mut v = vec![0.0; sp.len(ed)];
                        add_into(&mut v, dg_at(j, l, i), 0.5);
                        add_into(&mut v, dg_at(i, l, j), 0.5);
                        add_into(&mut v, dg_at(l, i, j), -0.5);
                        v
                    })
                    .collect();
                for k in 0..n {
                    let mut v = vec![0.0; sp.len(ed)];
                    for (l, f) in first.iter().enumerate() {
                        sp.mul_acc(&ginv[k * n + l], f, ed, 1.0, &mut v);
                    }
                    gamma[k * n * n + j * n + i] = v.clone();
                    gamma[k * n * n + i * n + j] = v;
                }
            }
        }
        let gam = |k: usize, i: usize, j: usize| &gamma[k * n * n + i * n + j];
        let nonzero: Vec<bool> = gamma.iter().map(|g| g.iter().any(|v| *v != 0.0)).collect();
        let nz = |k: usize, i: usize, j: usize| nonzero[k * n * n + i * n + j];
        // sparse[m * n + a]: the c with Γ^c_{ma} not identically zero near the point
        let sparse: Vec<Vec<usize>> =
            (0..n * n).map(|ma| (0..n).filter(|&c| nonzero[c * n * n + ma]).collect()).collect();

        // R^l_kij, degree d-2
        let er = d - 2;
        let quad_sign = if self.options.flip_quadratic_terms { -1.0 } else { 1.0 };
        let dgamma: Vec<Vec<f64>> = (0..n * n * n * n)
            .map(|mkij| sp.derivative(&gamma[mkij % (n * n * n)], mkij / (n * n * n)))
            .collect();
        let dgam = |m: usize, k: usize, i: usize, j: usize| &dgamma[((m * n + k) * n + i) * n + j];
        let mut riemann = vec![vec![0.0; sp.len(er)]; n.pow(4)];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let mut v = vec![0.0; sp.len(er)];
                        add_into(&mut v, dgam(i, l, j, k), 1.0);
                        add_into(&mut v, dgam(j, l, i, k), -1.0);
                        for m in 0..n {
                            if nz(l, i, m) && nz(m, j, k) {
                                sp.mul_acc(gam(l, i, m), gam(m, j, k), er, quad_sign, &mut v);
                            }
                            if nz(l, j, m) && nz(m, i, k) {
                                sp.mul_acc(gam(l, j, m), gam(m, i, k), er, -quad_sign, &mut v);
                            }
                        }
                        riemann[flat_offset(n, &[l, k, j, i])] = v.iter().map(|x| -x).collect();
                        riemann[flat_offset(n, &[l, k, i, j])] = v;
                    }
                }
            }
        }

        // R_lkij = g_la R^a_kij, stored flat with `width` coefficients per component
        let mut width = sp.len(er);
        let mut current = vec![0.0; n.pow(4) * width];
        for (k, idx) in MultiIndices::new(n, 4).enumerate() {
            let out = &mut current[k * width..(k + 1) * width];
            for a in 0..n {
                let r = &riemann[flat_offset(n, &[a, idx[1], idx[2], idx[3]])];
                sp.mul_acc(g_jet(idx[0], a), r, er, 1.0, out);
            }
        }
        let mut nabla = vec![constants_flat(n, 4, &current, width)];
        let mut rank = 4;
        for s in 1..=self.max_order {
            // (∇T)_{..m} = ∂_m T_.. − Σ_r Γ^c_{m a_r} T_{..c..}
            let e = er - s;
            let out_width = sp.len(e);
            let count = n.pow(rank as u32);
            let strides: Vec<usize> = (0..rank).map(|r| n.pow((rank - 1 - r) as u32)).collect();
            let mut next = vec![0.0; count * n * out_width];
            let mut digits = vec![0; rank];
            for src in 0..count {
                for (d, &stride) in digits.iter_mut().zip(&strides) {
                    *d = (src / stride) % n;
                }
                let jet = &current[src * width..(src + 1) * width];
                for m in 0..n {
                    let out = &mut next[(src * n + m) * out_width..(src * n + m + 1) * out_width];
                    sp.derivative_into(jet, m, out);
                    for (&digit, &stride) in digits.iter().zip(&strides) {
                        let base = src - digit * stride;
                        for &c in &sparse[m * n + digit] {
                            let gi = (c * n + m) * n + digit;
                            let other = &current[(base + c * stride) * width..];
                            if e == 0 {
                                out[0] -= gamma[gi][0] * other[0];
                            } else {
                                sp.mul_acc(&gamma[gi], other, e, -1.0, out);
                            }
                        }
                    }
                }
            }
            rank += 1;
            width = out_width;
            current = next;
            nabla.push(constants_flat(n, rank, &current, width));
        }

        let christoffel = constants(n, 1, 2, &gamma);
        let riemann = constants(n, 1, 3, &riemann);
        let nabla_metric = PointTensor::from_fn(n, 0, 3, |idx| {
            let (i, j, m) = (idx[0], idx[1], idx[2]);
            let mut v = dg_at(m, i, j)[0];
            for e in 0..n {
                v -= christoffel.get(&[e, m, i]) * metric[(e, j)] + christoffel.get(&[e, m, j]) * metric[(i, e)];
            }
            v
        });
        Ok(PointCurvature {
            point: point.to_vec(),
            metric,
            inverse,
            christoffel,
            riemann,
            nabla_riemann: nabla,
            nabla_metric,
        })
    }
}

fn constants_flat(n: usize, rank: usize, data: &[f64], width: usize) -> PointTensor {
    let mut t = PointTensor::zeros(n, 0, rank);
    for (k, slot) in t.data_mut().iter_mut().enumerate() {
        *slot = data[k * width];
    }
    t
}

fn constants(n: usize, p: usize, q: usize, jets: &[Vec<f64>]) -> PointTensor {
    let mut t = PointTensor::zeros(n, p, q);
    for (slot, j) in t.data_mut().iter_mut().zip(jets) {
        *slot = j.first().copied().unwrap_or(0.0);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Interval, SymbolicCurvature};

    #[test]
    fn jet_space_counts() {
        let sp = JetSpace::new(3, 4);
        assert_eq!(sp.len(0), 1);
        assert_eq!(sp.len(1), 4);
        assert_eq!(sp.len(4), 35);
        assert_eq!(sp.monomials()[1], vec![1, 0, 0]);
    }

    #[test]
    fn jet_product_and_derivative() {
        // (1 + x + y)(2 − y) in two variables
        let sp = JetSpace::new(2, 3);
        let idx = |m: [usize; 2]| sp.monomials().iter().position(|x| x[..] == m[..]).unwrap();
        let mut a = vec![0.0; sp.len(3)];
        a[0] = 1.0;
        a[idx([1, 0])] = 1.0;
        a[idx([0, 1])] = 1.0;
        let mut b = sp.constant(2.0, 3);
        b[idx([0, 1])] = -1.0;
        let c = sp.mul(&a, &b, 3);
        assert_eq!(c[0], 2.0);
        assert_eq!(c[idx([1, 0])], 2.0);
        assert_eq!(c[idx([0, 1])], 1.0);
        assert_eq!(c[idx([1, 1])], -1.0);
        assert_eq!(c[idx([0, 2])], -1.0);
        let dy = sp.derivative(&c, 1);
        assert_eq!(dy.len(), sp.len(2));
        assert_eq!(dy[0], 1.0);
        assert_eq!(dy[idx([0, 1])], -2.0);
    }

    #[test]
    fn agrees_with_symbolic_route() {
        let chart = Arc::new(
            MetricChart::from_text(
                "c",
                &["x", "y", "z"],
                &["2+sin(x*y)", "x*z/5", "0", "1+y^2", "cos(z)/7", "3+x*y*z"],
                vec![Interval::new(-0.8, 0.8); 3],
            )
            .unwrap(),
        );
        let jet = JetCurvature::new(&chart, 2).unwrap();
        let sym = SymbolicCurvature::new(&chart, 2).unwrap();
        for pt in [[0.1, 0.2, 0.3], [-0.5, 0.4, 0.7]] {
            let a = jet.at(&pt).unwrap();
            let b = sym.at(&pt).unwrap();
            assert!(a.christoffel.max_abs_diff(&b.christoffel) < 1e-12);
            assert!(a.riemann.max_abs_diff(&b.riemann) < 1e-11);
            for s in 0..=2 {
                let scale = 1.0 + b.nabla_riemann[s].max_abs();
                assert!(a.nabla_riemann[s].max_abs_diff(&b.nabla_riemann[s]) < 1e-10 * scale, "order {s}");
            }
            assert!(a.nabla_metric.max_abs() < 1e-12);
        }
    }
}
