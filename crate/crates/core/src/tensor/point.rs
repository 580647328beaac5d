use nalgebra::DMatrix;

use super::field::flat_offset;

/// Dense numeric tensor at a single point, row-major over the multi-index
/// (contravariant slots first).
#[derive(Clone, Debug, PartialEq)]
pub struct PointTensor {
    n: usize,
    contravariant: usize,
    covariant: usize,
    data: Vec<f64>,
}

impl PointTensor {
    pub fn zeros(n: usize, contravariant: usize, covariant: usize) -> Self {
        let len = n.pow((contravariant + covariant) as u32);
        PointTensor { n, contravariant, covariant, data: vec![0.0; len] }
    }

    pub fn from_fn(n: usize, contravariant: usize, covariant: usize, f: impl Fn(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(n, contravariant, covariant);
        for (k, idx) in super::MultiIndices::new(n, contravariant + covariant).enumerate() {
            t.data[k] = f(&idx);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
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

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[flat_offset(self.n, idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = flat_offset(self.n, idx);
        self.data[off] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &PointTensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, c: f64) -> PointTensor {
        PointTensor { data: self.data.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Multiplies every slot (treated as covariant) by the matrix `frame`,
    /// i.e. `T'_{a..} = T_{i..} F^i_a ..`. With `F` orthonormalizing the
    /// metric this expresses a covariant tensor in an orthonormal frame.
    pub fn transform_covariant(&self, frame: &DMatrix<f64>) -> PointTensor {
        let n = self.n;
        let rank = self.rank();
        let mut cur = self.data.clone();
        let mut next = vec![0.0; cur.len()];
        for slot in 0..rank {
            let stride = n.pow((rank - 1 - slot) as u32);
            let block = stride * n;
            next.iter_mut().for_each(|v| *v = 0.0);
            for base in (0..cur.len()).step_by(block) {
                for rest in 0..stride {
                    for a in 0..n {
                        let mut acc = 0.0;
                        for i in 0..n {
                            let f = frame[(i, a)];
                            if f != 0.0 {
                                acc += cur[base + i * stride + rest] * f;
                            }
                        }
                        next[base + a * stride + rest] = acc;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        PointTensor { data: cur, ..self.clone() }
    }
}

/// Curvature data at one point, as produced by either evaluation route.
#[derive(Clone, Debug)]
pub struct PointCurvature {
    pub point: Vec<f64>,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `Γ^k_ij` as a (1,2) array `[k, i, j]`.
    pub christoffel: PointTensor,
    /// `R^l_kij` as a (1,3) tensor `[l, k, i, j]`.
    pub riemann: PointTensor,
    /// Fully covariant `∇^s R` for `s = 0..=max_order`, slots
    /// `[l, k, i, j, m_1, .., m_s]` with the derivative slots appended.
    pub nabla_riemann: Vec<PointTensor>,
    /// `∇g`, identically zero for the Levi-Civita connection.
    pub nabla_metric: PointTensor,
}

impl PointCurvature {
    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    /// `R_lkij`.
    pub fn riemann_lowered(&self) -> &PointTensor {
        &self.nabla_riemann[0]
    }

    /// `Ric_kj = R^i_kij`.
    pub fn ricci(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| self.riemann.get(&[i, k, i, j])).sum())
    }

    pub fn scalar_curvature(&self) -> f64 {
        self.inverse.component_mul(&self.ricci()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_transform_matches_index_formula() {
        let n = 3;
        let t = PointTensor::from_fn(n, 0, 3, |i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 * 0.1 - 1.0);
        let f = DMatrix::from_fn(n, n, |i, j| ((i + 2 * j) % 5) as f64 - 1.5);
        let fast = t.transform_covariant(&f);
        let slow = PointTensor::from_fn(n, 0, 3, |a| {
            let mut acc = 0.0;
            for idx in super::super::MultiIndices::new(n, 3) {
                acc += t.get(&idx) * f[(idx[0], a[0])] * f[(idx[1], a[1])] * f[(idx[2], a[2])];
            }
            acc
        });
        assert!(fast.max_abs_diff(&slow) < 1e-12);
    }
}
