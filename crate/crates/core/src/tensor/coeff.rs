use super::multiindex::{enumerate_multiindices, MultiIndex};
use serde::{Deserialize, Serialize};

/// Constant coefficients `A^{ab}_{ij}` with `|a| = |b| = m` and `1 <= i, j <= n`.
///
/// Entries are stored row-major in `(a, b, i, j)` where `a`, `b` are positions
/// in the lexicographic enumeration of order-`m` multi-indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTensor {
    d: usize,
    n: usize,
    m: u32,
    k: usize,
    entries: Vec<f64>,
}

impl CoefficientTensor {
    pub fn zeros(d: usize, n: usize, m: u32) -> Self {
        let k = enumerate_multiindices(d, m).len();
        Self { d, n, m, k, entries: vec![0.0; k * k * n * n] }
    }

    /// `delta_{ab} delta_{ij}` scaled by `c`.
    pub fn scaled_identity(d: usize, n: usize, m: u32, c: f64) -> Self {
        let mut t = Self::zeros(d, n, m);
        for a in 0..t.index_count() {
            for i in 0..n {
                t.set_at(a, a, i, i, c);
            }
        }
        t
    }

    pub fn from_entries(d: usize, n: usize, m: u32, entries: Vec<f64>) -> Self {
        let k = enumerate_multiindices(d, m).len();
        assert_eq!(entries.len(), k * k * n * n, "entry count");
        Self { d, n, m, k, entries }
    }

    pub fn dims(&self) -> (usize, usize, u32) {
        (self.d, self.n, self.m)
    }

    pub fn index_count(&self) -> usize {
        self.k
    }

    pub fn indices(&self) -> Vec<MultiIndex> {
        enumerate_multiindices(self.d, self.m)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    #[inline]
    pub fn offset(&self, a: usize, b: usize, i: usize, j: usize) -> usize {
        ((a * self.k + b) * self.n + i) * self.n + j
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, i: usize, j: usize) -> f64 {
        self.entries[self.offset(a, b, i, j)]
    }

    pub fn set_at(&mut self, a: usize, b: usize, i: usize, j: usize, v: f64) {
        let o = self.offset(a, b, i, j);
        self.entries[o] = v;
    }

    /// Lookup by multi-index; `None` if either index has the wrong order or dimension.
    pub fn get(&self, alpha: &MultiIndex, beta: &MultiIndex, i: usize, j: usize) -> Option<f64> {
        let idx = self.indices();
        let a = idx.iter().position(|x| x == alpha)?;
        let b = idx.iter().position(|x| x == beta)?;
        Some(self.at(a, b, i, j))
    }

    /// `A*^{ab}_{ij} = A^{ba}_{ji}`.
    pub fn transpose(&self) -> Self {
        let k = self.index_count();
        let mut t = Self::zeros(self.d, self.n, self.m);
        for a in 0..k {
            for b in 0..k {
                for i in 0..self.n {
                    for j in 0..self.n {
                        t.set_at(a, b, i, j, self.at(b, a, j, i));
                    }
                }
            }
        }
        t
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let t = self.transpose();
        self.entries.iter().zip(&t.entries).all(|(x, y)| (x - y).abs() <= tol)
    }

    /// `sum A^{ab}_{ij} xi^i_a zeta^j_b` where `xi[a * n + i]`.
    pub fn bilinear(&self, xi: &[f64], zeta: &[f64]) -> f64 {
        let k = self.index_count();
        let n = self.n;
        let mut s = 0.0;
        for a in 0..k {
            for i in 0..n {
                let xa = xi[a * n + i];
                if xa == 0.0 {
                    continue;
                }
                for b in 0..k {
                    for j in 0..n {
                        s += self.at(a, b, i, j) * xa * zeta[b * n + j];
                    }
                }
            }
        }
        s
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Symbol slot count `#{|a| = m} * n`.
    pub fn symbol_len(&self) -> usize {
        self.index_count() * self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_set_matches_order() {
        let t = CoefficientTensor::zeros(2, 3, 2);
        assert_eq!(t.index_count(), 3);
        assert_eq!(t.entries().len(), 3 * 3 * 3 * 3);
        assert_eq!(
            t.get(&MultiIndex::new(vec![1, 1]), &MultiIndex::new(vec![2, 0]), 2, 0),
            Some(0.0)
        );
        assert_eq!(t.get(&MultiIndex::new(vec![1, 0]), &MultiIndex::new(vec![2, 0]), 0, 0), None);
    }

    #[test]
    fn transpose_swaps_all_slots() {
        let mut t = CoefficientTensor::zeros(2, 2, 1);
        t.set_at(0, 1, 0, 1, 3.0);
        let s = t.transpose();
        assert_eq!(s.at(1, 0, 1, 0), 3.0);
        assert_eq!(s.at(0, 1, 0, 1), 0.0);
        assert_eq!(s.transpose(), t);
    }

    #[test]
    fn identity_form_is_euclidean() {
        let t = CoefficientTensor::scaled_identity(2, 2, 2, 1.0);
        let xi: Vec<f64> = (0..t.symbol_len()).map(|k| k as f64 - 2.5).collect();
        let norm2: f64 = xi.iter().map(|x| x * x).sum();
        assert!((t.bilinear(&xi, &xi) - norm2).abs() < 1e-12);
    }
}
