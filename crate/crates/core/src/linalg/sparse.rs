use super::krylov::{LinearOperator, Preconditioner};
use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate `(row, col, value)` entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col_idx, values }
    }

    /// Builds from a fixed sparsity pattern (sorted per row) and matching values.
    pub fn from_parts(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        Self { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in a..b {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (v - self.get(j, i)).abs() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        for k in a..b {
            self.values[k] = if self.col_idx[k] == i { 1.0 } else { 0.0 };
        }
    }

    /// Zeros column entries `A[r, c]` for every `c` flagged in `fixed`, for rows not fixed,
    /// moving `A[r, c] * g[c]` to the right side.
    pub fn eliminate_columns(&mut self, fixed: &[bool], g: &[f64], rhs: &mut [f64]) {
        for r in 0..self.n {
            if fixed[r] {
                continue;
            }
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for k in a..b {
                let c = self.col_idx[k];
                if fixed[c] {
                    rhs[r] -= self.values[k] * g[c];
                    self.values[k] = 0.0;
                }
            }
        }
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv(x, y);
    }
}

/// Incomplete LU factorization with the sparsity pattern of the input.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        for (i, di) in diag.iter_mut().enumerate() {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            if let Some(k) = (s..e).find(|&k| lu.col_idx[k] == i) {
                *di = k;
            } else {
                return Err(Error::DegenerateCell(format!("row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in s..e {
                pos[lu.col_idx[k]] = k;
            }
            for k in s..e {
                let j = lu.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = lu.values[diag[j]];
                let factor = lu.values[k] / pivot;
                lu.values[k] = factor;
                let (sj, ej) = (diag[j] + 1, lu.row_ptr[j + 1]);
                for kk in sj..ej {
                    let c = lu.col_idx[kk];
                    let p = pos[c];
                    if p != usize::MAX {
                        lu.values[p] -= factor * lu.values[kk];
                    }
                }
            }
            for k in s..e {
                pos[lu.col_idx[k]] = usize::MAX;
            }
            let d = lu.values[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::DegenerateCell(format!("zero pivot in incomplete factorization at row {i}")));
            }
        }
        Ok(Self { lu, diag })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        let n = lu.n;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.values[k] * z[lu.col_idx[k]];
            }
            z[i] = s / lu.values[self.diag[i]];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::krylov::{bicgstab, pcg, KrylovOptions};
    use super::*;

    fn laplace2d(k: usize, skew: f64) -> CsrMatrix {
        let n = k * k;
        let mut t = Vec::new();
        for j in 0..k {
            for i in 0..k {
                let p = j * k + i;
                t.push((p, p, 4.0));
                if i + 1 < k {
                    t.push((p, p + 1, -1.0 + skew));
                    t.push((p + 1, p, -1.0 - skew));
                }
                if j + 1 < k {
                    t.push((p, p + k, -1.0));
                    t.push((p + k, p, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn ilu_is_exact_on_tridiagonal() {
        let t: Vec<_> = (0..10)
            .flat_map(|i| {
                let mut v = vec![(i, i, 3.0)];
                if i > 0 {
                    v.push((i, i - 1, -1.0));
                }
                if i < 9 {
                    v.push((i, i + 1, -1.2));
                }
                v
            })
            .collect();
        let a = CsrMatrix::from_triplets(10, t);
        let ilu = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let mut z = vec![0.0; 10];
        ilu.apply(&b, &mut z);
        let mut az = vec![0.0; 10];
        a.spmv(&z, &mut az);
        for (x, y) in az.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn preconditioned_solvers_converge() {
        let a = laplace2d(20, 0.0);
        assert!(a.is_symmetric(0.0));
        let ilu = Ilu0::new(&a).unwrap();
        let b = vec![1.0; a.n()];
        let mut x = vec![0.0; a.n()];
        let st = pcg(&a, &ilu, &b, &mut x, KrylovOptions::default()).unwrap();
        assert!(st.residual <= 1e-10);

        let a = laplace2d(20, 0.3);
        assert!(!a.is_symmetric(1e-12));
        let ilu = Ilu0::new(&a).unwrap();
        let mut x = vec![0.0; a.n()];
        let st = bicgstab(&a, &ilu, &b, &mut x, KrylovOptions::default()).unwrap();
        assert!(st.residual <= 1e-10);
    }
}
