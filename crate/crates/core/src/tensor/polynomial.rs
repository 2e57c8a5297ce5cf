use super::multiindex::{multiindices_up_to, MultiIndex};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Quadrature samples of a vector field over a region: the input to L² projection.
#[derive(Clone, Debug, Default)]
pub struct RegionSamples {
    pub d: usize,
    pub n: usize,
    /// Flat `points[q * d + k]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Flat `values[q * n + i]`.
    pub values: Vec<f64>,
}

impl RegionSamples {
    pub fn new(d: usize, n: usize) -> Self {
        Self { d, n, ..Default::default() }
    }

    pub fn push(&mut self, x: &[f64], w: f64, v: &[f64]) {
        self.points.extend_from_slice(&x[..self.d]);
        self.weights.push(w);
        self.values.extend_from_slice(&v[..self.n]);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.d..(q + 1) * self.d]
    }

    pub fn value(&self, q: usize) -> &[f64] {
        &self.values[q * self.n..(q + 1) * self.n]
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn barycenter(&self) -> Vec<f64> {
        let w = self.measure();
        let mut c = vec![0.0; self.d];
        for q in 0..self.len() {
            for (ck, xk) in c.iter_mut().zip(self.point(q)) {
                *ck += self.weights[q] * xk / w;
            }
        }
        c
    }

    /// Largest distance between any sample point and the barycenter, doubled.
    pub fn diameter(&self) -> f64 {
        let c = self.barycenter();
        let r = (0..self.len())
            .map(|q| self.point(q).iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        2.0 * r
    }

    /// Same points and weights with values replaced by `f(x)`.
    pub fn with_values(&self, n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::new(self.d, n);
        for q in 0..self.len() {
            let x = self.point(q);
            out.push(x, self.weights[q], &f(x));
        }
        out
    }

    /// `(∫ |values - p|^2)^{1/2}` over the samples.
    pub fn l2_residual(&self, p: &PolynomialElement) -> f64 {
        let mut s = 0.0;
        for q in 0..self.len() {
            let pv = p.eval(self.point(q));
            s += self.weights[q] * self.value(q).iter().zip(&pv).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        s.sqrt()
    }
}

/// A vector polynomial of degree at most `k` in `z = (x - center) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialElement {
    pub d: usize,
    pub n: usize,
    pub degree: u32,
    pub center: Vec<f64>,
    pub scale: f64,
    /// `coeffs[a * n + i]` for `a` in graded order over `|alpha| <= degree`.
    pub coeffs: Vec<f64>,
}

impl PolynomialElement {
    pub fn zero(d: usize, n: usize, degree: u32) -> Self {
        let len = multiindices_up_to(d, degree).len() * n;
        Self { d, n, degree, center: vec![0.0; d], scale: 1.0, coeffs: vec![0.0; len] }
    }

    /// Polynomial in plain `x` from `(alpha, c_alpha)` terms.
    pub fn from_monomials(d: usize, n: usize, degree: u32, terms: &[(MultiIndex, Vec<f64>)]) -> Self {
        let mut p = Self::zero(d, n, degree);
        let basis = multiindices_up_to(d, degree);
        for (alpha, c) in terms {
            let a = basis.iter().position(|b| b == alpha).expect("term within degree");
            for i in 0..n {
                p.coeffs[a * n + i] += c[i];
            }
        }
        p
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        multiindices_up_to(self.d, self.degree)
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) / self.scale).collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.derivative(&MultiIndex::zero(self.d), x)
    }

    /// `D^alpha P(x)` in the original variable.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Vec<f64> {
        let z = self.local(x);
        let mut out = vec![0.0; self.n];
        let s = self.scale.powi(-(alpha.order() as i32));
        for (a, beta) in self.basis().iter().enumerate() {
            let Some(rest) = beta.checked_sub(alpha) else { continue };
            let falling: f64 = beta
                .components()
                .iter()
                .zip(alpha.components())
                .map(|(&b, &k)| ((b - k + 1)..=b).map(f64::from).product::<f64>())
                .product();
            let mono = falling * rest.monomial(&z) * s;
            for i in 0..self.n {
                out[i] += self.coeffs[a * self.n + i] * mono;
            }
        }
        out
    }

    /// Coefficients of the top-order part `sum_{|alpha| = k} D^alpha P / alpha!` per component,
    /// in the original variable; constant in `x`.
    pub fn top_order_coefficients(&self, k: u32) -> Vec<(MultiIndex, Vec<f64>)> {
        let x = self.center.clone();
        self.basis()
            .into_iter()
            .filter(|a| a.order() == k)
            .map(|a| {
                let mut v = self.derivative(&a, &x);
                let f = a.factorial();
                v.iter_mut().for_each(|c| *c /= f);
                (a, v)
            })
            .collect()
    }
}

/// Minimizer of `∫_R |u - P|^2` over vector polynomials of degree `k`.
pub fn project_polynomial(samples: &RegionSamples, k: u32) -> Result<PolynomialElement> {
    let (d, n) = (samples.d, samples.n);
    if samples.is_empty() || samples.measure() <= 0.0 {
        return Err(Error::DegenerateRegion("region has no quadrature weight".into()));
    }
    let center = samples.barycenter();
    let mut scale = samples.diameter();
    if scale <= 0.0 {
        scale = 1.0;
    }
    let basis = multiindices_up_to(d, k);
    let nb = basis.len();
    let measure = samples.measure();
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    let mut rhs = DMatrix::<f64>::zeros(nb, n);
    let mut phi = vec![0.0; nb];
    let mut z = vec![0.0; d];
    for q in 0..samples.len() {
        let w = samples.weights[q] / measure;
        for (zk, (xk, ck)) in z.iter_mut().zip(samples.point(q).iter().zip(&center)) {
            *zk = (xk - ck) / scale;
        }
        for (p, a) in phi.iter_mut().zip(&basis) {
            *p = a.monomial(&z);
        }
        for a in 0..nb {
            for b in a..nb {
                gram[(a, b)] += w * phi[a] * phi[b];
            }
            for i in 0..n {
                rhs[(a, i)] += w * phi[a] * samples.value(q)[i];
            }
        }
    }
    for a in 0..nb {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) || lmin / lmax < 1e-14 {
        return Err(Error::SingularGram { condition: if lmin > 0.0 { lmax / lmin } else { f64::INFINITY } });
    }
    let chol = gram.cholesky().ok_or(Error::SingularGram { condition: lmax / lmin })?;
    let sol = chol.solve(&rhs);
    let mut coeffs = vec![0.0; nb * n];
    for a in 0..nb {
        for i in 0..n {
            coeffs[a * n + i] = sol[(a, i)];
        }
    }
    Ok(PolynomialElement { d, n, degree: k, center, scale, coeffs })
}
