//! Vector functions with derivative jets, and closed-form smooth fields used as data.

use crate::tensor::{binomial, multiindices_up_to, MultiIndex};
use serde::{Deserialize, Serialize};

/// A vector field whose derivatives can be evaluated pointwise.
///
/// Jets are laid out as `out[pos * n + i] = D^alpha f_i(x)` with `alpha` running over
/// [`multiindices_up_to`]`(d, order)`.
pub trait FieldJet: Sync {
    fn d(&self) -> usize;
    fn n(&self) -> usize;
    /// Highest derivative order available.
    fn max_order(&self) -> u32;
    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]);

    /// Evaluation at a mesh quadrature point; meshes' own fields override this to skip point location.
    fn jet_in_cell(&self, _cell: usize, _xi: &[f64], x: &[f64], order: u32, out: &mut [f64]) {
        self.jet(x, order, out);
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        self.jet(x, 0, &mut out);
        out
    }
}

pub fn jet_len(d: usize, n: usize, order: u32) -> usize {
    crate::tensor::count_up_to(d, order) * n
}

/// `coeff * prod_k x_k^{p_k} cos(w_k x_k + phi_k)`; missing axes default to `p = 0, w = 0, phi = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    #[serde(default)]
    pub powers: Vec<u32>,
    #[serde(default)]
    pub freq: Vec<f64>,
    #[serde(default)]
    pub phase: Vec<f64>,
}

impl Term {
    pub fn monomial(coeff: f64, powers: &[u32]) -> Self {
        Self { coeff, powers: powers.to_vec(), freq: vec![], phase: vec![] }
    }

    /// `coeff * sin(w x_axis)` in dimension `d`.
    pub fn sine(coeff: f64, d: usize, axis: usize, w: f64) -> Self {
        let mut freq = vec![0.0; d];
        let mut phase = vec![0.0; d];
        freq[axis] = w;
        phase[axis] = -std::f64::consts::FRAC_PI_2;
        Self { coeff, powers: vec![], freq, phase }
    }

    /// `k`-th derivative of `x^p cos(w x + phi)`.
    fn axis_derivative(&self, axis: usize, x: f64, k: u32) -> f64 {
        let p = self.powers.get(axis).copied().unwrap_or(0);
        let w = self.freq.get(axis).copied().unwrap_or(0.0);
        let phi = self.phase.get(axis).copied().unwrap_or(0.0);
        let mut s = 0.0;
        for j in 0..=k.min(p) {
            let mut poly = 1.0;
            for t in 0..j {
                poly *= f64::from(p - t);
            }
            poly *= x.powi((p - j) as i32);
            let r = k - j;
            let trig = if r == 0 {
                (w * x + phi).cos()
            } else {
                w.powi(r as i32) * (w * x + phi + f64::from(r) * std::f64::consts::FRAC_PI_2).cos()
            };
            s += binomial(k, j) * poly * trig;
        }
        s
    }

    fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> f64 {
        let mut v = self.coeff;
        for (k, &xk) in x.iter().enumerate() {
            v *= self.axis_derivative(k, xk, alpha.get(k));
            if v == 0.0 {
                break;
            }
        }
        v
    }
}

/// Vector field given component-wise as sums of [`Term`]s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticField {
    pub d: usize,
    pub components: Vec<Vec<Term>>,
}

impl AnalyticField {
    pub fn zero(d: usize, n: usize) -> Self {
        Self { d, components: vec![vec![]; n] }
    }

    pub fn scalar(d: usize, terms: Vec<Term>) -> Self {
        Self { d, components: vec![terms] }
    }

    pub fn constant(d: usize, values: &[f64]) -> Self {
        Self { d, components: values.iter().map(|&c| vec![Term::monomial(c, &[])]).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.iter().all(|t| t.coeff == 0.0))
    }

    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|terms| terms.iter().map(|t| t.derivative(alpha, x)).sum()).collect()
    }

    /// Largest total polynomial degree when the field has no trigonometric factors.
    pub fn polynomial_degree(&self) -> Option<u32> {
        let mut deg = 0;
        for t in self.components.iter().flatten() {
            if t.freq.iter().any(|&w| w != 0.0) {
                return None;
            }
            deg = deg.max(t.powers.iter().sum());
        }
        Some(deg)
    }
}

impl FieldJet for AnalyticField {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.components.len()
    }

    fn max_order(&self) -> u32 {
        u32::MAX
    }

    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let n = self.n();
        for (pos, a) in multiindices_up_to(self.d, order).iter().enumerate() {
            for (i, terms) in self.components.iter().enumerate() {
                out[pos * n + i] = terms.iter().map(|t| t.derivative(a, &x[..self.d])).sum();
            }
        }
    }
}

/// `|nabla^j f|` at one point from a jet: Frobenius norm of the full symmetric tensor.
pub fn jet_tensor_norm(d: usize, n: usize, jet: &[f64], j: u32) -> f64 {
    let mut s = 0.0;
    for (pos, a) in multiindices_up_to(d, j).iter().enumerate() {
        if a.order() != j {
            continue;
        }
        let mult = f64::from((1..=j).product::<u32>()) / a.factorial();
        for i in 0..n {
            s += mult * jet[pos * n + i].powi(2);
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jets_match_finite_differences() {
        let f = AnalyticField {
            d: 2,
            components: vec![vec![
                Term { coeff: 1.3, powers: vec![2, 1], freq: vec![3.0, 0.0], phase: vec![0.4, 0.0] },
                Term::monomial(-0.5, &[0, 3]),
            ]],
        };
        let x = [0.31, -0.22];
        let mut jet = vec![0.0; jet_len(2, 1, 2)];
        f.jet(&x, 2, &mut jet);
        let h = 1e-5;
        let val = |p: &[f64]| f.value(p)[0];
        let dx = (val(&[x[0] + h, x[1]]) - val(&[x[0] - h, x[1]])) / (2.0 * h);
        let dy = (val(&[x[0], x[1] + h]) - val(&[x[0], x[1] - h])) / (2.0 * h);
        let dxy = (val(&[x[0] + h, x[1] + h]) - val(&[x[0] + h, x[1] - h]) - val(&[x[0] - h, x[1] + h])
            + val(&[x[0] - h, x[1] - h]))
            / (4.0 * h * h);
        // Graded order in 2D: (0,0), (0,1), (1,0), (0,2), (1,1), (2,0).
        assert!((jet[1] - dy).abs() < 1e-8);
        assert!((jet[2] - dx).abs() < 1e-8);
        assert!((jet[4] - dxy).abs() < 1e-5);
    }

    #[test]
    fn sine_term_is_sine() {
        let t = AnalyticField::scalar(1, vec![Term::sine(2.0, 1, 0, 3.0)]);
        assert!((t.value(&[0.7])[0] - 2.0 * (2.1f64).sin()).abs() < 1e-14);
        assert_eq!(t.polynomial_degree(), None);
        assert_eq!(AnalyticField::constant(2, &[1.0]).polynomial_degree(), Some(0));
    }

    #[test]
    fn tensor_norm_counts_mixed_slots_twice() {
        // f = x y: nabla^2 f = [[0,1],[1,0]], Frobenius sqrt(2).
        let f = AnalyticField::scalar(2, vec![Term::monomial(1.0, &[1, 1])]);
        let mut jet = vec![0.0; 6];
        f.jet(&[0.3, 0.4], 2, &mut jet);
        assert!((jet_tensor_norm(2, 1, &jet, 2) - 2f64.sqrt()).abs() < 1e-14);
    }
}
