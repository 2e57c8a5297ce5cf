//! The fixed mollifier and quadrature tables for `S_eps` and `S_eps^2`.

use crate::quadrature::composite;
use crate::tensor::{multiindices_up_to, MultiIndex};
use std::f64::consts::PI;

pub const KERNEL_ID: &str = "exp-bump-r0.5/v1";

/// Largest derivative order carried by the tables.
pub const TABLE_ORDER: u32 = 2;

/// Unnormalized profile `exp(-1 / (1 - 4 s))`, `s = |x|^2`, with its `s`-derivatives of the exponent.
fn bump(s: f64) -> Option<(f64, f64, f64)> {
    let t = 1.0 - 4.0 * s;
    if t <= 0.0 {
        return None;
    }
    let e = (-1.0 / t).exp();
    // g(s) = -1/t, g' = -4/t^2, g'' = -32/t^3
    Some((e, -4.0 / (t * t), -32.0 / (t * t * t)))
}

/// Nodes `z_q` and weights `W^tau_q`: `D^tau (K * f)(x) = eps^{-|tau|} sum_q W^tau_q f(x - eps z_q)`.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub d: usize,
    pub nodes: Vec<[f64; 2]>,
    /// `weights[pos][q]` for `tau` the `pos`-th entry of `multiindices_up_to(d, TABLE_ORDER)`.
    pub weights: Vec<Vec<f64>>,
    pub radius: f64,
}

impl KernelTable {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `phi(x) = c exp(-1 / (1 - 4|x|^2))` on `B(0, 1/2)`, unit mass.
#[derive(Clone, Debug)]
pub struct MollifierKernel {
    pub d: usize,
    pub c: f64,
    /// Table for `S_eps`.
    pub single: KernelTable,
    /// Table for `S_eps^2`, i.e. the kernel `phi * phi` on `B(0, 1)`.
    pub double: KernelTable,
}

/// Polar (2D) or composite Gauss (1D) rule on the ball of radius `r`, symmetric under `z -> -z`.
fn ball_rule(d: usize, r: f64, panels: usize, pts: usize, angles: usize) -> Vec<([f64; 2], f64)> {
    if d == 1 {
        let (x, w) = composite(-r, r, 2 * panels, pts);
        return x.into_iter().zip(w).map(|(x, w)| ([x, 0.0], w)).collect();
    }
    let (rs, ws) = composite(0.0, r, panels, pts);
    let dt = 2.0 * PI / angles as f64;
    let mut out = Vec::with_capacity(rs.len() * angles);
    for (rr, wr) in rs.iter().zip(&ws) {
        for k in 0..angles {
            let t = (k as f64 + 0.5) * dt;
            out.push(([rr * t.cos(), rr * t.sin()], wr * rr * dt));
        }
    }
    out
}

impl MollifierKernel {
    pub fn new(d: usize) -> Self {
        assert!(d == 1 || d == 2);
        let fine = ball_rule(d, 0.5, 64, 16, 8);
        let mass: f64 = fine
            .iter()
            .map(|(z, w)| w * bump(z[0] * z[0] + z[1] * z[1]).map_or(0.0, |b| b.0))
            .sum();
        let mut k = Self { d, c: 1.0 / mass, single: empty(d), double: empty(d) };
        k.single = k.build_single();
        k.double = k.build_double();
        k
    }

    /// `D^tau phi(x)` for every `tau` with `|tau| <= 2`, in graded order.
    pub fn jet(&self, x: &[f64; 2], out: &mut [f64]) {
        let idx = multiindices_up_to(self.d, TABLE_ORDER);
        out[..idx.len()].fill(0.0);
        let s = x[0] * x[0] + if self.d == 2 { x[1] * x[1] } else { 0.0 };
        let Some((e, g1, g2)) = bump(s) else {
            return;
        };
        let v = self.c * e;
        for (pos, a) in idx.iter().enumerate() {
            let ax: Vec<usize> = (0..self.d).flat_map(|k| std::iter::repeat_n(k, a.get(k) as usize)).collect();
            out[pos] = match ax.len() {
                0 => v,
                1 => v * g1 * 2.0 * x[ax[0]],
                _ => {
                    let (p, q) = (ax[0], ax[1]);
                    let delta = if p == q { 1.0 } else { 0.0 };
                    v * ((g1 * g1 + g2) * 4.0 * x[p] * x[q] + 2.0 * g1 * delta)
                }
            };
        }
    }

    pub fn value(&self, x: &[f64; 2]) -> f64 {
        let mut j = [0.0; 6];
        self.jet(x, &mut j);
        j[0]
    }

    fn build_single(&self) -> KernelTable {
        let rule = ball_rule(self.d, 0.5, if self.d == 1 { 4 } else { 2 }, 8, 32);
        let ntau = multiindices_up_to(self.d, TABLE_ORDER).len();
        let mut weights = vec![vec![0.0; rule.len()]; ntau];
        let mut jet = [0.0; 6];
        for (q, (z, w)) in rule.iter().enumerate() {
            self.jet(z, &mut jet);
            for t in 0..ntau {
                weights[t][q] = w * jet[t];
            }
        }
        let nodes: Vec<[f64; 2]> = rule.iter().map(|r| r.0).collect();
        normalize(self.d, &nodes, &mut weights);
        KernelTable { d: self.d, nodes, weights, radius: 0.5 }
    }

    /// `D^tau (phi * phi)(z) = int phi(w) D^tau phi(z - w) dw` at the outer nodes, by an inner polar rule.
    fn build_double(&self) -> KernelTable {
        let outer = ball_rule(self.d, 1.0, if self.d == 1 { 8 } else { 2 }, if self.d == 1 { 8 } else { 6 }, 16);
        let inner = ball_rule(self.d, 0.5, 16, 8, 64);
        let inner_phi: Vec<f64> = inner.iter().map(|(w, _)| self.value(w)).collect();
        let ntau = multiindices_up_to(self.d, TABLE_ORDER).len();
        let mut weights = vec![vec![0.0; outer.len()]; ntau];
        let mut jet = [0.0; 6];
        for (q, (z, wq)) in outer.iter().enumerate() {
            let mut acc = [0.0; 6];
            for ((w, ww), pw) in inner.iter().zip(&inner_phi) {
                self.jet(&[z[0] - w[0], z[1] - w[1]], &mut jet);
                for t in 0..ntau {
                    acc[t] += ww * pw * jet[t];
                }
            }
            for t in 0..ntau {
                weights[t][q] = wq * acc[t];
            }
        }
        let nodes: Vec<[f64; 2]> = outer.iter().map(|r| r.0).collect();
        normalize(self.d, &nodes, &mut weights);
        KernelTable { d: self.d, nodes, weights, radius: 1.0 }
    }

    /// Fourier transform `phi_hat(k) = int phi(x) cos(k . x) dx` along the first axis, by a fine rule.
    pub fn transform(&self, k: f64) -> f64 {
        ball_rule(self.d, 0.5, 64, 16, 64).iter().map(|(z, w)| w * self.value(z) * (k * z[0]).cos()).sum()
    }
}

fn empty(d: usize) -> KernelTable {
    KernelTable { d, nodes: vec![], weights: vec![], radius: 0.0 }
}

/// Rescales each row so the table is exact on polynomials of the row's order:
/// `sum W^0 = 1`, `sum W^{e_k} z_k = -1`, `sum W^{e_p + e_q} z_p z_q = 1 + [p = q]`.
fn normalize(d: usize, nodes: &[[f64; 2]], weights: &mut [Vec<f64>]) {
    for (row, tau) in weights.iter_mut().zip(multiindices_up_to(d, TABLE_ORDER)) {
        let axes: Vec<usize> = (0..d).flat_map(|k| std::iter::repeat_n(k, tau.get(k) as usize)).collect();
        let (moment, target) = match axes.len() {
            0 => (row.iter().sum::<f64>(), 1.0),
            1 => (row.iter().zip(nodes).map(|(w, z)| w * z[axes[0]]).sum(), -1.0),
            _ => {
                let m: f64 = row.iter().zip(nodes).map(|(w, z)| w * z[axes[0]] * z[axes[1]]).sum();
                (m, if axes[0] == axes[1] { 2.0 } else { 1.0 })
            }
        };
        let f = target / moment;
        for w in row.iter_mut() {
            *w *= f;
        }
    }
}

/// Position of `tau` in the table rows.
pub fn tau_slot(tau: &MultiIndex) -> usize {
    crate::tensor::graded_position(tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_has_unit_mass_and_symmetry() {
        for d in [1, 2] {
            let k = MollifierKernel::new(d);
            let mass: f64 = ball_rule(d, 0.5, 32, 16, 128).iter().map(|(z, w)| w * k.value(z)).sum();
            assert!((mass - 1.0).abs() < 1e-10, "d={d}: {mass}");
            assert_eq!(k.value(&[0.5, 0.0]), 0.0);
            assert!(k.value(&[0.1, 0.2 * (d - 1) as f64]) > 0.0);
            assert_eq!(k.value(&[0.13, 0.07]), k.value(&[-0.13, -0.07]));
            for t in [&k.single, &k.double] {
                assert!((t.weights[0].iter().sum::<f64>() - 1.0).abs() < 1e-14);
                // first moments vanish
                let m1: f64 = t.nodes.iter().zip(&t.weights[0]).map(|(z, w)| w * z[0]).sum();
                assert!(m1.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jet_matches_finite_differences() {
        let k = MollifierKernel::new(2);
        let x = [0.11, -0.17];
        let mut j = [0.0; 6];
        k.jet(&x, &mut j);
        let h = 1e-6;
        let dx = (k.value(&[x[0] + h, x[1]]) - k.value(&[x[0] - h, x[1]])) / (2.0 * h);
        let dy = (k.value(&[x[0], x[1] + h]) - k.value(&[x[0], x[1] - h])) / (2.0 * h);
        assert!((j[2] - dx).abs() < 1e-6 && (j[1] - dy).abs() < 1e-6);
        let hh = 1e-4;
        let dxy = (k.value(&[x[0] + hh, x[1] + hh]) - k.value(&[x[0] + hh, x[1] - hh]) - k.value(&[x[0] - hh, x[1] + hh])
            + k.value(&[x[0] - hh, x[1] - hh]))
            / (4.0 * hh * hh);
        assert!((j[4] - dxy).abs() < 1e-4, "{} vs {dxy}", j[4]);
    }

    #[test]
    fn double_table_matches_squared_transform() {
        // S^2 cos(k x) = phi_hat(k)^2 cos(k x); evaluate at x = 0.
        for d in [1, 2] {
            let k = MollifierKernel::new(d);
            let w = 7.0;
            let eps = 0.3;
            let exact = k.transform(w * eps).powi(2);
            let t = &k.double;
            let got: f64 = t.nodes.iter().zip(&t.weights[0]).map(|(z, wq)| wq * (w * (-eps * z[0])).cos()).sum();
            let tol = if d == 1 { 1e-7 } else { 1e-5 };
            assert!((got - exact).abs() < tol, "d={d}: {got} vs {exact}");
            // derivative along x at x = 0.1: d/dx S^2 sin(w x) = w phi_hat^2 cos(w x)
            let x0 = 0.1;
            let slot = tau_slot(&MultiIndex::unit(d, 0));
            let got: f64 =
                t.nodes.iter().zip(&t.weights[slot]).map(|(z, wq)| wq * (w * (x0 - eps * z[0])).sin()).sum::<f64>() / eps;
            assert!((got - w * exact * (w * x0).cos()).abs() < 10.0 * tol, "d={d}: {got}");
        }
    }
}
