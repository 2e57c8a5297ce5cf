use super::{GraphDomain, Mesh};
use crate::error::{Error, Result};
use crate::func::FieldJet;
use crate::tensor::multiindices_up_to;

/// Smoothstep ramp `eta(t)` and its first two derivatives: 0 for `t <= 3`, 1 for `t >= 4`,
/// cubic for `m = 1` and quintic for `m = 2`.
pub fn ramp(t: f64, m: u32) -> [f64; 3] {
    if t <= 3.0 {
        return [0.0, 0.0, 0.0];
    }
    if t >= 4.0 {
        return [1.0, 0.0, 0.0];
    }
    let s = t - 3.0;
    if m <= 1 {
        [s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s), 6.0 - 12.0 * s]
    } else {
        [
            s * s * s * (10.0 + s * (-15.0 + 6.0 * s)),
            30.0 * s * s * (1.0 - s) * (1.0 - s),
            60.0 * s * (1.0 + s * (-3.0 + 2.0 * s)),
        ]
    }
}

/// Analytic supremum of `|eta^(k)|` for `k = 0, 1, 2`.
fn ramp_bounds(m: u32) -> [f64; 3] {
    if m <= 1 {
        [1.0, 1.5, 6.0]
    } else {
        [1.0, 1.875, 10.0 * 3f64.sqrt() / 3.0]
    }
}

/// `rho_eps = eta(delta / eps)`; on flat domains the product of per-face ramps, which agrees
/// with `eta(delta / eps)` away from corners and stays smooth across them.
#[derive(Clone, Debug)]
pub struct CutoffField {
    pub eps: f64,
    pub m: u32,
    domain: GraphDomain,
    product: bool,
    /// Sampled `max eps^k |nabla^k rho|` over mesh nodes, `k = 0..=order`.
    pub sampled_bounds: Vec<f64>,
    /// Analytic bound on `eps^k |nabla^k rho|`.
    pub analytic_bounds: Vec<f64>,
}

pub fn build_cutoff(domain: &GraphDomain, eps: f64, mesh: &Mesh, kappa: f64) -> Result<CutoffField> {
    if mesh.h() > eps / kappa * (1.0 + 1e-9) {
        return Err(Error::ResolutionTooCoarse { h: mesh.h(), eps, kappa });
    }
    let product = domain.is_flat();
    if !product && mesh.m > 1 {
        return Err(Error::Unsupported("second-order cutoff derivatives need a flat boundary".into()));
    }
    let order = if product { 2 } else { 1 };
    let faces: f64 = if domain.d == 1 { 2.0 } else { 4.0 };
    let b = ramp_bounds(mesh.m);
    // At most two ramps are active at any point (near a corner).
    let analytic_bounds = if product {
        let active = faces.min(2.0);
        vec![1.0, active * b[1], active * b[2] + active * (active - 1.0) * b[1] * b[1]]
    } else {
        vec![1.0, b[1]]
    };
    let mut cut = CutoffField { eps, m: mesh.m, domain: domain.clone(), product, sampled_bounds: vec![], analytic_bounds };
    let mut sampled = vec![0.0f64; order as usize + 1];
    let d = domain.d;
    let idx = multiindices_up_to(d, order);
    let mut jet = vec![0.0; idx.len()];
    for x in mesh.nodes() {
        cut.jet(&x[..d], order, &mut jet);
        for k in 0..=order {
            let v = crate::func::jet_tensor_norm(d, 1, &jet, k) * eps.powi(k as i32);
            sampled[k as usize] = sampled[k as usize].max(v);
        }
    }
    cut.sampled_bounds = sampled;
    Ok(cut)
}

impl CutoffField {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        self.jet(x, 0, &mut out);
        out[0]
    }

    /// Nodes where `0 <= rho <= 1`, `rho = 1` on `{delta >= 4 eps}` or `rho = 0` on `{delta <= 3 eps}` fails.
    pub fn count_violations(&self, mesh: &Mesh) -> usize {
        let tol = 1e-12;
        mesh.nodes()
            .iter()
            .filter(|x| {
                let x = &x[..self.domain.d];
                let rho = self.value(x);
                let delta = self.domain.nearest_boundary_point(x).0;
                !(-tol..=1.0 + tol).contains(&rho)
                    || (delta >= 4.0 * self.eps * (1.0 + 1e-12) && (rho - 1.0).abs() > tol)
                    || (delta <= 3.0 * self.eps && rho.abs() > tol)
            })
            .count()
    }

    /// Distances to the faces of a flat domain and their gradients (inward normals).
    fn faces(&self, x: &[f64]) -> Vec<(f64, [f64; 2])> {
        let r = self.domain.r;
        if self.domain.d == 1 {
            vec![(x[0], [1.0, 0.0]), (r - x[0], [-1.0, 0.0])]
        } else {
            vec![
                (x[1], [0.0, 1.0]),
                (r - x[1], [0.0, -1.0]),
                (x[0] + r, [1.0, 0.0]),
                (r - x[0], [-1.0, 0.0]),
            ]
        }
    }
}

impl FieldJet for CutoffField {
    fn d(&self) -> usize {
        self.domain.d
    }

    fn n(&self) -> usize {
        1
    }

    fn max_order(&self) -> u32 {
        if self.product {
            2
        } else {
            1
        }
    }

    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        assert!(order <= self.max_order(), "cutoff derivatives available up to order {}", self.max_order());
        let d = self.domain.d;
        let eps = self.eps;
        let (mut v, mut g, mut h) = (1.0, [0.0; 2], [[0.0; 2]; 2]);
        if self.product {
            for (dist, e) in self.faces(x) {
                let [ev, e1, e2] = ramp(dist / eps, self.m);
                if ev == 1.0 && e1 == 0.0 {
                    continue;
                }
                let fg = [e1 / eps * e[0], e1 / eps * e[1]];
                let mut nh = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        nh[a][b] = v * e2 / (eps * eps) * e[a] * e[b] + ev * h[a][b] + g[a] * fg[b] + fg[a] * g[b];
                    }
                }
                let ng = [v * fg[0] + ev * g[0], v * fg[1] + ev * g[1]];
                v *= ev;
                g = ng;
                h = nh;
            }
        } else {
            let (delta, p) = self.domain.nearest_boundary_point(x);
            let [ev, e1, _] = ramp(delta / eps, self.m);
            v = ev;
            if e1 != 0.0 && delta > 0.0 {
                for a in 0..d {
                    g[a] = e1 / eps * (x[a] - p[a]) / delta;
                }
            }
        }
        for (pos, a) in multiindices_up_to(d, order).iter().enumerate() {
            let c = a.components();
            out[pos] = match a.order() {
                0 => v,
                1 => g[c.iter().position(|&k| k == 1).expect("unit index")],
                _ => {
                    let axes: Vec<usize> = (0..d).flat_map(|k| std::iter::repeat_n(k, c[k] as usize)).collect();
                    h[axes[0]][axes[1]]
                }
            };
        }
    }
}
