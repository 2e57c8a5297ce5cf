//! Tensor-product shape functions: P1/Q1 and cubic Hermite / Bogner–Fox–Schmit.

use crate::geometry::{CellMap, ElementFamily, Mesh};
use crate::tensor::{multiindices_up_to, MultiIndex};

/// `k`-th derivatives (`k = 0, 1, 2`) of the 1D shape function attached to corner `c` and kind `kind`.
fn shape1d(family: ElementFamily, c: usize, kind: usize, t: f64) -> [f64; 3] {
    match (family, c, kind) {
        (ElementFamily::Lagrange, 0, _) => [1.0 - t, -1.0, 0.0],
        (ElementFamily::Lagrange, _, _) => [t, 1.0, 0.0],
        (ElementFamily::Hermite, 0, 0) => [1.0 - t * t * (3.0 - 2.0 * t), 6.0 * t * (t - 1.0), 12.0 * t - 6.0],
        (ElementFamily::Hermite, 0, _) => [t * (1.0 - t) * (1.0 - t), 1.0 + t * (3.0 * t - 4.0), 6.0 * t - 4.0],
        (ElementFamily::Hermite, _, 0) => [t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t), 6.0 - 12.0 * t],
        (ElementFamily::Hermite, _, _) => [t * t * (t - 1.0), t * (3.0 * t - 2.0), 6.0 * t - 2.0],
    }
}

/// Physical derivatives of every local shape function at one reference point.
///
/// `vals[b * nder + pos]` holds `D^alpha phi_b` with `alpha` the `pos`-th entry of
/// [`multiindices_up_to`]`(d, order)`; local function `b = corner * dofs_per_node + kind`.
pub struct BasisTable {
    pub nb: usize,
    pub nder: usize,
    pub vals: Vec<f64>,
}

impl BasisTable {
    pub fn get(&self, b: usize, pos: usize) -> f64 {
        self.vals[b * self.nder + pos]
    }
}

/// Axis list of a multi-index of order at most two, e.g. `(1, 1) -> [0, 1]`.
fn axes(a: &MultiIndex) -> Vec<usize> {
    (0..a.dim()).flat_map(|k| std::iter::repeat_n(k, a.get(k) as usize)).collect()
}

pub struct Element {
    pub d: usize,
    pub family: ElementFamily,
    pub dpn: usize,
    pub order: u32,
    derivs: Vec<MultiIndex>,
    derivs_axes: Vec<Vec<usize>>,
    hx: f64,
    hy: f64,
}

impl Element {
    pub fn new(mesh: &Mesh, order: u32) -> Self {
        assert!(order <= 2, "shape derivatives are provided up to order 2");
        let d = mesh.d();
        let derivs = multiindices_up_to(d, order);
        let derivs_axes = derivs.iter().map(axes).collect();
        Self {
            d,
            family: mesh.family,
            dpn: mesh.dofs_per_node(),
            order,
            derivs,
            derivs_axes,
            hx: mesh.hx,
            hy: mesh.hy,
        }
    }

    pub fn local_count(&self) -> usize {
        self.dpn * if self.d == 1 { 2 } else { 4 }
    }

    pub fn derivatives(&self) -> &[MultiIndex] {
        &self.derivs
    }

    pub fn table(&self, map: &CellMap, xi: &[f64; 2]) -> BasisTable {
        let nb = self.local_count();
        let nder = self.derivs.len();
        let mut vals = vec![0.0; nb * nder];
        self.fill(map, xi, &mut vals);
        BasisTable { nb, nder, vals }
    }

    pub fn fill(&self, map: &CellMap, xi: &[f64; 2], vals: &mut [f64]) {
        let nder = self.derivs.len();
        let inv = map.inv;
        let kinds_per_axis = if self.family == ElementFamily::Hermite { 2 } else { 1 };
        if self.d == 1 {
            for c in 0..2 {
                for kind in 0..self.dpn {
                    let f = shape1d(self.family, c, kind, xi[0]);
                    let scale = if kind == 1 { self.hx } else { 1.0 };
                    let b = c * self.dpn + kind;
                    for (pos, ax) in self.derivs_axes.iter().enumerate() {
                        let k = ax.len();
                        vals[b * nder + pos] = scale * f[k] * inv[0][0].powi(k as i32);
                    }
                }
            }
            return;
        }
        for cy in 0..2 {
            for cx in 0..2 {
                let corner = cx + 2 * cy;
                for kb in 0..kinds_per_axis {
                    for ka in 0..kinds_per_axis {
                        let kind = ka + kinds_per_axis * kb;
                        let fx = shape1d(self.family, cx, ka, xi[0]);
                        let fy = shape1d(self.family, cy, kb, xi[1]);
                        let scale = if ka == 1 { self.hx } else { 1.0 } * if kb == 1 { self.hy } else { 1.0 };
                        // Reference derivatives r[p][q] = d^p/dxi^p d^q/deta^q.
                        let rd = |p: usize, q: usize| scale * fx[p] * fy[q];
                        let b = corner * self.dpn + kind;
                        for (pos, ax) in self.derivs_axes.iter().enumerate() {
                            let v = match ax.len() {
                                0 => rd(0, 0),
                                1 => inv[0][ax[0]] * rd(1, 0) + inv[1][ax[0]] * rd(0, 1),
                                _ => {
                                    let (a, c) = (ax[0], ax[1]);
                                    inv[0][a] * inv[0][c] * rd(2, 0)
                                        + (inv[0][a] * inv[1][c] + inv[1][a] * inv[0][c]) * rd(1, 1)
                                        + inv[1][a] * inv[1][c] * rd(0, 2)
                                }
                            };
                            vals[b * nder + pos] = v;
                        }
                    }
                }
            }
        }
    }
}

/// Global dof of local function `b` and component `comp`.
#[inline]
pub fn global_dof(mesh_corners: &[usize; 4], dpn: usize, n: usize, b: usize, comp: usize) -> usize {
    let (corner, kind) = (b / dpn, b % dpn);
    (mesh_corners[corner] * dpn + kind) * n + comp
}

/// Derivative multi-index carried by nodal kind `kind`: `u`, then `u_x` / `u_y` / `u_xy`.
pub fn kind_index(d: usize, family: ElementFamily, kind: usize) -> MultiIndex {
    match (family, d) {
        (ElementFamily::Lagrange, _) => MultiIndex::zero(d),
        (ElementFamily::Hermite, 1) => MultiIndex::new(vec![kind as u32]),
        (ElementFamily::Hermite, _) => MultiIndex::new(vec![(kind % 2) as u32, (kind / 2) as u32]),
    }
}
