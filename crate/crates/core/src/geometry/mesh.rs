use super::GraphDomain;
use crate::error::{Error, Result};
use crate::quadrature::gauss_unit;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementFamily {
    /// P1 in 1D, Q1 in 2D.
    Lagrange,
    /// Cubic Hermite in 1D, Bogner–Fox–Schmit in 2D.
    Hermite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryTag {
    Interior,
    /// On the graph part `Delta_r`.
    Graph,
    Top,
    Side,
}

/// Affine map `x = origin + jac * xi` of the reference square.
#[derive(Clone, Copy, Debug)]
pub struct CellMap {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    /// `inv[b][a] = d xi_b / d x_a`.
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl CellMap {
    pub fn map(&self, xi: &[f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }
}

/// Tensor grid on the reference box `[-r, r] x [0, r]` (or `[0, r]`), sheared onto `D(r, psi)`
/// by `(s, t) -> (s, t + psi(s))` with `psi` interpolated linearly across each cell.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: GraphDomain,
    pub m: u32,
    pub family: ElementFamily,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    psi_nodes: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    tags: Vec<BoundaryTag>,
}

pub fn build_mesh(domain: &GraphDomain, h: f64, m: u32) -> Result<Mesh> {
    let r = domain.r;
    if !(h > 0.0) || h > r / 8.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("mesh spacing {h} must lie in (0, r/8] for r = {r}")));
    }
    if !(1..=2).contains(&m) {
        return Err(Error::Unsupported(format!("order m = {m}")));
    }
    let family = if m == 1 { ElementFamily::Lagrange } else { ElementFamily::Hermite };
    if domain.d == 1 {
        let nx = (r / h - 1e-9).ceil() as usize;
        let hx = r / nx as f64;
        let nodes = (0..=nx).map(|i| [hx * i as f64, 0.0]).collect();
        let mut tags = vec![BoundaryTag::Interior; nx + 1];
        tags[0] = BoundaryTag::Graph;
        tags[nx] = BoundaryTag::Top;
        return Ok(Mesh { domain: domain.clone(), m, family, nx, ny: 0, hx, hy: 1.0, psi_nodes: vec![], nodes, tags });
    }
    if m == 2 && !domain.psi.is_flat() {
        return Err(Error::Unsupported("conforming H^2 elements need a flat graph in 2D".into()));
    }
    let nx = (2.0 * r / h - 1e-9).ceil() as usize;
    let ny = (r / h - 1e-9).ceil() as usize;
    let (hx, hy) = (2.0 * r / nx as f64, r / ny as f64);
    let psi_nodes: Vec<f64> = (0..=nx).map(|i| domain.psi.value(-r + hx * i as f64)).collect();
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut tags = Vec::with_capacity(nodes.capacity());
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([-r + hx * i as f64, hy * j as f64 + psi_nodes[i]]);
            tags.push(if i == 0 || i == nx {
                BoundaryTag::Side
            } else if j == 0 {
                BoundaryTag::Graph
            } else if j == ny {
                BoundaryTag::Top
            } else {
                BoundaryTag::Interior
            });
        }
    }
    let mesh = Mesh { domain: domain.clone(), m, family, nx, ny, hx, hy, psi_nodes, nodes, tags };
    for c in 0..mesh.n_cells() {
        let (lo, hi) = mesh.jacobian_singular_values(c);
        if mesh.cell_map(c).det <= 0.0 || lo < 0.05 || hi / lo > 50.0 {
            return Err(Error::DegenerateCell(format!("cell {c} has normalized singular values {lo:.3e}, {hi:.3e}")));
        }
    }
    Ok(mesh)
}

impl Mesh {
    pub fn d(&self) -> usize {
        self.domain.d
    }

    /// Largest edge length of the reference grid.
    pub fn h(&self) -> f64 {
        if self.d() == 1 {
            self.hx
        } else {
            self.hx.max(self.hy)
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        if self.d() == 1 {
            self.nx
        } else {
            self.nx * self.ny
        }
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        self.nodes[k]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn tag(&self, k: usize) -> BoundaryTag {
        self.tags[k]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.tags[k] != BoundaryTag::Interior
    }

    pub fn dofs_per_node(&self) -> usize {
        match (self.family, self.d()) {
            (ElementFamily::Lagrange, _) => 1,
            (ElementFamily::Hermite, 1) => 2,
            (ElementFamily::Hermite, _) => 4,
        }
    }

    pub fn corners_per_cell(&self) -> usize {
        if self.d() == 1 {
            2
        } else {
            4
        }
    }

    /// Corner nodes, corner `k = cx + 2 cy` at reference position `(cx, cy)`.
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        if self.d() == 1 {
            return [c, c + 1, usize::MAX, usize::MAX];
        }
        let (i, j) = (c % self.nx, c / self.nx);
        let w = self.nx + 1;
        [j * w + i, j * w + i + 1, (j + 1) * w + i, (j + 1) * w + i + 1]
    }

    pub fn cell_map(&self, c: usize) -> CellMap {
        if self.d() == 1 {
            return CellMap {
                origin: [self.hx * c as f64, 0.0],
                jac: [[self.hx, 0.0], [0.0, 1.0]],
                inv: [[1.0 / self.hx, 0.0], [0.0, 1.0]],
                det: self.hx,
            };
        }
        let (i, j) = (c % self.nx, c / self.nx);
        let dpsi = self.psi_nodes[i + 1] - self.psi_nodes[i];
        let (hx, hy) = (self.hx, self.hy);
        CellMap {
            origin: [-self.domain.r + hx * i as f64, hy * j as f64 + self.psi_nodes[i]],
            jac: [[hx, 0.0], [dpsi, hy]],
            inv: [[1.0 / hx, 0.0], [-dpsi / (hx * hy), 1.0 / hy]],
            det: hx * hy,
        }
    }

    /// Singular values of the cell Jacobian scaled by the reference spacings.
    pub fn jacobian_singular_values(&self, c: usize) -> (f64, f64) {
        if self.d() == 1 {
            return (1.0, 1.0);
        }
        let j = self.cell_map(c).jac;
        let (a, b, cc, d) = (j[0][0] / self.hx, j[0][1] / self.hy, j[1][0] / self.hx, j[1][1] / self.hy);
        let s1 = a * a + b * b + cc * cc + d * d;
        let det = (a * d - b * cc).abs();
        let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
        (((s1 - disc) / 2.0).sqrt(), ((s1 + disc) / 2.0).sqrt())
    }

    /// Cell and reference coordinates of `x`, if `x` lies in the meshed region.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, [f64; 2])> {
        let tol = 1e-9;
        let s = if self.d() == 1 { x[0] } else { x[0] + self.domain.r };
        let fi = s / self.hx;
        if fi < -tol || fi > self.nx as f64 + tol {
            return None;
        }
        let i = (fi.floor().max(0.0) as usize).min(self.nx - 1);
        let xi = fi - i as f64;
        if self.d() == 1 {
            return Some((i, [xi, 0.0]));
        }
        let t = x[1] - self.psi_nodes[i] - xi * (self.psi_nodes[i + 1] - self.psi_nodes[i]);
        let fj = t / self.hy;
        if fj < -tol || fj > self.ny as f64 + tol {
            return None;
        }
        let j = (fj.floor().max(0.0) as usize).min(self.ny - 1);
        Some((j * self.nx + i, [xi, fj - j as f64]))
    }

    /// Height above the discrete lower boundary, `x_d - psi_h(x')`.
    pub fn height(&self, x: &[f64]) -> f64 {
        if self.d() == 1 {
            return x[0];
        }
        let fi = ((x[0] + self.domain.r) / self.hx).clamp(0.0, self.nx as f64);
        let i = (fi.floor() as usize).min(self.nx - 1);
        let xi = fi - i as f64;
        x[1] - self.psi_nodes[i] - xi * (self.psi_nodes[i + 1] - self.psi_nodes[i])
    }

    /// Membership of a meshed point in `D_rho`, measured against the discrete boundary.
    pub fn in_sub(&self, x: &[f64], rho: f64) -> bool {
        if self.d() == 1 {
            return x[0] > 0.0 && x[0] < rho;
        }
        let t = self.height(x);
        x[0].abs() < rho && t > 0.0 && t < rho
    }

    /// Nodes sharing a cell with `k`, in increasing order.
    pub fn node_neighbors(&self, k: usize) -> Vec<usize> {
        if self.d() == 1 {
            return (k.saturating_sub(1)..=(k + 1).min(self.nx)).collect();
        }
        let w = self.nx + 1;
        let (i, j) = (k % w, k / w);
        let mut out = Vec::with_capacity(9);
        for jj in j.saturating_sub(1)..=(j + 1).min(self.ny) {
            for ii in i.saturating_sub(1)..=(i + 1).min(self.nx) {
                out.push(jj * w + ii);
            }
        }
        out
    }

    /// Quadrature points per axis: twice the polynomial degree of the element.
    pub fn quadrature_points(&self) -> usize {
        match self.family {
            ElementFamily::Lagrange => 2,
            ElementFamily::Hermite => 6,
        }
    }

    /// Tensor Gauss rule on the reference cell: `(xi, weight)` with weights summing to one.
    pub fn reference_rule(&self) -> Vec<([f64; 2], f64)> {
        self.reference_rule_with(self.quadrature_points())
    }

    pub fn reference_rule_with(&self, npts: usize) -> Vec<([f64; 2], f64)> {
        let (x, w) = gauss_unit(npts);
        if self.d() == 1 {
            return x.iter().zip(&w).map(|(&a, &wa)| ([a, 0.0], wa)).collect();
        }
        let mut out = Vec::with_capacity(npts * npts);
        for (&b, &wb) in x.iter().zip(&w) {
            for (&a, &wa) in x.iter().zip(&w) {
                out.push(([a, b], wa * wb));
            }
        }
        out
    }

    /// `sum_cells sum_q w det f(cell, xi, x)`, parallel over cells.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(usize, &[f64; 2], &[f64; 2]) -> f64 + Sync,
    {
        let rule = self.reference_rule();
        (0..self.n_cells())
            .into_par_iter()
            .map(|c| {
                let map = self.cell_map(c);
                rule.iter().map(|(xi, w)| w * map.det * f(c, xi, &map.map(xi))).sum::<f64>()
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }

    /// Quadrature measure of `{x : pred(x)}`.
    pub fn region_measure<P: Fn(&[f64]) -> bool + Sync>(&self, pred: P) -> f64 {
        self.integrate(|_, _, x| if pred(&x[..self.d()]) { 1.0 } else { 0.0 })
    }

    /// Writes `{stem}-vertices.csv` and `{stem}-cells.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut v = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}-vertices.csv")))?);
        writeln!(v, "id,x1,x2,tag")?;
        for (k, (x, t)) in self.nodes.iter().zip(&self.tags).enumerate() {
            let tag = serde_json::to_value(t)?;
            writeln!(v, "{k},{:.17e},{:.17e},{}", x[0], x[1], tag.as_str().unwrap_or("?"))?;
        }
        let mut c = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}-cells.csv")))?);
        if self.d() == 1 {
            writeln!(c, "id,v0,v1")?;
        } else {
            writeln!(c, "id,v0,v1,v2,v3")?;
        }
        for cell in 0..self.n_cells() {
            let nodes = self.cell_nodes(cell);
            let ids: Vec<String> = nodes[..self.corners_per_cell()].iter().map(|n| n.to_string()).collect();
            writeln!(c, "{cell},{}", ids.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Psi;

    #[test]
    fn interval_counts() {
        let dom = GraphDomain::interval(1.0);
        let p1 = build_mesh(&dom, 1.0 / 16.0, 1).unwrap();
        assert_eq!((p1.n_nodes(), p1.n_cells()), (17, 16));
        assert_eq!(p1.dofs_per_node(), 1);
        let herm = build_mesh(&dom, 1.0 / 16.0, 2).unwrap();
        assert_eq!(herm.dofs_per_node(), 2);
        assert_eq!(herm.tag(0), BoundaryTag::Graph);
        assert_eq!(herm.tag(16), BoundaryTag::Top);
    }

    #[test]
    fn sine_graph_jacobians_are_near_identity() {
        let dom = GraphDomain::graph(1.0, Psi::Sine { amp: 0.1, freq: 1.0 }, None).unwrap();
        let mesh = build_mesh(&dom, 1.0 / 32.0, 1).unwrap();
        for c in 0..mesh.n_cells() {
            let (lo, hi) = mesh.jacobian_singular_values(c);
            assert!(lo >= 0.9 && hi <= 1.1, "cell {c}: {lo} {hi}");
        }
        for k in 0..mesh.n_nodes() {
            if mesh.tag(k) == BoundaryTag::Graph {
                let x = mesh.node(k);
                assert!((x[1] - dom.psi.value(x[0])).abs() < 1e-15);
            }
        }
        assert!((mesh.region_measure(|_| true) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn locate_inverts_cell_maps() {
        let dom = GraphDomain::graph(0.5, Psi::Sine { amp: 0.2, freq: 3.0 }, None).unwrap();
        let mesh = build_mesh(&dom, 1.0 / 16.0, 1).unwrap();
        for c in [0, 7, mesh.n_cells() - 1] {
            let map = mesh.cell_map(c);
            let x = map.map(&[0.3, 0.6]);
            let (cc, xi) = mesh.locate(&x).unwrap();
            assert_eq!(cc, c);
            assert!((xi[0] - 0.3).abs() < 1e-12 && (xi[1] - 0.6).abs() < 1e-12);
        }
        assert!(mesh.locate(&[0.0, -0.5]).is_none());
    }

    #[test]
    fn curved_fourth_order_is_unsupported() {
        let dom = GraphDomain::graph(0.5, Psi::Sine { amp: 0.1, freq: 1.0 }, None).unwrap();
        assert!(matches!(build_mesh(&dom, 1.0 / 16.0, 2), Err(Error::Unsupported(_))));
        assert!(matches!(build_mesh(&dom, 0.25, 1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn steep_graph_is_degenerate() {
        let dom = GraphDomain::graph(0.5, Psi::Sine { amp: 2.0, freq: 40.0 }, None).unwrap();
        assert!(matches!(build_mesh(&dom, 1.0 / 16.0, 1), Err(Error::DegenerateCell(_))));
    }

    #[test]
    fn csv_export_writes_both_files() {
        let dir = std::env::temp_dir().join(format!("homlab-mesh-{}", std::process::id()));
        let mesh = build_mesh(&GraphDomain::interval(1.0), 0.125, 1).unwrap();
        mesh.write_csv(&dir, "unit").unwrap();
        let cells = std::fs::read_to_string(dir.join("unit-cells.csv")).unwrap();
        assert_eq!(cells.lines().count(), 9);
        let verts = std::fs::read_to_string(dir.join("unit-vertices.csv")).unwrap();
        assert!(verts.lines().nth(1).unwrap().ends_with("graph"));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
