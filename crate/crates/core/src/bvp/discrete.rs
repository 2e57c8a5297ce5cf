use super::element::{global_dof, kind_index, Element};
use crate::error::{Error, Result};
use crate::func::FieldJet;
use crate::geometry::Mesh;
use crate::tensor::{multiindices_up_to, RegionSamples};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Finite element function: nodal dofs `dofs[(node * dofs_per_node + kind) * n + comp]`.
#[derive(Clone)]
pub struct DiscreteField {
    pub mesh: Arc<Mesh>,
    pub n: usize,
    pub dofs: Vec<f64>,
    elements: Arc<Vec<Element>>,
}

impl std::fmt::Debug for DiscreteField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteField").field("n", &self.n).field("dofs", &self.dofs.len()).finish()
    }
}

impl DiscreteField {
    pub fn new(mesh: Arc<Mesh>, n: usize, dofs: Vec<f64>) -> Self {
        assert_eq!(dofs.len(), mesh.n_nodes() * mesh.dofs_per_node() * n, "dof vector length");
        let top = mesh.m.max(1);
        let elements = Arc::new((0..=top).map(|k| Element::new(&mesh, k)).collect());
        Self { mesh, n, dofs, elements }
    }

    pub fn zeros(mesh: Arc<Mesh>, n: usize) -> Self {
        let len = mesh.n_nodes() * mesh.dofs_per_node() * n;
        Self::new(mesh, n, vec![0.0; len])
    }

    pub fn with_dofs(&self, dofs: Vec<f64>) -> Self {
        assert_eq!(dofs.len(), self.dofs.len());
        Self { mesh: self.mesh.clone(), n: self.n, dofs, elements: self.elements.clone() }
    }

    /// Nodal interpolant: values and the derivatives carried by each nodal kind.
    pub fn interpolate(mesh: Arc<Mesh>, f: &dyn FieldJet) -> Self {
        let n = f.n();
        let d = mesh.d();
        let dpn = mesh.dofs_per_node();
        let order = if dpn == 1 { 0 } else { d as u32 };
        let idx = multiindices_up_to(d, order);
        let mut jet = vec![0.0; idx.len() * n];
        let mut out = Self::zeros(mesh.clone(), n);
        for k in 0..mesh.n_nodes() {
            let x = mesh.node(k);
            f.jet(&x[..d], order, &mut jet);
            for kind in 0..dpn {
                let a = kind_index(d, mesh.family, kind);
                let pos = idx.iter().position(|b| *b == a).expect("kind index within jet");
                for i in 0..n {
                    out.dofs[(k * dpn + kind) * n + i] = jet[pos * n + i];
                }
            }
        }
        out
    }

    pub fn same_mesh(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || (self.dofs.len() == other.dofs.len() && self.mesh.h() == other.mesh.h())
    }

    /// `self - other` on a shared mesh.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if !self.same_mesh(other) || self.n != other.n {
            return Err(Error::InconsistentMeshes("fields live on different meshes".into()));
        }
        Ok(self.with_dofs(self.dofs.iter().zip(&other.dofs).map(|(a, b)| a - b).collect()))
    }

    pub fn order(&self) -> u32 {
        self.mesh.m
    }

    /// Quadrature samples of the values over the cells' points satisfying `pred`.
    pub fn restrict<P: Fn(&[f64]) -> bool>(&self, pred: P) -> RegionSamples {
        let mesh = &self.mesh;
        let d = mesh.d();
        let rule = mesh.reference_rule();
        let mut samples = RegionSamples::new(d, self.n);
        let mut v = vec![0.0; self.n];
        for c in 0..mesh.n_cells() {
            let map = mesh.cell_map(c);
            for (xi, w) in &rule {
                let x = map.map(xi);
                if pred(&x[..d]) {
                    self.jet_in_cell(c, xi, &x[..d], 0, &mut v);
                    samples.push(&x[..d], w * map.det, &v);
                }
            }
        }
        samples
    }

    /// Node coordinates, components and derivatives up to order `m` at each node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mesh = &self.mesh;
        let d = mesh.d();
        let order = self.max_order();
        let idx = multiindices_up_to(d, order);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut head: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        for a in &idx {
            for i in 0..self.n {
                let tag: Vec<String> = a.components().iter().map(|c| c.to_string()).collect();
                head.push(format!("d{}_u{}", tag.join(""), i + 1));
            }
        }
        writeln!(f, "{}", head.join(","))?;
        let mut jet = vec![0.0; idx.len() * self.n];
        for k in 0..mesh.n_nodes() {
            let x = mesh.node(k);
            self.jet(&x[..d], order, &mut jet);
            let mut row: Vec<String> = x[..d].iter().map(|v| format!("{v:.17e}")).collect();
            row.extend(jet.iter().map(|v| format!("{v:.17e}")));
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl FieldJet for DiscreteField {
    fn d(&self) -> usize {
        self.mesh.d()
    }

    fn n(&self) -> usize {
        self.n
    }

    fn max_order(&self) -> u32 {
        self.mesh.m
    }

    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let (c, xi) = self
            .mesh
            .locate(x)
            .unwrap_or_else(|| panic!("point {x:?} lies outside the mesh"));
        self.jet_in_cell(c, &xi, x, order, out);
    }

    fn jet_in_cell(&self, cell: usize, xi: &[f64], _x: &[f64], order: u32, out: &mut [f64]) {
        assert!(order <= self.max_order().max(1), "derivatives of order {order} exceed the element");
        let mesh = &self.mesh;
        let el = &self.elements[order as usize];
        let (nb, nder) = (el.local_count(), el.derivatives().len());
        let mut buf = [0.0; 16 * 6];
        el.fill(&mesh.cell_map(cell), &[xi[0], xi.get(1).copied().unwrap_or(0.0)], &mut buf);
        let corners = mesh.cell_nodes(cell);
        let n = self.n;
        out[..nder * n].fill(0.0);
        for b in 0..nb {
            for i in 0..n {
                let u = self.dofs[global_dof(&corners, el.dpn, n, b, i)];
                if u == 0.0 {
                    continue;
                }
                for pos in 0..nder {
                    out[pos * n + i] += u * buf[b * nder + pos];
                }
            }
        }
    }
}
