//! Conforming Galerkin solvers for the oscillating and homogenized Dirichlet problems.

mod discrete;
pub mod element;

pub use discrete::DiscreteField;

use crate::cell::EffectiveTensor;
use crate::error::{Error, Result};
use crate::func::{AnalyticField, FieldJet};
use crate::geometry::{build_mesh, GraphDomain, Mesh};
use crate::linalg::{bicgstab, pcg, CsrMatrix, Ilu0, KrylovOptions, KrylovStats};
use crate::tensor::{enumerate_multiindices, multiindices_up_to, CoefficientTensor, MultiIndex, PeriodicCoefficientField};
use element::{global_dof, kind_index, Element};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default ratio `eps / h` demanded of meshes for oscillating problems.
pub const DEFAULT_KAPPA: f64 = 16.0;
pub const BVP_TOLERANCE: f64 = 1e-10;

/// Boundary data given as traces of an ambient smooth field `G`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhitneyData {
    pub g: AnalyticField,
}

impl WhitneyData {
    pub fn new(g: AnalyticField) -> Self {
        Self { g }
    }

    /// Boundary dofs and their values `D^gamma G` at boundary nodes.
    pub fn boundary_dofs(&self, mesh: &Mesh) -> Vec<(usize, f64)> {
        let d = mesh.d();
        let n = self.g.n();
        let dpn = mesh.dofs_per_node();
        let mut out = Vec::new();
        for k in 0..mesh.n_nodes() {
            if !mesh.is_boundary(k) {
                continue;
            }
            let x = mesh.node(k);
            for kind in 0..dpn {
                let a = kind_index(d, mesh.family, kind);
                let v = self.g.derivative(&a, &x[..d]);
                for (i, vi) in v.into_iter().enumerate() {
                    out.push(((k * dpn + kind) * n + i, vi));
                }
            }
        }
        out
    }

    /// Largest mismatch between `D^gamma u` and `D^gamma G`, `|gamma| <= m - 1`, over boundary nodes.
    pub fn trace_defect(&self, u: &DiscreteField) -> f64 {
        let mesh = &u.mesh;
        let d = mesh.d();
        let order = mesh.m - 1;
        let idx = multiindices_up_to(d, order);
        let mut jet = vec![0.0; idx.len() * u.n];
        let mut worst = 0.0f64;
        for k in 0..mesh.n_nodes() {
            if !mesh.is_boundary(k) {
                continue;
            }
            let x = mesh.node(k);
            u.jet(&x[..d], order, &mut jet);
            for (pos, a) in idx.iter().enumerate() {
                let g = self.g.derivative(a, &x[..d]);
                for i in 0..u.n {
                    worst = worst.max((jet[pos * u.n + i] - g[i]).abs());
                }
            }
        }
        worst
    }
}

/// `sum_alpha D^alpha f^alpha`; the term with `alpha = 0` is the plain source `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RightHandSide {
    pub terms: Vec<(MultiIndex, AnalyticField)>,
    /// Integrability exponent the data are declared in (`p` or `q`).
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    2.0
}

impl RightHandSide {
    pub fn zero() -> Self {
        Self { terms: vec![], exponent: 2.0 }
    }

    pub fn source(f: AnalyticField, p: f64) -> Self {
        let d = f.d;
        Self { terms: vec![(MultiIndex::zero(d), f)], exponent: p }
    }

    pub fn divergence(terms: Vec<(MultiIndex, AnalyticField)>, q: f64) -> Self {
        Self { terms, exponent: q }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(_, f)| f.is_zero())
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(|(a, _)| a.order()).max().unwrap_or(0)
    }

    /// The plain source `F`, when present.
    pub fn plain(&self) -> Option<&AnalyticField> {
        self.terms.iter().find(|(a, _)| a.order() == 0).map(|(_, f)| f)
    }
}

/// Coefficients of the operator: oscillating `A(x / eps)` or constant.
#[derive(Clone, Copy)]
pub enum Coefficients<'a> {
    Periodic { field: &'a PeriodicCoefficientField, eps: f64 },
    Constant(&'a CoefficientTensor),
}

impl Coefficients<'_> {
    fn dims(&self) -> (usize, usize, u32) {
        match self {
            Coefficients::Periodic { field, .. } => field.dims(),
            Coefficients::Constant(t) => t.dims(),
        }
    }

    fn is_symmetric(&self) -> bool {
        match self {
            Coefficients::Periodic { field, .. } => field.is_symmetric(),
            Coefficients::Constant(t) => t.is_symmetric(1e-12),
        }
    }
}

/// Assembled stiffness matrix and load vector before boundary conditions.
pub struct System {
    pub matrix: CsrMatrix,
    pub load: Vec<f64>,
}

fn sparsity(mesh: &Mesh, n: usize) -> (Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
    let dpn = mesh.dofs_per_node();
    let block = dpn * n;
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut neighbors = Vec::with_capacity(mesh.n_nodes());
    for k in 0..mesh.n_nodes() {
        let nb = mesh.node_neighbors(k);
        for _ in 0..block {
            for &j in &nb {
                cols.extend(j * block..(j + 1) * block);
            }
            row_ptr.push(cols.len());
        }
        neighbors.push(nb);
    }
    (row_ptr, cols, neighbors)
}

/// Galerkin assembly of `sum_{alpha,beta} int A^{alpha beta}_{ij} D^beta u_j D^alpha phi_i` and
/// `int F phi + sum_alpha (-1)^{|alpha|} int f^alpha D^alpha phi`.
pub fn assemble(mesh: &Mesh, coeffs: Coefficients<'_>, rhs: &RightHandSide) -> Result<System> {
    let (d, n, m) = coeffs.dims();
    if d != mesh.d() || m != mesh.m {
        return Err(Error::InconsistentMeshes(format!("operator (d={d}, m={m}) does not match the mesh")));
    }
    if rhs.max_order() > m {
        return Err(Error::InvalidInput("right-hand side terms need |alpha| <= m".into()));
    }
    let el = Element::new(mesh, m);
    let nb = el.local_count();
    let nloc = nb * n;
    let dpn = el.dpn;
    let derivs = el.derivatives().to_vec();
    let top: Vec<usize> = enumerate_multiindices(d, m)
        .iter()
        .map(|a| derivs.iter().position(|b| b == a).expect("top-order slot"))
        .collect();
    let k = top.len();
    let rhs_slots: Vec<(usize, f64, &AnalyticField)> = rhs
        .terms
        .iter()
        .map(|(a, f)| {
            let pos = derivs.iter().position(|b| b == a).expect("rhs slot");
            (pos, if a.order() % 2 == 0 { 1.0 } else { -1.0 }, f)
        })
        .collect();
    let rule = mesh.reference_rule();
    let (row_ptr, cols, neighbors) = sparsity(mesh, n);
    let mut values = vec![0.0; cols.len()];
    let mut load = vec![0.0; mesh.n_nodes() * dpn * n];

    let local = |c: usize| -> (Vec<f64>, Vec<f64>) {
        let map = mesh.cell_map(c);
        let mut ke = vec![0.0; nloc * nloc];
        let mut fe = vec![0.0; nloc];
        let mut a = match coeffs {
            Coefficients::Constant(t) => t.clone(),
            Coefficients::Periodic { .. } => CoefficientTensor::zeros(d, n, m),
        };
        let mut flux = vec![0.0; k * n];
        let mut y = [0.0; 2];
        for (xi, w) in &rule {
            let x = map.map(xi);
            let wd = w * map.det;
            if let Coefficients::Periodic { field, eps } = coeffs {
                y[0] = x[0] / eps;
                y[1] = x[1] / eps;
                field.eval_into(&y[..d], &mut a);
            }
            let tab = el.table(&map, xi);
            for b2 in 0..nb {
                for j in 0..n {
                    // flux[(alpha, i)] = sum_beta A^{alpha beta}_{ij} D^beta phi_{b2}
                    for al in 0..k {
                        for i in 0..n {
                            let mut s = 0.0;
                            for be in 0..k {
                                s += a.at(al, be, i, j) * tab.get(b2, top[be]);
                            }
                            flux[al * n + i] = s;
                        }
                    }
                    let col = b2 * n + j;
                    for b1 in 0..nb {
                        for i in 0..n {
                            let mut s = 0.0;
                            for al in 0..k {
                                s += flux[al * n + i] * tab.get(b1, top[al]);
                            }
                            ke[(b1 * n + i) * nloc + col] += wd * s;
                        }
                    }
                }
            }
            for &(pos, sign, f) in &rhs_slots {
                let v = f.value(&x[..d]);
                for b1 in 0..nb {
                    let phi = tab.get(b1, pos);
                    for i in 0..n {
                        fe[b1 * n + i] += wd * sign * v[i] * phi;
                    }
                }
            }
        }
        (ke, fe)
    };

    let block = dpn * n;
    let chunk = 2048;
    for start in (0..mesh.n_cells()).step_by(chunk) {
        let end = (start + chunk).min(mesh.n_cells());
        let locals: Vec<(Vec<f64>, Vec<f64>)> = (start..end).into_par_iter().map(local).collect();
        for (c, (ke, fe)) in (start..end).zip(locals) {
            let corners = mesh.cell_nodes(c);
            for r in 0..nloc {
                let (b1, i) = (r / n, r % n);
                let row = global_dof(&corners, dpn, n, b1, i);
                load[row] += fe[r];
                let node = row / block;
                for cc in 0..nloc {
                    let (b2, j) = (cc / n, cc % n);
                    let gcol = global_dof(&corners, dpn, n, b2, j);
                    let cnode = gcol / block;
                    let slot = neighbors[node].binary_search(&cnode).expect("neighbor in pattern");
                    values[row_ptr[row] + slot * block + gcol % block] += ke[r * nloc + cc];
                }
            }
        }
    }
    let dim = load.len();
    Ok(System { matrix: CsrMatrix::from_parts(dim, row_ptr, cols, values), load })
}

/// Solver outcome with diagnostics.
#[derive(Clone, Debug)]
pub struct BvpSolution {
    pub field: DiscreteField,
    pub stats: KrylovStats,
    pub symmetric: bool,
    pub dofs: usize,
    /// `||u_h - u_{h/2}||_{H^m}` when requested.
    pub indicator: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct BvpOptions {
    pub h: f64,
    pub kappa: f64,
    pub tol: f64,
    /// Largest admissible number of unknowns.
    pub budget: usize,
    pub indicator: bool,
}

impl BvpOptions {
    pub fn new(h: f64) -> Self {
        Self { h, kappa: DEFAULT_KAPPA, tol: BVP_TOLERANCE, budget: 4_000_000, indicator: false }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_indicator(mut self, on: bool) -> Self {
        self.indicator = on;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

fn dof_count(domain: &GraphDomain, h: f64, m: u32, n: usize) -> usize {
    let per_node = if m == 1 { 1 } else { 2usize.pow(domain.d as u32) };
    let nodes = if domain.d == 1 {
        (domain.r / h).ceil() as usize + 1
    } else {
        ((2.0 * domain.r / h).ceil() as usize + 1) * ((domain.r / h).ceil() as usize + 1)
    };
    nodes * per_node * n
}

/// Solves on a given mesh with all boundary dofs fixed from `data`.
pub fn solve_on_mesh(
    mesh: Arc<Mesh>,
    coeffs: Coefficients<'_>,
    rhs: &RightHandSide,
    data: &WhitneyData,
    tol: f64,
) -> Result<BvpSolution> {
    let (_, n, _) = coeffs.dims();
    if data.g.n() != n || rhs.terms.iter().any(|(_, f)| f.n() != n) {
        return Err(Error::InvalidInput(format!("data must have {n} components")));
    }
    let System { mut matrix, mut load } = assemble(&mesh, coeffs, rhs)?;
    let dim = load.len();
    let mut fixed = vec![false; dim];
    let mut g = vec![0.0; dim];
    for (dof, v) in data.boundary_dofs(&mesh) {
        fixed[dof] = true;
        g[dof] = v;
    }
    matrix.eliminate_columns(&fixed, &g, &mut load);
    for i in 0..dim {
        if fixed[i] {
            matrix.set_identity_row(i);
            load[i] = g[i];
        }
    }
    let symmetric = coeffs.is_symmetric();
    let ilu = Ilu0::new(&matrix)?;
    let mut x = g.clone();
    // Normwise backward error: a plain relative residual cannot reach 1e-10 on fine meshes.
    let op_norm = (0..dim).map(|i| matrix.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let opts = KrylovOptions { tol, max_iter: 20_000.max(dim / 4), op_norm };
    let stats = if symmetric { pcg(&matrix, &ilu, &load, &mut x, opts)? } else { bicgstab(&matrix, &ilu, &load, &mut x, opts)? };
    Ok(BvpSolution { field: DiscreteField::new(mesh, n, x), stats, symmetric, dofs: dim, indicator: None })
}

fn check_resolution(h: f64, eps: f64, kappa: f64) -> Result<()> {
    if h > eps / kappa * (1.0 + 1e-9) {
        return Err(Error::ResolutionTooCoarse { h, eps, kappa });
    }
    Ok(())
}

/// `||u - v||_{H^m}` with `v` on a refinement of `u`'s mesh, integrated on the finer mesh.
pub fn refinement_difference(coarse: &DiscreteField, fine: &DiscreteField) -> f64 {
    let mesh = &fine.mesh;
    let d = mesh.d();
    let m = mesh.m;
    let len = crate::func::jet_len(d, fine.n, m);
    mesh.integrate(|c, xi, x| {
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        fine.jet_in_cell(c, xi, &x[..d], m, &mut a);
        // Points of the fine mesh outside the coarse discrete domain do not contribute.
        let Some((cc, cxi)) = coarse.mesh.locate(&x[..d]) else {
            return 0.0;
        };
        coarse.jet_in_cell(cc, &cxi, &x[..d], m, &mut b);
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum()
    })
    .sqrt()
}

pub fn solve_eps(
    field: &PeriodicCoefficientField,
    eps: f64,
    domain: &GraphDomain,
    rhs: &RightHandSide,
    data: &WhitneyData,
    opts: BvpOptions,
) -> Result<BvpSolution> {
    check_resolution(opts.h, eps, opts.kappa)?;
    field.check_ellipticity(4)?;
    let (_, n, m) = field.dims();
    let mut need = dof_count(domain, opts.h, m, n);
    if opts.indicator {
        need += dof_count(domain, opts.h / 2.0, m, n);
    }
    if need > opts.budget {
        return Err(Error::BudgetExceeded(format!("{need} unknowns exceed the budget of {}", opts.budget)));
    }
    let coeffs = Coefficients::Periodic { field, eps };
    let mesh = Arc::new(build_mesh(domain, opts.h, m)?);
    let mut sol = solve_on_mesh(mesh, coeffs, rhs, data, opts.tol)?;
    if opts.indicator {
        let fine_mesh = Arc::new(build_mesh(domain, opts.h / 2.0, m)?);
        let fine = solve_on_mesh(fine_mesh, coeffs, rhs, data, opts.tol)?;
        sol.indicator = Some(refinement_difference(&sol.field, &fine.field));
    }
    Ok(sol)
}

/// Constant-coefficient problem; `opts.kappa` is ignored.
pub fn solve_homogenized(
    abar: &EffectiveTensor,
    domain: &GraphDomain,
    rhs: &RightHandSide,
    data: &WhitneyData,
    opts: BvpOptions,
) -> Result<BvpSolution> {
    let (_, n, m) = abar.tensor.dims();
    let need = dof_count(domain, opts.h, m, n);
    if need > opts.budget {
        return Err(Error::BudgetExceeded(format!("{need} unknowns exceed the budget of {}", opts.budget)));
    }
    let mesh = Arc::new(build_mesh(domain, opts.h, m)?);
    solve_on_mesh(mesh, Coefficients::Constant(&abar.tensor), rhs, data, opts.tol)
}

/// Reference solve at `h / 4`; the resolution contract is checked against `h` before any work.
pub fn fine_reference(
    field: &PeriodicCoefficientField,
    eps: f64,
    domain: &GraphDomain,
    rhs: &RightHandSide,
    data: &WhitneyData,
    opts: BvpOptions,
) -> Result<BvpSolution> {
    check_resolution(opts.h, eps, opts.kappa)?;
    let fine = BvpOptions { h: opts.h / 4.0, kappa: opts.kappa * 4.0, indicator: false, ..opts };
    solve_eps(field, eps, domain, rhs, data, fine)
}

/// `(sum_{|alpha| <= s} ||D^alpha f||^2_{L^2})^{1/2}` over the mesh, restricted to `pred`.
pub fn sobolev_norm_on<P>(mesh: &Mesh, f: &dyn FieldJet, s: u32, pred: P) -> f64
where
    P: Fn(&[f64]) -> bool + Sync,
{
    let d = mesh.d();
    let len = crate::func::jet_len(d, f.n(), s);
    mesh.integrate(|c, xi, x| {
        if !pred(&x[..d]) {
            return 0.0;
        }
        let mut jet = vec![0.0; len];
        f.jet_in_cell(c, xi, &x[..d], s, &mut jet);
        jet.iter().map(|v| v * v).sum()
    })
    .sqrt()
}

pub fn sobolev_norm(mesh: &Mesh, f: &dyn FieldJet, s: u32) -> f64 {
    sobolev_norm_on(mesh, f, s, |_| true)
}

/// `||u||_{H^m} / (sum_alpha ||f^alpha||_{L^2} + ||G||_{H^m})`, the quantity bounded by the energy estimate.
pub fn energy_ratio(u: &DiscreteField, rhs: &RightHandSide, data: &WhitneyData) -> f64 {
    let mesh = &u.mesh;
    let m = mesh.m;
    let data_norm: f64 =
        rhs.terms.iter().map(|(_, f)| sobolev_norm(mesh, f, 0)).sum::<f64>() + sobolev_norm(mesh, &data.g, m);
    sobolev_norm(mesh, u, m) / data_norm
}

#[cfg(test)]
mod tests;
