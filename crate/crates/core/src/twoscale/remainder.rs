use super::kernel::MollifierKernel;
use super::smooth::{smooth, Extension, SmoothedField, Source};
use crate::bvp::DiscreteField;
use crate::cell::CorrectorSet;
use crate::error::{Error, Result};
use crate::func::FieldJet;
use crate::geometry::CutoffField;
use crate::spectral::TrigInterpolant;
use crate::tensor::{enumerate_multiindices, graded_position, multiindices_up_to, MultiIndex, PeriodicCoefficientField};
use std::sync::Arc;

/// `w_eps = u_eps - u_0 - eps^m sum_gamma chi^gamma(x/eps) S_eps^2(D^gamma u_0) rho_eps`.
pub struct TwoScaleRemainder {
    pub u_eps: DiscreteField,
    pub u0: DiscreteField,
    pub eps: f64,
    m: u32,
    n: usize,
    d: usize,
    /// `chi[g][i * n + j]`.
    chi: Vec<Vec<TrigInterpolant>>,
    /// `S_eps^2(D^gamma u_0)` for each `gamma`.
    smoothed: Vec<SmoothedField>,
    cutoff: CutoffField,
}

pub fn two_scale_remainder(
    field: &PeriodicCoefficientField,
    u_eps: &DiscreteField,
    u0: &DiscreteField,
    chi: &CorrectorSet,
    eps: f64,
    cutoff: &CutoffField,
    kernel: Arc<MollifierKernel>,
) -> Result<TwoScaleRemainder> {
    if chi.adjoint || chi.fingerprint != field.fingerprint(chi.resolution) || field.dims() != (chi.d, chi.n, chi.m) {
        return Err(Error::ProvenanceMismatch(format!(
            "correctors of {} do not belong to {}",
            chi.field_id,
            field.id()
        )));
    }
    if (cutoff.eps - eps).abs() > 1e-15 * eps {
        return Err(Error::ProvenanceMismatch(format!("cutoff built for eps = {}, not {eps}", cutoff.eps)));
    }
    if !Arc::ptr_eq(&u_eps.mesh, &u0.mesh) && !u_eps.same_mesh(u0) {
        return Err(Error::InconsistentMeshes("u_eps and u_0 must share a mesh".into()));
    }
    let (d, n, m) = field.dims();
    if u_eps.n != n || u0.n != n || u_eps.mesh.m != m {
        return Err(Error::InconsistentMeshes("solution shapes do not match the operator".into()));
    }
    let smoothed = enumerate_multiindices(d, m)
        .iter()
        .map(|g| {
            let src = Source::DiscreteDerivative { field: u0.clone(), order: m, slot: graded_position(g), ext: Extension::None };
            smooth(src, eps, true, kernel.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TwoScaleRemainder {
        u_eps: u_eps.clone(),
        u0: u0.clone(),
        eps,
        m,
        n,
        d,
        chi: chi.interpolants(),
        smoothed,
        cutoff: cutoff.clone(),
    })
}

fn multinomial(tau: &MultiIndex, parts: &[&MultiIndex]) -> f64 {
    parts.iter().fold(tau.factorial(), |acc, p| acc / p.factorial())
}

impl TwoScaleRemainder {
    /// Jet of the corrector term `eps^m sum chi S^2 rho`, zero where the cutoff vanishes with its derivatives.
    fn correction(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let (d, n, m) = (self.d, self.n, self.m);
        let idx = multiindices_up_to(d, order);
        out[..idx.len() * n].fill(0.0);
        let mut rho = vec![0.0; idx.len()];
        self.cutoff.jet(x, order, &mut rho);
        if rho.iter().all(|v| *v == 0.0) {
            return;
        }
        let y: Vec<f64> = x.iter().map(|v| v / self.eps).collect();
        let mut chi_jet = vec![0.0; idx.len()];
        let mut s_jet = vec![0.0; idx.len() * n];
        for (g, sf) in self.smoothed.iter().enumerate() {
            sf.jet(x, order, &mut s_jet);
            for i in 0..n {
                for j in 0..n {
                    self.chi[g][i * n + j].eval_derivatives(&y, &idx, &mut chi_jet);
                    for (pt, tau) in idx.iter().enumerate() {
                        let mut acc = 0.0;
                        for (p1, a1) in idx.iter().enumerate() {
                            let Some(rest) = tau.checked_sub(a1) else { continue };
                            for (p2, a2) in idx.iter().enumerate() {
                                let Some(a3) = rest.checked_sub(a2) else { continue };
                                let p3 = graded_position(&a3);
                                let c = multinomial(tau, &[a1, a2, &a3]);
                                acc += c
                                    * chi_jet[p1]
                                    * self.eps.powi(-(a1.order() as i32))
                                    * s_jet[p2 * n + j]
                                    * rho[p3];
                            }
                        }
                        out[pt * n + i] += self.eps.powi(m as i32) * acc;
                    }
                }
            }
        }
    }

    /// Largest `|D^gamma w|`, `|gamma| <= m - 1`, over boundary nodes.
    pub fn boundary_trace_defect(&self) -> f64 {
        let mesh = &self.u_eps.mesh;
        let d = self.d;
        let order = self.m - 1;
        let len = multiindices_up_to(d, order).len() * self.n;
        let mut jet = vec![0.0; len];
        let mut worst = 0.0f64;
        for k in 0..mesh.n_nodes() {
            if mesh.is_boundary(k) {
                let x = mesh.node(k);
                self.jet(&x[..d], order, &mut jet);
                worst = jet.iter().fold(worst, |a, v| a.max(v.abs()));
            }
        }
        worst
    }
}

impl FieldJet for TwoScaleRemainder {
    fn d(&self) -> usize {
        self.d
    }

    fn n(&self) -> usize {
        self.n
    }

    fn max_order(&self) -> u32 {
        self.m
    }

    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let (c, xi) = self.u_eps.mesh.locate(x).unwrap_or_else(|| panic!("point {x:?} lies outside the mesh"));
        self.jet_in_cell(c, &xi, x, order, out);
    }

    fn jet_in_cell(&self, cell: usize, xi: &[f64], x: &[f64], order: u32, out: &mut [f64]) {
        let len = multiindices_up_to(self.d, order).len() * self.n;
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        self.u_eps.jet_in_cell(cell, xi, x, order, &mut a);
        self.u0.jet_in_cell(cell, xi, x, order, &mut b);
        self.correction(x, order, out);
        for k in 0..len {
            out[k] = a[k] - b[k] - out[k];
        }
    }
}
