use super::fit::{compare_models, fit_loglog_slope, leave_one_out_change, ModelComparison, SlopeFit};
use crate::bvp::{fine_reference, solve_eps, solve_homogenized, BvpOptions, DiscreteField};
use crate::cell::{effective_tensor, solve_correctors, CellOptions, CorrectorSet};
use crate::error::{Error, Result};
use crate::func::{jet_len, FieldJet};
use crate::geometry::build_cutoff;
use crate::scenario::Problem;
use crate::twoscale::{norm, two_scale_remainder, Difference, MollifierKernel, NormKind, Region};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RateOptions {
    /// Mesh points per `eps`.
    pub kappa: f64,
    pub budget: usize,
    /// Rows whose indicator exceeds this fraction of the error are excluded from the fits.
    pub indicator_fraction: f64,
    /// Also build `w_eps` and measure `||w_eps||_{H^m}`.
    pub remainder: bool,
}

impl RateOptions {
    pub fn new(kappa: f64) -> Self {
        Self { kappa, budget: 4_000_000, indicator_fraction: 0.1, remainder: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateRow {
    pub eps: f64,
    pub h: f64,
    pub dofs: usize,
    /// `||u_eps - u_0||_{H^{m-1}}`.
    pub err_hm1: f64,
    pub err_l2: f64,
    pub w_hm: Option<f64>,
    /// `||u_{eps,h} - u_{eps,h/4}||_{H^{m-1}}`.
    pub indicator: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuantityFit {
    pub quantity: String,
    pub fit: Option<SlopeFit>,
    /// Power law against `C eps ln(1/eps)`, for symmetric coefficients.
    pub comparison: Option<ModelComparison>,
    pub leave_one_out: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub scenario: String,
    pub symmetric: bool,
    pub kappa: f64,
    pub rows: Vec<RateRow>,
    pub fits: Vec<QuantityFit>,
}

impl RateReport {
    pub fn fit(&self, quantity: &str) -> Option<&QuantityFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

/// `||coarse - fine||_{H^s}` integrated on the finer mesh.
fn refinement_gap(coarse: &DiscreteField, fine: &DiscreteField, s: u32) -> f64 {
    let mesh = &fine.mesh;
    let d = mesh.d();
    let len = jet_len(d, fine.n, s);
    mesh.integrate(|c, xi, x| {
        let Some((cc, cxi)) = coarse.mesh.locate(&x[..d]) else {
            return 0.0;
        };
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        fine.jet_in_cell(c, xi, &x[..d], s, &mut a);
        coarse.jet_in_cell(cc, &cxi, &x[..d], s, &mut b);
        a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum()
    })
    .sqrt()
}

fn fit_quantity(name: &str, points: &[(f64, f64)], symmetric: bool, floor: f64) -> QuantityFit {
    let skip = |reason: String| QuantityFit { quantity: name.into(), fit: None, comparison: None, leave_one_out: None, skipped: Some(reason) };
    if points.iter().all(|p| p.1 <= floor) {
        return skip("degenerate zero errors".into());
    }
    if points.len() < 3 {
        return skip(format!("only {} unflagged rows", points.len()));
    }
    match fit_loglog_slope(points) {
        Ok(fit) => QuantityFit {
            quantity: name.into(),
            fit: Some(fit),
            comparison: if symmetric { compare_models(points).ok() } else { None },
            leave_one_out: leave_one_out_change(points).ok(),
            skipped: None,
        },
        Err(e) => skip(e.to_string()),
    }
}

/// Convergence-rate sweep over `eps_list`: `u_eps` and `u_0` on the same mesh, a reference at `h/4`
/// for the discretization indicator, and optionally the two-scale remainder.
pub fn rate_sweep(problem: &Problem, eps_list: &[f64], opts: RateOptions) -> Result<RateReport> {
    let chi = solve_correctors(&problem.field, CellOptions::default())?;
    rate_sweep_with(problem, &chi, eps_list, opts)
}

/// [`rate_sweep`] with correctors supplied by the caller, e.g. from the cache.
pub fn rate_sweep_with(problem: &Problem, chi: &CorrectorSet, eps_list: &[f64], opts: RateOptions) -> Result<RateReport> {
    let field = &problem.field;
    let (_, _, m) = field.dims();
    if chi.adjoint || chi.fingerprint != field.fingerprint(chi.resolution) {
        return Err(Error::ProvenanceMismatch(format!("correctors of {} do not belong to {}", chi.field_id, field.id())));
    }
    let abar = effective_tensor(field, chi)?;
    let kernel = Arc::new(MollifierKernel::new(problem.d()));
    let mut rows = Vec::new();
    for &eps in eps_list {
        let h = eps / opts.kappa;
        let bvp = BvpOptions::new(h).with_kappa(opts.kappa).with_budget(opts.budget);
        let ue = solve_eps(field, eps, &problem.domain, &problem.rhs, &problem.data, bvp)?;
        let u0 = solve_homogenized(&abar, &problem.domain, &problem.rhs, &problem.data, bvp)?;
        let u0 = DiscreteField::new(ue.field.mesh.clone(), u0.field.n, u0.field.dofs);
        if !ue.field.same_mesh(&u0) {
            return Err(Error::InconsistentMeshes("u_eps and u_0 were solved on different meshes".into()));
        }
        let mesh = ue.field.mesh.clone();
        let diff = Difference { a: &ue.field, b: &u0 };
        let err_hm1 = norm(&diff, &mesh, NormKind::Hs { s: m - 1 }, &Region::All, false)?;
        let err_l2 = norm(&diff, &mesh, NormKind::L2, &Region::All, false)?;
        let fine = fine_reference(field, eps, &problem.domain, &problem.rhs, &problem.data, bvp)?;
        let indicator = refinement_gap(&ue.field, &fine.field, m - 1);
        let w_hm = if opts.remainder {
            let cutoff = build_cutoff(&problem.domain, eps, &mesh, opts.kappa)?;
            let w = two_scale_remainder(field, &ue.field, &u0, chi, eps, &cutoff, kernel.clone())?;
            Some(norm(&w, &mesh, NormKind::Hs { s: m }, &Region::All, false)?)
        } else {
            None
        };
        let flagged = indicator > opts.indicator_fraction * err_hm1;
        rows.push(RateRow { eps, h, dofs: ue.dofs, err_hm1, err_l2, w_hm, indicator, flagged });
    }
    let symmetric = field.is_symmetric();
    let u_scale = rows.iter().map(|r| r.err_hm1).fold(0.0, f64::max);
    let floor = 1e-9 * (1.0 + u_scale);
    let kept: Vec<&RateRow> = rows.iter().filter(|r| !r.flagged).collect();
    let pts = |f: &dyn Fn(&RateRow) -> Option<f64>| -> Vec<(f64, f64)> { kept.iter().filter_map(|r| f(r).map(|v| (r.eps, v))).collect() };
    let all_zero = rows.iter().all(|r| r.err_hm1 <= floor);
    let mut fits = Vec::new();
    // With u_eps = u_0 every row fails the indicator test, so degeneracy is decided on all rows.
    if all_zero {
        for q in ["err_hm1", "err_l2", "w_hm"] {
            fits.push(fit_quantity(q, &[], symmetric, floor));
        }
    } else {
        fits.push(fit_quantity("err_hm1", &pts(&|r| Some(r.err_hm1)), symmetric, floor));
        fits.push(fit_quantity("err_l2", &pts(&|r| Some(r.err_l2)), symmetric, floor));
        fits.push(fit_quantity("w_hm", &pts(&|r| r.w_hm), false, floor));
    }
    Ok(RateReport { scenario: problem.id.clone(), symmetric, kappa: opts.kappa, rows, fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::find_builtin;

    #[test]
    fn constant_coefficients_have_degenerate_rates() {
        let p = find_builtin("constant").unwrap().problem().unwrap();
        let rep = rate_sweep(&p, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], RateOptions::new(16.0)).unwrap();
        for row in &rep.rows {
            assert!(row.err_hm1 <= 1e-10 && row.w_hm.unwrap() <= 1e-10, "{row:?}");
        }
        let fit = rep.fit("err_hm1").unwrap();
        assert!(fit.fit.is_none());
        assert_eq!(fit.skipped.as_deref(), Some("degenerate zero errors"));
    }

    #[test]
    fn sin1d_rates_are_first_order() {
        let p = find_builtin("sin1d").unwrap().problem().unwrap();
        let eps: Vec<f64> = (3..=6).map(|k| 2f64.powi(-k)).collect();
        let rep = rate_sweep(&p, &eps, RateOptions::new(64.0)).unwrap();
        assert!(rep.rows.iter().all(|r| !r.flagged), "{:?}", rep.rows);
        let s = rep.fit("err_hm1").unwrap().fit.unwrap().slope;
        assert!((0.8..=1.1).contains(&s), "{s}");
        assert!(rep.fit("err_hm1").unwrap().comparison.is_some());
    }
}
