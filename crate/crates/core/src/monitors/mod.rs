//! Quantitative monitors: excess functionals, rate sweeps, regularity envelopes and ratio checks.

mod envelope;
mod excess;
mod fit;
mod rates;
mod ratios;

pub use envelope::{envelope, envelope_stability, holder_envelope, lipschitz_envelope, EnvelopeOptions, EnvelopeReport, EnvelopeRow, FullScale, Normalization};
pub use excess::{
    dyadic_scales, excess_bracket, excess_h, excess_phi, excess_phi_lambda, excess_scan, Bracket, ExcessParams, ExcessReport, ExcessRow,
    ExcessValue, HValue, PolyField,
};
pub use fit::{compare_models, fit_log_model, fit_loglog_slope, leave_one_out_change, LogModelFit, ModelComparison, SlopeFit};
pub use rates::{rate_sweep, rate_sweep_with, QuantityFit, RateOptions, RateReport, RateRow};
pub use ratios::{
    caccioppoli_ratio, reverse_holder_ratio, reverse_holder_sweep, wmp_monitor, wmp_norm, RatioRow, RatioSweep, WmpReport, WmpRow,
};

use crate::bvp::{solve_eps, BvpOptions, BvpSolution};
use crate::error::Result;
use crate::func::FieldJet;
use crate::geometry::Mesh;
use crate::scenario::Problem;
use crate::twoscale::{norm_on, region_points, NormKind, Region};

/// `max / min` over positive values; `inf` when some value vanishes.
pub fn variation(values: &[f64]) -> f64 {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    if values.is_empty() {
        return 1.0;
    }
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    hi / lo
}

/// `u_eps` at `h = eps / kappa`.
pub fn solve_at(problem: &Problem, eps: f64, kappa: f64, budget: usize) -> Result<BvpSolution> {
    let opts = BvpOptions::new(eps / kappa).with_kappa(kappa).with_budget(budget);
    solve_eps(&problem.field, eps, &problem.domain, &problem.rhs, &problem.data, opts)
}

/// `sum_alpha (avg_D |f^alpha|^p)^{1/p}` over the whole domain.
pub fn source_average(problem: &Problem, mesh: &Mesh, p: f64) -> Result<f64> {
    let pts = region_points(mesh, &Region::All);
    let mut s = 0.0;
    for (_, f) in &problem.rhs.terms {
        s += norm_on(f, mesh, NormKind::Lp { p }, &pts, true)?;
    }
    Ok(s)
}

/// `(avg_D |u|^2)^{1/2}` over the whole domain.
pub fn mean_square(u: &dyn FieldJet, mesh: &Mesh) -> Result<f64> {
    crate::twoscale::norm(u, mesh, NormKind::L2, &Region::All, true)
}
