use super::fit::fit_loglog_slope;
use super::{mean_square, solve_at, source_average, variation};
use crate::bvp::{fine_reference, BvpOptions, DiscreteField};
use crate::error::{Error, Result};
use crate::geometry::Regularity;
use crate::scenario::Problem;
use crate::twoscale::{norm, NormKind, Region};
use serde::{Deserialize, Serialize};

/// Which power of `r` multiplies the averaged gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Normalization {
    /// `r^{1 - lambda}`, the `C^{m-1, lambda}` envelope.
    Holder { lambda: f64 },
    /// No power: the `C^{m-1, 1}` envelope.
    Lipschitz,
}

impl Normalization {
    fn factor(&self, r: f64) -> f64 {
        match *self {
            Normalization::Holder { lambda } => r.powf(1.0 - lambda),
            Normalization::Lipschitz => 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    pub kappa: f64,
    pub budget: usize,
    pub r_grid: Vec<f64>,
    pub normalization: Normalization,
    /// The normalization of the theorem being checked.
    pub target: Normalization,
    /// Integrability of the source data (`p` or `q`).
    pub exponent: f64,
    /// Hölder exponent of `nabla^m G` in the Lipschitz data bracket.
    pub sigma: f64,
    pub full_scale: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub r: f64,
    /// `(avg_{D_r} |nabla^m u|^2)^{1/2}`.
    pub average: f64,
    pub normalized: f64,
    /// Computed on the reference solve below `eps`.
    pub below_eps: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FullScale {
    pub h: f64,
    /// `||nabla^m u||_{L^inf(D_{R/4})}` on the reference solve.
    pub linf: f64,
    pub linf_over_bracket: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub scenario: String,
    pub eps: f64,
    pub h: f64,
    pub normalization: Normalization,
    pub target: Normalization,
    pub rows: Vec<EnvelopeRow>,
    pub sup: f64,
    /// Data bracket of the target estimate.
    pub bracket: f64,
    /// `sup / bracket`.
    pub constant: f64,
    /// Log-log slope of the normalized rows against `r`; positive means decay towards small `r`.
    pub decay_slope: Option<f64>,
    pub normalization_mismatch: bool,
    pub full_scale: Option<FullScale>,
}

fn gradient_average(u: &DiscreteField, r: f64) -> Result<f64> {
    let m = u.mesh.m;
    norm(u, &u.mesh, NormKind::GradLp { j: m, p: 2.0 }, &Region::Sub { r }, true)
}

fn data_bracket(problem: &Problem, u: &DiscreteField, opts: &EnvelopeOptions) -> Result<f64> {
    let mesh = &u.mesh;
    let m = mesh.m;
    let g_norm = match opts.target {
        Normalization::Holder { .. } => NormKind::CLipData { m },
        Normalization::Lipschitz => NormKind::CHolderData { m, sigma: opts.sigma },
    };
    Ok(mean_square(u, mesh)? + source_average(problem, mesh, opts.exponent)? + norm(&problem.data.g, mesh, g_norm, &Region::All, false)?)
}

/// Averaged `m`-th gradients over `D_r`, normalized, against the data bracket of the target estimate.
pub fn envelope(problem: &Problem, eps: f64, opts: &EnvelopeOptions) -> Result<EnvelopeReport> {
    if let Normalization::Holder { lambda } = opts.normalization {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidInput(format!("lambda = {lambda} must lie in (0, 1)")));
        }
    }
    if opts.r_grid.iter().any(|r| *r < eps * (1.0 - 1e-12)) {
        return Err(Error::InvalidInput(format!("every radius must be at least eps = {eps}")));
    }
    if opts.target == Normalization::Lipschitz {
        match &problem.domain.regularity {
            Some(Regularity::C1Theta { theta, .. }) if opts.sigma > 0.0 && opts.sigma <= *theta => {}
            Some(Regularity::C1Theta { theta, .. }) => {
                return Err(Error::InvalidInput(format!("sigma = {} must lie in (0, theta = {theta}]", opts.sigma)));
            }
            _ => return Err(Error::MissingRegularityMetadata(format!("{} declares no C^(1,theta) boundary", problem.id))),
        }
    }
    if opts.full_scale && problem.field.holder().is_none() && !problem.field.is_constant() {
        return Err(Error::MissingRegularityMetadata(format!("{} declares no Hölder modulus for A", problem.id)));
    }
    let sol = solve_at(problem, eps, opts.kappa, opts.budget)?;
    let u = &sol.field;
    let mut rows = Vec::new();
    for &r in &opts.r_grid {
        let average = gradient_average(u, r)?;
        rows.push(EnvelopeRow { r, average, normalized: opts.normalization.factor(r) * average, below_eps: false });
    }
    let bracket = data_bracket(problem, u, opts)?;
    let full_scale = if opts.full_scale {
        let bvp = BvpOptions::new(eps / opts.kappa).with_kappa(opts.kappa).with_budget(opts.budget);
        let fine = fine_reference(&problem.field, eps, &problem.domain, &problem.rhs, &problem.data, bvp)?;
        let v = &fine.field;
        for r in [eps / 2.0, eps / 4.0] {
            let average = gradient_average(v, r)?;
            rows.push(EnvelopeRow { r, average, normalized: opts.normalization.factor(r) * average, below_eps: true });
        }
        let linf = norm(v, &v.mesh, NormKind::GradLInf { j: v.mesh.m }, &Region::Sub { r: problem.domain.r / 4.0 }, false)?;
        Some(FullScale { h: v.mesh.h(), linf, linf_over_bracket: linf / bracket })
    } else {
        None
    };
    let sup = rows.iter().map(|r| r.normalized).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.normalized > 0.0).map(|r| (r.r, r.normalized)).collect();
    let decay_slope = fit_loglog_slope(&pts).ok().map(|f| f.slope);
    Ok(EnvelopeReport {
        scenario: problem.id.clone(),
        eps,
        h: u.mesh.h(),
        normalization: opts.normalization,
        target: opts.target,
        rows,
        sup,
        bracket,
        constant: if bracket > 0.0 { sup / bracket } else { f64::NAN },
        decay_slope,
        normalization_mismatch: opts.normalization != opts.target,
        full_scale,
    })
}

pub fn holder_envelope(problem: &Problem, lambda: f64, r_grid: &[f64], eps: f64, kappa: f64, p: f64) -> Result<EnvelopeReport> {
    let (d, m) = (problem.d() as f64, f64::from(problem.m()));
    let cap = (m + 1.0 - d / p).min(1.0);
    if !(lambda > 0.0 && lambda < cap) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must lie in (0, {cap})")));
    }
    let norm = Normalization::Holder { lambda };
    let opts = EnvelopeOptions {
        kappa,
        budget: 4_000_000,
        r_grid: r_grid.to_vec(),
        normalization: norm,
        target: norm,
        exponent: p,
        sigma: 1.0,
        full_scale: false,
    };
    envelope(problem, eps, &opts)
}

pub fn lipschitz_envelope(
    problem: &Problem,
    r_grid: &[f64],
    eps: f64,
    kappa: f64,
    q: f64,
    sigma: f64,
    full_scale: bool,
) -> Result<EnvelopeReport> {
    let opts = EnvelopeOptions {
        kappa,
        budget: 4_000_000,
        r_grid: r_grid.to_vec(),
        normalization: Normalization::Lipschitz,
        target: Normalization::Lipschitz,
        exponent: q,
        sigma,
        full_scale,
    };
    envelope(problem, eps, &opts)
}

/// Largest `max / min` of the envelope constants across reports; passes at `<= 2`.
pub fn envelope_stability(reports: &[EnvelopeReport]) -> (f64, bool) {
    let v = variation(&reports.iter().map(|r| r.constant).collect::<Vec<_>>());
    (v, v <= 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{RightHandSide, WhitneyData};
    use crate::func::{AnalyticField, Term};
    use crate::geometry::GraphDomain;
    use crate::scenario::find_builtin;
    use crate::tensor::builtin_field;

    #[test]
    fn affine_solutions_of_order_one_have_constant_rows() {
        // Constant A, m = 2, G cubic: the solution is G itself and u'' is affine, so the
        // Lipschitz rows are (avg_{(0,r)} |6x|^2)^{1/2} = 2 sqrt(3) r. With G = x^2 rows are constant.
        let field = builtin_field("constant", Some(1), 1, 2, Some(1.0)).unwrap();
        let g = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[2]), Term::monomial(-0.5, &[1])]);
        let problem = Problem {
            id: "quadratic".into(),
            field,
            domain: GraphDomain::interval(1.0),
            data: WhitneyData::new(g),
            rhs: RightHandSide::zero(),
        };
        let rep = lipschitz_envelope(&problem, &[0.5, 0.25, 0.125], 0.0625, 8.0, 4.0, 0.5, true).unwrap();
        for row in &rep.rows {
            assert!((row.normalized - 2.0).abs() < 0.02, "{row:?}");
        }
        assert!(rep.full_scale.unwrap().linf > 1.99);
    }

    #[test]
    fn polynomial_solutions_of_low_degree_give_zero_rows() {
        let field = builtin_field("sin1d", None, 1, 1, None).unwrap();
        let problem = Problem {
            id: "zero".into(),
            field,
            domain: GraphDomain::interval(1.0),
            data: WhitneyData::new(AnalyticField::constant(1, &[0.7])),
            rhs: RightHandSide::zero(),
        };
        let rep = holder_envelope(&problem, 0.5, &[0.5, 0.25], 0.125, 16.0, 4.0).unwrap();
        assert!(rep.rows.iter().all(|r| r.normalized.abs() < 1e-9));
    }

    #[test]
    fn lipschitz_envelope_needs_c1theta_metadata() {
        let p = find_builtin("sine-graph").unwrap().problem().unwrap();
        assert!(matches!(lipschitz_envelope(&p, &[0.25], 0.125, 8.0, 4.0, 0.5, false), Err(Error::MissingRegularityMetadata(_))));
    }

    #[test]
    fn wrong_normalization_is_flagged_and_decays() {
        let p = find_builtin("sin1d").unwrap().problem().unwrap();
        let grid: Vec<f64> = (1..=5).map(|k| 2f64.powi(-k)).collect();
        let mut opts = EnvelopeOptions {
            kappa: 32.0,
            budget: 4_000_000,
            r_grid: grid,
            normalization: Normalization::Lipschitz,
            target: Normalization::Lipschitz,
            exponent: 4.0,
            sigma: 0.5,
            full_scale: false,
        };
        let right = envelope(&p, 1.0 / 32.0, &opts).unwrap();
        opts.normalization = Normalization::Holder { lambda: 0.5 };
        let wrong = envelope(&p, 1.0 / 32.0, &opts).unwrap();
        assert!(!right.normalization_mismatch && wrong.normalization_mismatch);
        assert!(wrong.decay_slope.unwrap() > right.decay_slope.unwrap() + 0.4);
    }
}
