use super::{solve_at, variation};
use crate::bvp::{DiscreteField, RightHandSide};
use crate::error::{Error, Result};
use crate::func::{jet_len, AnalyticField, FieldJet};
use crate::geometry::Mesh;
use crate::scenario::Problem;
use crate::tensor::multiindices_up_to;
use crate::twoscale::{norm, norm_on, region_points, NormKind, Region};
use serde::{Deserialize, Serialize};

const BUDGET: usize = 4_000_000;

/// One evaluation of a ratio; `ratio` is NaN when the denominator vanishes, with the reason recorded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub r: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
    pub reason: Option<String>,
}

impl RatioRow {
    fn new(r: f64, numerator: f64, denominator: f64) -> Self {
        let scale = numerator.abs().max(denominator.abs());
        if denominator <= 1e-14 * scale || scale == 0.0 {
            let reason = if scale == 0.0 { "0/0: the solution vanishes on the ball" } else { "vanishing denominator" };
            return Self { r, numerator, denominator, ratio: f64::NAN, reason: Some(reason.into()) };
        }
        Self { r, numerator, denominator, ratio: numerator / denominator, reason: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioSweep {
    pub scenario: String,
    pub center: [f64; 2],
    pub p: f64,
    pub eps: Vec<f64>,
    pub rows: Vec<RatioRow>,
    /// `max / min` of the ratios across `eps`.
    pub variation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WmpRow {
    pub eps: f64,
    pub h: f64,
    pub norm: f64,
    /// `sum_alpha ||f^alpha||_{L^p} + ||G||_{W^{m,p}}`.
    pub bracket: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WmpReport {
    pub scenario: String,
    pub p: f64,
    pub rows: Vec<WmpRow>,
    pub variation: f64,
}

fn ball(mesh: &Mesh, x0: [f64; 2], r: f64) -> Region {
    let mut center = x0;
    if mesh.d() == 1 {
        center[1] = 0.0;
    }
    Region::Ball { center, r }
}

fn in_ball(x: [f64; 2], x0: [f64; 2], r: f64, d: usize) -> bool {
    (0..d).map(|k| (x[k] - x0[k]).powi(2)).sum::<f64>() < r * r
}

fn check_homogeneous(mesh: &Mesh, rhs: &RightHandSide, g: &AnalyticField, x0: [f64; 2], r2: f64) -> Result<()> {
    let d = mesh.d();
    let pts = region_points(mesh, &ball(mesh, x0, r2));
    for (_, f) in &rhs.terms {
        if norm_on(f, mesh, NormKind::LInf, &pts, false)? > 1e-12 {
            return Err(Error::NotHomogeneous);
        }
    }
    let idx = multiindices_up_to(d, mesh.m - 1);
    for k in 0..mesh.n_nodes() {
        let x = mesh.node(k);
        if !mesh.is_boundary(k) || !in_ball(x, x0, r2, d) {
            continue;
        }
        if idx.iter().any(|a| g.derivative(a, &x[..d]).iter().any(|v| v.abs() > 1e-12)) {
            return Err(Error::NotHomogeneous);
        }
    }
    Ok(())
}

/// `(avg_{B cap Omega} |nabla^m u|^p)^{1/p} / (avg_{2B cap Omega} |nabla^m u|^2)^{1/2}` at a boundary point.
pub fn reverse_holder_ratio(u: &DiscreteField, rhs: &RightHandSide, g: &AnalyticField, x0: [f64; 2], r: f64, p: f64) -> Result<RatioRow> {
    let mesh = &u.mesh;
    if p < 2.0 {
        return Err(Error::InvalidInput(format!("p = {p} must be at least 2")));
    }
    if mesh.domain.nearest_boundary_point(&x0[..mesh.d()]).0 > 1e-12 {
        return Err(Error::InvalidInput(format!("center {x0:?} is not a boundary point")));
    }
    check_homogeneous(mesh, rhs, g, x0, 2.0 * r)?;
    let m = mesh.m;
    let num = norm(u, mesh, NormKind::GradLp { j: m, p }, &ball(mesh, x0, r), true)?;
    let den = norm(u, mesh, NormKind::GradLp { j: m, p: 2.0 }, &ball(mesh, x0, 2.0 * r), true)?;
    Ok(RatioRow::new(r, num, den))
}

pub fn reverse_holder_sweep(problem: &Problem, x0: [f64; 2], r: f64, p: f64, eps_list: &[f64], kappa: f64) -> Result<RatioSweep> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        let sol = solve_at(problem, eps, kappa, BUDGET)?;
        rows.push(reverse_holder_ratio(&sol.field, &problem.rhs, &problem.data.g, x0, r, p)?);
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let variation = if ratios.iter().any(|v| v.is_nan()) { f64::NAN } else { variation(&ratios) };
    Ok(RatioSweep { scenario: problem.id.clone(), center: x0, p, eps: eps_list.to_vec(), rows, variation })
}

/// `(sum_{|alpha| <= m} ||D^alpha f||_{L^p}^p)^{1/p}` over the whole mesh.
pub fn wmp_norm(f: &dyn FieldJet, mesh: &Mesh, m: u32, p: f64) -> f64 {
    let d = mesh.d();
    let n = f.n();
    let len = jet_len(d, n, m);
    mesh.integrate(|c, xi, x| {
        let mut jet = vec![0.0; len];
        f.jet_in_cell(c, xi, &x[..d], m, &mut jet);
        jet.chunks(n).map(|v| v.iter().map(|t| t * t).sum::<f64>().powf(p / 2.0)).sum()
    })
    .powf(1.0 / p)
}

/// `||u_eps||_{W^{m,p}}` against `sum_alpha ||f^alpha||_{L^p} + ||G||_{W^{m,p}}` over `eps_list`.
pub fn wmp_monitor(problem: &Problem, p: f64, eps_list: &[f64], kappa: f64) -> Result<WmpReport> {
    if p < 2.0 {
        return Err(Error::InvalidInput(format!("p = {p} must be at least 2")));
    }
    if problem.field.vmo().is_none() && !problem.field.is_constant() {
        return Err(Error::MissingRegularityMetadata(format!("{} declares no VMO modulus", problem.id)));
    }
    let m = problem.m();
    let mut rows = Vec::new();
    for &eps in eps_list {
        let sol = solve_at(problem, eps, kappa, BUDGET)?;
        let mesh = &sol.field.mesh;
        let norm_u = wmp_norm(&sol.field, mesh, m, p);
        let bracket = problem.rhs.terms.iter().map(|(_, f)| wmp_norm(f, mesh, 0, p)).sum::<f64>() + wmp_norm(&problem.data.g, mesh, m, p);
        rows.push(WmpRow { eps, h: mesh.h(), norm: norm_u, bracket, ratio: norm_u / bracket });
    }
    let variation = variation(&rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    Ok(WmpReport { scenario: problem.id.clone(), p, rows, variation })
}

/// Ratios `LHS / RHS` of the boundary Caccioppoli inequality with unit constant, one per `j = 0..=m`.
///
/// `LHS = int_{B_r} |nabla^j (u - G)|^2`,
/// `RHS = (R - r)^{-2j} int_{B_R} (|u|^2 + |G|^2) + R^{2m-2j} int_{B_R} |nabla^m G|^2
///      + sum_alpha R^{4m-2j-2|alpha|} int_{B_R} |f^alpha|^2`.
pub fn caccioppoli_ratio(
    u: &DiscreteField,
    rhs: &RightHandSide,
    g: &AnalyticField,
    x0: [f64; 2],
    r: f64,
    big_r: f64,
) -> Result<Vec<RatioRow>> {
    if !(r > 0.0 && r < big_r) {
        return Err(Error::InvalidInput(format!("need 0 < r = {r} < R = {big_r}")));
    }
    let mesh = &u.mesh;
    let m = mesh.m;
    let inner = region_points(mesh, &ball(mesh, x0, r));
    let outer = region_points(mesh, &ball(mesh, x0, big_r));
    let sq = |f: &dyn FieldJet, j: u32, pts: &[(usize, [f64; 2], [f64; 2], f64)]| -> Result<f64> {
        Ok(norm_on(f, mesh, NormKind::GradLp { j, p: 2.0 }, pts, false)?.powi(2))
    };
    let diff = crate::twoscale::Difference { a: u, b: g };
    let zero_order = sq(u, 0, &outer)? + sq(g, 0, &outer)?;
    let top = sq(g, m, &outer)?;
    let mut sources = Vec::new();
    for (alpha, f) in &rhs.terms {
        sources.push((alpha.order(), sq(f, 0, &outer)?));
    }
    let mut rows = Vec::new();
    for j in 0..=m {
        let (mf, jf) = (f64::from(m), f64::from(j));
        let lhs = sq(&diff, j, &inner)?;
        let mut bound = zero_order / (big_r - r).powf(2.0 * jf) + big_r.powf(2.0 * mf - 2.0 * jf) * top;
        for &(a, s) in &sources {
            bound += big_r.powf(4.0 * mf - 2.0 * jf - 2.0 * f64::from(a)) * s;
        }
        rows.push(RatioRow::new(r, lhs, bound));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvp::{energy_ratio, BvpOptions};
    use crate::scenario::find_builtin;

    #[test]
    fn vanishing_solution_gives_nan_with_reason() {
        let p = find_builtin("laminate2d-homogeneous").unwrap().problem().unwrap();
        let mesh = std::sync::Arc::new(crate::geometry::build_mesh(&p.domain, 1.0 / 32.0, 1).unwrap());
        let u = DiscreteField::zeros(mesh, 1);
        let row = reverse_holder_ratio(&u, &p.rhs, &p.data.g, [0.0, 0.0], 0.2, 4.0).unwrap();
        assert!(row.ratio.is_nan());
        assert!(row.reason.unwrap().starts_with("0/0"));
    }

    #[test]
    fn sources_near_the_ball_are_rejected() {
        let p = find_builtin("laminate2d").unwrap().problem().unwrap();
        let sol = solve_at(&p, 0.125, 4.0, BUDGET).unwrap();
        let err = reverse_holder_ratio(&sol.field, &p.rhs, &p.data.g, [0.0, 0.0], 0.2, 4.0).unwrap_err();
        assert!(matches!(err, Error::NotHomogeneous));
    }

    #[test]
    fn nonzero_traces_in_the_double_ball_are_rejected() {
        let p = find_builtin("laminate2d-homogeneous").unwrap().problem().unwrap();
        let sol = solve_at(&p, 0.125, 4.0, BUDGET).unwrap();
        // 2B reaches the lateral sides, where G = x_2 (1 + x_1) does not vanish.
        assert!(matches!(reverse_holder_ratio(&sol.field, &p.rhs, &p.data.g, [0.0, 0.0], 0.3, 4.0), Err(Error::NotHomogeneous)));
    }

    #[test]
    fn constant_coefficient_ratio_is_stable_under_refinement() {
        let mut s = find_builtin("laminate2d-homogeneous").unwrap();
        s.field = crate::scenario::FieldSpec::Builtin { name: "constant".into(), value: Some(1.0) };
        let p = s.problem().unwrap();
        let a = solve_at(&p, 1.0, 16.0, BUDGET).unwrap();
        let b = solve_at(&p, 1.0, 64.0, BUDGET).unwrap();
        let ra = reverse_holder_ratio(&a.field, &p.rhs, &p.data.g, [0.0, 0.0], 0.2, 4.0).unwrap().ratio;
        let rb = reverse_holder_ratio(&b.field, &p.rhs, &p.data.g, [0.0, 0.0], 0.2, 4.0).unwrap().ratio;
        assert!(ra.is_finite() && ra > 0.0);
        assert!((ra / rb - 1.0).abs() < 0.2, "{ra} {rb}");
    }

    #[test]
    fn wmp_norm_at_p2_is_the_energy_ratio() {
        let p = find_builtin("sin1d").unwrap().problem().unwrap();
        let rep = wmp_monitor(&p, 2.0, &[0.125], 16.0).unwrap();
        let sol = crate::bvp::solve_eps(&p.field, 0.125, &p.domain, &p.rhs, &p.data, BvpOptions::new(0.125 / 16.0)).unwrap();
        let e = energy_ratio(&sol.field, &p.rhs, &p.data);
        assert!((rep.rows[0].ratio / e - 1.0).abs() < 0.05, "{} {e}", rep.rows[0].ratio);
    }

    #[test]
    fn constant_coefficients_give_an_eps_independent_wmp_ratio() {
        let p = find_builtin("constant").unwrap().problem().unwrap();
        let rep = wmp_monitor(&p, 4.0, &[0.25, 0.125, 0.0625], 16.0).unwrap();
        assert!(rep.variation < 1.01, "{:?}", rep.rows);
    }

    #[test]
    fn caccioppoli_ratios_stay_bounded_in_eps() {
        let p = find_builtin("sin1d").unwrap().problem().unwrap();
        let mut worst = vec![0.0f64; 2];
        let mut best = vec![f64::INFINITY; 2];
        for k in 3..=6 {
            let sol = solve_at(&p, 2f64.powi(-k), 16.0, BUDGET).unwrap();
            let rows = caccioppoli_ratio(&sol.field, &p.rhs, &p.data.g, [0.0, 0.0], 0.25, 0.5).unwrap();
            for (j, row) in rows.iter().enumerate() {
                worst[j] = worst[j].max(row.ratio);
                best[j] = best[j].min(row.ratio);
            }
        }
        for j in 0..2 {
            assert!(worst[j] / best[j] < 2.0, "{worst:?} {best:?}");
        }
    }
}
