use crate::bvp::{DiscreteField, RightHandSide};
use crate::error::{Error, Result};
use crate::func::{AnalyticField, FieldJet};
use crate::tensor::{multiindices_up_to, project_polynomial, PolynomialElement, RegionSamples};
use crate::twoscale::{gradient_holder_seminorm, norm_on, region_points, Difference, NormKind, Region};
use serde::{Deserialize, Serialize};

/// A polynomial seen as a field with jets of any order.
pub struct PolyField<'a>(pub &'a PolynomialElement);

impl FieldJet for PolyField<'_> {
    fn d(&self) -> usize {
        self.0.d
    }
    fn n(&self) -> usize {
        self.0.n
    }
    fn max_order(&self) -> u32 {
        u32::MAX
    }
    fn jet(&self, x: &[f64], order: u32, out: &mut [f64]) {
        let n = self.0.n;
        for (pos, a) in multiindices_up_to(self.0.d, order).iter().enumerate() {
            out[pos * n..(pos + 1) * n].copy_from_slice(&self.0.derivative(a, x));
        }
    }
}

/// The pieces of an excess bracket, before the `r`-power normalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// `(avg |u - P|^2)^{1/2}`.
    pub l2: f64,
    /// `sum_alpha r^{2m - |alpha|} (avg |f^alpha|^p)^{1/p}`.
    pub data: f64,
    /// `sum_{j <= m} r^j ||nabla^j (G - P)||_inf`.
    pub boundary: f64,
    /// `r^{m + sigma} [nabla^m (G - P)]_{C^{0, sigma}}`, zero when not requested.
    pub holder: f64,
}

impl Bracket {
    pub fn total(&self) -> f64 {
        self.l2 + self.data + self.boundary + self.holder
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcessValue {
    pub r: f64,
    pub value: f64,
    pub bracket: Bracket,
    /// The `L^2` projection used in place of the infimum.
    pub poly: PolynomialElement,
}

/// Evaluates the bracket on `D_r` at the `L^2`-projection of `u` onto polynomials of `degree`.
pub fn excess_bracket(
    u: &DiscreteField,
    rhs: &RightHandSide,
    g: &AnalyticField,
    r: f64,
    degree: u32,
    p: f64,
    sigma: Option<f64>,
) -> Result<(Bracket, PolynomialElement)> {
    let mesh = &u.mesh;
    let d = mesh.d();
    let m = mesh.m;
    let pts = region_points(mesh, &Region::Sub { r });
    if pts.is_empty() {
        return Err(Error::DegenerateRegion(format!("D_{r} contains no quadrature points")));
    }
    let mut samples = RegionSamples::new(d, u.n);
    let mut v = vec![0.0; u.n];
    for (c, xi, x, w) in &pts {
        u.jet_in_cell(*c, xi, &x[..d], 0, &mut v);
        samples.push(&x[..d], *w, &v);
    }
    let poly = project_polynomial(&samples, degree)?;
    let l2 = samples.l2_residual(&poly) / samples.measure().sqrt();
    let mut data = 0.0;
    for (alpha, f) in &rhs.terms {
        let avg = norm_on(f, mesh, NormKind::Lp { p }, &pts, true)?;
        data += r.powi((2 * m - alpha.order()) as i32) * avg;
    }
    let pf = PolyField(&poly);
    let gp = Difference { a: g, b: &pf };
    let mut boundary = 0.0;
    for j in 0..=m {
        boundary += r.powi(j as i32) * norm_on(&gp, mesh, NormKind::GradLInf { j }, &pts, false)?;
    }
    let holder = match sigma {
        Some(s) => r.powf(f64::from(m) + s) * gradient_holder_seminorm(&gp, &pts, d, m, s),
        None => 0.0,
    };
    Ok((Bracket { l2, data, boundary, holder }, poly))
}

fn check_p(d: usize, m: u32, p: f64) -> Result<()> {
    let (d, mm) = (d as f64, f64::from(m));
    let floor = (d / (mm + 1.0)).max(2.0 * d / (d + 2.0 * mm - 2.0)).max(1.0);
    if !(p > floor) {
        return Err(Error::InvalidInput(format!("p = {p} must exceed {floor}")));
    }
    Ok(())
}

/// `Phi_lambda(r)`: Campanato-type excess with the `C^{m-1, lambda}` normalization.
pub fn excess_phi_lambda(u: &DiscreteField, rhs: &RightHandSide, g: &AnalyticField, r: f64, lambda: f64, p: f64) -> Result<ExcessValue> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must lie in (0, 1)")));
    }
    let m = u.mesh.m;
    check_p(u.mesh.d(), m, p)?;
    if r > u.mesh.domain.r * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!("r = {r} exceeds the domain size")));
    }
    let (bracket, poly) = excess_bracket(u, rhs, g, r, m - 1, p, None)?;
    let value = bracket.total() / r.powf(f64::from(m) - 1.0 + lambda);
    Ok(ExcessValue { r, value, bracket, poly })
}

/// `Phi(r)`: the excess over `P_{m-1}` with the Lipschitz normalization `r^{-m}`.
pub fn excess_phi(u: &DiscreteField, rhs: &RightHandSide, g: &AnalyticField, r: f64, q: f64) -> Result<ExcessValue> {
    let m = u.mesh.m;
    let (bracket, poly) = excess_bracket(u, rhs, g, r, m - 1, q, None)?;
    Ok(ExcessValue { r, value: bracket.total() / r.powi(m as i32), bracket, poly })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HValue {
    pub r: f64,
    pub h_excess: f64,
    /// `h(r) = sum_{|alpha| = m} |D^alpha P_{mr}| / alpha!`.
    pub h_top: f64,
    pub bracket: Bracket,
    pub poly: PolynomialElement,
}

/// `H(r)` with its minimizing polynomial `P_{mr}` and `h(r)`.
pub fn excess_h(u: &DiscreteField, rhs: &RightHandSide, g: &AnalyticField, r: f64, q: f64, sigma: f64) -> Result<HValue> {
    let d = u.mesh.d();
    if !(q > d as f64 && q >= 2.0) {
        return Err(Error::InvalidInput(format!("q = {q} must satisfy q > d and q >= 2")));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::InvalidInput(format!("sigma = {sigma} must lie in (0, 1]")));
    }
    let m = u.mesh.m;
    let (bracket, poly) = excess_bracket(u, rhs, g, r, m, q, Some(sigma))?;
    let h_top = poly
        .top_order_coefficients(m)
        .iter()
        .map(|(_, c)| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum();
    Ok(HValue { r, h_excess: bracket.total() / r.powi(m as i32), h_top, bracket, poly })
}

/// Parameters of an excess scan.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExcessParams {
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub sigma: f64,
    /// Admit scales below `eps` (Hölder coefficients only).
    pub full_scale: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcessRow {
    pub r: f64,
    pub phi_lambda: f64,
    pub phi: f64,
    pub h_excess: f64,
    pub h_top: f64,
    /// Coefficients of `P_{mr}` in its local frame.
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExcessReport {
    pub eps: f64,
    pub params: ExcessParams,
    pub rows: Vec<ExcessRow>,
    /// `max Phi_lambda(t) / Phi_lambda(2r)` over `t in {r, 3r/2}`.
    pub doubling_constant: f64,
    /// `max |h(t) - h(s)| / H(2r)` over `t, s in {r, 3r/2, 2r}`.
    pub h_variation_constant: f64,
    /// For each decay factor `delta`: the smallest `C` with
    /// `H(delta r) <= H(r)/2 + C (eps/r)^{1/4} (H(2r) + h(2r))` over the scanned `r`.
    pub decay_constants: Vec<(f64, f64)>,
    /// `min_delta max_r H(delta r) / H(r)`.
    pub best_contraction: f64,
}

/// Dyadic scales `2^{-k}` in `[lo, hi]`, largest first.
pub fn dyadic_scales(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = 2f64.powi(hi.log2().floor() as i32);
    while r >= lo * (1.0 - 1e-12) {
        if r <= hi * (1.0 + 1e-12) {
            out.push(r);
        }
        r /= 2.0;
    }
    out
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Scans `Phi_lambda`, `Phi`, `H` and `h` over dyadic scales between `eps` (or the mesh scale in
/// full-scale mode) and the domain size.
pub fn excess_scan(u: &DiscreteField, rhs: &RightHandSide, g: &AnalyticField, eps: f64, params: ExcessParams) -> Result<ExcessReport> {
    let mesh = &u.mesh;
    let lo = if params.full_scale { 8.0 * mesh.h() } else { eps };
    let scales = dyadic_scales(lo, mesh.domain.r);
    if scales.is_empty() {
        return Err(Error::DegenerateRegion(format!("no dyadic scale in [{lo}, {}]", mesh.domain.r)));
    }
    let mut all: Vec<f64> = scales.clone();
    all.extend(scales.iter().map(|r| 1.5 * r).filter(|r| *r <= mesh.domain.r));
    all.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut rows = Vec::new();
    for &r in &all {
        let pl = excess_phi_lambda(u, rhs, g, r, params.lambda, params.p)?;
        let ph = excess_phi(u, rhs, g, r, params.q)?;
        let h = excess_h(u, rhs, g, r, params.q, params.sigma)?;
        rows.push(ExcessRow {
            r,
            phi_lambda: pl.value,
            phi: ph.value,
            h_excess: h.h_excess,
            h_top: h.h_top,
            coeffs: h.poly.coeffs.clone(),
        });
    }
    let at = |r: f64| rows.iter().find(|row| (row.r - r).abs() <= 1e-12 * r);
    let mut doubling = 0.0f64;
    let mut hvar = 0.0f64;
    for &r in &scales {
        let (Some(two), Some(one)) = (at(2.0 * r), at(r)) else { continue };
        let mid = at(1.5 * r);
        for t in [Some(one), mid].into_iter().flatten() {
            if let Some(q) = ratio(t.phi_lambda, two.phi_lambda) {
                doubling = doubling.max(q);
            }
        }
        let hs: Vec<f64> = [Some(one), mid, Some(two)].into_iter().flatten().map(|row| row.h_top).collect();
        let spread = hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - hs.iter().cloned().fold(f64::INFINITY, f64::min);
        if let Some(q) = ratio(spread, two.h_excess) {
            hvar = hvar.max(q);
        }
    }
    let mut decay_constants = Vec::new();
    let mut best_contraction = f64::INFINITY;
    for delta in [1.0 / 8.0, 1.0 / 16.0] {
        let mut c = 0.0f64;
        let mut contraction = 0.0f64;
        for &r in &scales {
            let (Some(small), Some(one), Some(two)) = (at(delta * r), at(r), at(2.0 * r)) else { continue };
            let excess = (small.h_excess - 0.5 * one.h_excess).max(0.0);
            if let Some(q) = ratio(excess, (eps / r).powf(0.25) * (two.h_excess + two.h_top)) {
                c = c.max(q);
            }
            if let Some(q) = ratio(small.h_excess, one.h_excess) {
                contraction = contraction.max(q);
            }
        }
        decay_constants.push((delta, c));
        best_contraction = best_contraction.min(contraction);
    }
    Ok(ExcessReport {
        eps,
        params,
        rows,
        doubling_constant: doubling,
        h_variation_constant: hvar,
        decay_constants,
        best_contraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::Term;
    use crate::geometry::{build_mesh, GraphDomain};
    use crate::scenario::find_builtin;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn field_on(m: u32, h: f64, f: &AnalyticField) -> DiscreteField {
        let mesh = Arc::new(build_mesh(&GraphDomain::interval(1.0), h, m).unwrap());
        DiscreteField::interpolate(mesh, f)
    }

    #[test]
    fn polynomials_of_lower_degree_have_zero_excess() {
        let p = AnalyticField::constant(1, &[0.75]);
        let u = field_on(1, 1.0 / 32.0, &p);
        let v = excess_phi_lambda(&u, &RightHandSide::zero(), &p, 0.25, 0.5, 4.0).unwrap();
        assert!(v.value.abs() < 1e-12, "{:?}", v.bracket);
    }

    #[test]
    fn top_degree_polynomials_have_zero_h_excess() {
        let p = AnalyticField::scalar(1, vec![Term::monomial(0.3, &[0]), Term::monomial(-1.25, &[1])]);
        let u = field_on(1, 1.0 / 32.0, &p);
        let v = excess_h(&u, &RightHandSide::zero(), &p, 0.5, 2.0, 0.5).unwrap();
        assert!(v.h_excess.abs() < 1e-10);
        assert!((v.h_top - 1.25).abs() < 1e-10);
    }

    #[test]
    fn projection_matches_a_grid_search_infimum() {
        let x = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[1])]);
        let u = field_on(1, 1.0 / 256.0, &x);
        let (r, lambda) = (0.25, 0.5);
        let v = excess_phi_lambda(&u, &RightHandSide::zero(), &x, r, lambda, 4.0).unwrap();
        // Independent evaluation of the bracket over constants c on a fine midpoint grid.
        let k = 4000;
        let xs: Vec<f64> = (0..k).map(|i| r * (i as f64 + 0.5) / k as f64).collect();
        let bracket = |c: f64| {
            let l2 = (xs.iter().map(|t| (t - c).powi(2)).sum::<f64>() / k as f64).sqrt();
            let sup = xs.iter().map(|t| (t - c).abs()).fold(0.0, f64::max);
            l2 + sup + r
        };
        let best = (0..=1000).map(|i| bracket(r * i as f64 / 1000.0)).fold(f64::INFINITY, f64::min);
        let oracle = best / r.powf(lambda);
        assert!((v.value / oracle - 1.0).abs() < 0.05, "{} {oracle}", v.value);
    }

    #[test]
    fn parameter_checks() {
        let p = AnalyticField::constant(1, &[1.0]);
        let u = field_on(1, 1.0 / 16.0, &p);
        let z = RightHandSide::zero();
        assert!(excess_phi_lambda(&u, &z, &p, 0.25, 1.5, 2.0).is_err());
        assert!(excess_phi_lambda(&u, &z, &p, 2.0, 0.5, 2.0).is_err());
        assert!(excess_phi_lambda(&u, &z, &p, 0.25, 0.5, 1.0).is_err());
        assert!(excess_h(&u, &z, &p, 0.25, 1.5, 0.5).is_err());
        assert!(matches!(excess_bracket(&u, &z, &p, 1e-9, 0, 2.0, None), Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn sin1d_scan_stays_above_eps_and_records_constants() {
        let prob = find_builtin("sin1d").unwrap().problem().unwrap();
        let eps = 1.0 / 32.0;
        let sol = super::super::solve_at(&prob, eps, 16.0, 4_000_000).unwrap();
        let params = ExcessParams { lambda: 0.5, p: 4.0, q: 4.0, sigma: 0.5, full_scale: false };
        let rep = excess_scan(&sol.field, &prob.rhs, &prob.data.g, eps, params).unwrap();
        assert!(rep.rows.iter().all(|row| row.r >= eps));
        assert!(rep.doubling_constant.is_finite() && rep.doubling_constant > 0.0);
        assert!(rep.h_variation_constant.is_finite());
        assert_eq!(rep.decay_constants.len(), 2);
        assert!(rep.decay_constants.iter().all(|(_, c)| c.is_finite()));
    }

    #[test]
    fn dyadic_scales_cover_the_range() {
        assert_eq!(dyadic_scales(0.125, 1.0), vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(dyadic_scales(0.1, 0.3), vec![0.25, 0.125]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn adding_a_lower_degree_polynomial_leaves_phi_lambda_unchanged(a in -2.0f64..2.0, b in -2.0f64..2.0, r in 0.1f64..1.0) {
            let base = AnalyticField::scalar(1, vec![Term::sine(1.0, 1, 0, 3.0), Term::monomial(0.5, &[3])]);
            let shifted = AnalyticField::scalar(
                1,
                vec![Term::sine(1.0, 1, 0, 3.0), Term::monomial(0.5, &[3]), Term::monomial(a, &[0]), Term::monomial(b, &[1])],
            );
            let z = RightHandSide::zero();
            let u = field_on(2, 1.0 / 32.0, &base);
            let v = field_on(2, 1.0 / 32.0, &shifted);
            let x = excess_phi_lambda(&u, &z, &base, r, 0.5, 2.0).unwrap().value;
            let y = excess_phi_lambda(&v, &z, &shifted, r, 0.5, 2.0).unwrap().value;
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{} {}", x, y);
        }
    }
}
