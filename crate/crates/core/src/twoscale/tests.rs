use super::*;
use crate::bvp::{fine_reference, solve_eps, solve_homogenized, BvpOptions, RightHandSide, WhitneyData};
use crate::cell::{effective_tensor, solve_correctors, CellOptions};
use crate::error::Error;
use crate::tensor::builtin_field;

fn unit_rhs() -> RightHandSide {
    RightHandSide::source(AnalyticField::constant(1, &[1.0]), 2.0)
}

/// Solves `u_eps` and `u_0` on one shared mesh and builds `w_eps`.
fn remainder_for(name: &str, eps: f64, kappa: f64) -> TwoScaleRemainder {
    let field = builtin_field(name, None, 1, 1, None).unwrap();
    let chi = solve_correctors(&field, CellOptions::default()).unwrap();
    let abar = effective_tensor(&field, &chi).unwrap();
    let dom = GraphDomain::interval(1.0);
    let data = WhitneyData::new(AnalyticField::zero(1, 1));
    let opts = BvpOptions::new(eps / kappa).with_kappa(kappa);
    let ue = solve_eps(&field, eps, &dom, &unit_rhs(), &data, opts).unwrap().field;
    let u0 = solve_homogenized(&abar, &dom, &unit_rhs(), &data, opts).unwrap().field;
    let u0 = crate::bvp::DiscreteField::new(ue.mesh.clone(), 1, u0.dofs);
    let cutoff = build_cutoff(&dom, eps, &ue.mesh, kappa).unwrap();
    two_scale_remainder(&field, &ue, &u0, &chi, eps, &cutoff, Arc::new(MollifierKernel::new(1))).unwrap()
}

#[test]
fn constant_coefficients_leave_no_remainder() {
    let w = remainder_for("constant", 1.0 / 16.0, 16.0);
    let h1 = norm(&w, &w.u_eps.mesh, NormKind::Hs { s: 1 }, &Region::All, false).unwrap();
    assert!(h1 < 1e-9, "{h1:e}");
}

#[test]
fn remainder_vanishes_on_the_boundary_and_beats_the_plain_difference() {
    for eps in [1.0 / 16.0, 1.0 / 32.0] {
        let w = remainder_for("sin1d", eps, 16.0);
        assert!(w.boundary_trace_defect() < 1e-9);
        let mesh = w.u_eps.mesh.clone();
        // Away from the layer where the cutoff switches the correction off.
        let inner = Region::Inner { t: 0.25 };
        let h1 = norm(&w, &mesh, NormKind::Hs { s: 1 }, &inner, false).unwrap();
        let plain = Difference { a: &w.u_eps, b: &w.u0 };
        let h1_plain = norm(&plain, &mesh, NormKind::Hs { s: 1 }, &inner, false).unwrap();
        assert!(h1 < 0.3 * h1_plain, "eps={eps}: {h1} vs {h1_plain}");
    }
}

#[test]
fn correctors_of_another_field_are_rejected() {
    let eps = 1.0 / 8.0;
    let field = builtin_field("sin1d", None, 1, 1, None).unwrap();
    let other = builtin_field("constant", None, 1, 1, Some(2.0)).unwrap();
    let chi = solve_correctors(&other, CellOptions::default()).unwrap();
    let dom = GraphDomain::interval(1.0);
    let data = WhitneyData::new(AnalyticField::zero(1, 1));
    let opts = BvpOptions::new(eps / 16.0);
    let ue = fine_reference(&field, eps, &dom, &unit_rhs(), &data, BvpOptions::new(eps / 4.0).with_kappa(4.0)).unwrap().field;
    let _ = opts;
    let cutoff = build_cutoff(&dom, eps, &ue.mesh, 16.0).unwrap();
    let res = two_scale_remainder(&field, &ue, &ue, &chi, eps, &cutoff, Arc::new(MollifierKernel::new(1)));
    assert!(matches!(res, Err(Error::ProvenanceMismatch(_))));
}

#[test]
fn smoothing_ratios_are_scale_stable() {
    let rep = smoothing_lemma_ratios(1, &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 3, 11, 16.0).unwrap();
    assert_eq!(rep.rows.len(), 3 * 3 * 4);
    for row in &rep.rows {
        assert!(row.ratio.is_finite() && row.ratio > 0.0, "{row:?}");
    }
    for (lemma, v) in &rep.variation {
        assert!(*v <= 2.0, "{lemma:?}: {v}");
    }
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
    #[test]
    fn smoothing_stays_within_the_range_of_the_input(
        vals in proptest::collection::vec(-3.0f64..3.0, 65),
        x in 0.2f64..0.8,
        eps in 0.05f64..0.3,
        twice in proptest::bool::ANY,
    ) {
        let mesh = Arc::new(crate::geometry::build_mesh(&GraphDomain::interval(1.0), 1.0 / 64.0, 1).unwrap());
        let u = crate::bvp::DiscreteField::new(mesh, 1, vals.clone());
        let k = Arc::new(MollifierKernel::new(1));
        let s = smooth(Source::Discrete { field: u, ext: Extension::Zero }, eps, twice, k).unwrap();
        let lo = vals.iter().cloned().fold(0.0f64, f64::min);
        let hi = vals.iter().cloned().fold(0.0f64, f64::max);
        let v = s.value(&[x])[0];
        proptest::prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12, "{} not in [{}, {}]", v, lo, hi);
    }
}
