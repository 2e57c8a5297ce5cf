use super::*;
use crate::cell::{effective_tensor, solve_correctors, CellOptions};
use crate::func::Term;
use crate::geometry::Psi;
use crate::quadrature::composite;
use crate::tensor::builtin_field;
use rand::{Rng, SeedableRng};

fn sin1d() -> PeriodicCoefficientField {
    builtin_field("sin1d", None, 1, 1, None).unwrap()
}

fn l2_error(u: &DiscreteField, exact: impl Fn(f64) -> f64 + Sync) -> f64 {
    u.mesh
        .integrate(|c, xi, x| {
            let mut v = [0.0];
            u.jet_in_cell(c, xi, &x[..1], 0, &mut v);
            (v[0] - exact(x[0])).powi(2)
        })
        .sqrt()
}

#[test]
fn constant_coefficients_reproduce_low_order_data() {
    let a = CoefficientTensor::scaled_identity(2, 1, 1, 1.7);
    let g = AnalyticField::scalar(2, vec![Term::monomial(0.3, &[]), Term::monomial(2.0, &[1, 0]), Term::monomial(-1.0, &[0, 1])]);
    let data = WhitneyData::new(g.clone());
    for psi in [Psi::Flat, Psi::Sine { amp: 0.1, freq: 2.0 }] {
        let dom = GraphDomain::graph(0.5, psi, None).unwrap();
        let mesh = Arc::new(build_mesh(&dom, 1.0 / 16.0, 1).unwrap());
        let sol = solve_on_mesh(mesh.clone(), Coefficients::Constant(&a), &RightHandSide::zero(), &data, 1e-12).unwrap();
        for k in 0..mesh.n_nodes() {
            let x = mesh.node(k);
            assert!((sol.field.dofs[k] - g.value(&x)[0]).abs() < 1e-9);
        }
    }
}

#[test]
fn oscillating_1d_matches_closed_form() {
    // -(a(x/eps) u')' = 1 on (0, 1), u(0) = u(1) = 0, so a(x/eps) u' = c - x.
    let field = sin1d();
    let eps = 1.0 / 8.0;
    let a = |t: f64| 2.0 + (2.0 * std::f64::consts::PI * t / eps).sin();
    let rule = composite(0.0, 1.0, 4096, 8);
    let (i0, i1): (f64, f64) = rule.0.iter().zip(&rule.1).fold((0.0, 0.0), |(s0, s1), (t, w)| (s0 + w / a(*t), s1 + w * t / a(*t)));
    let c = i1 / i0;
    let exact = |x: f64| -> f64 { 
        let (ts, ws) = composite(0.0, x, 64, 8);
        ts.iter().zip(&ws).map(|(t, w)| w * (c - t) / a(*t)).sum()
    };
    let dom = GraphDomain::interval(1.0);
    let rhs = RightHandSide::source(AnalyticField::constant(1, &[1.0]), 2.0);
    let data = WhitneyData::new(AnalyticField::zero(1, 1));
    let sol = solve_eps(&field, eps, &dom, &rhs, &data, BvpOptions::new(eps / 512.0)).unwrap();
    assert!(sol.symmetric);
    let err = l2_error(&sol.field, exact);
    assert!(err < 1e-6, "L2 error {err:e}");
}

#[test]
fn homogenized_1d_solution_is_the_parabola() {
    let field = sin1d();
    let chi = solve_correctors(&field, CellOptions::default()).unwrap();
    let abar = effective_tensor(&field, &chi).unwrap();
    let dom = GraphDomain::interval(1.0);
    let rhs = RightHandSide::source(AnalyticField::constant(1, &[1.0]), 2.0);
    let data = WhitneyData::new(AnalyticField::zero(1, 1));
    let sol = solve_homogenized(&abar, &dom, &rhs, &data, BvpOptions::new(1.0 / 256.0)).unwrap();
    let s3 = 3f64.sqrt();
    let err = l2_error(&sol.field, |x| (x - x * x) / (2.0 * s3));
    assert!(err < 1e-5, "L2 error {err:e}");
}

#[test]
fn hermite_solver_reproduces_cubic_data() {
    let a = CoefficientTensor::scaled_identity(1, 1, 2, 1.0);
    let abar = EffectiveTensor { tensor: a, field_id: "unit".into(), fingerprint: String::new(), corrector_residual: 0.0 };
    let g = AnalyticField::scalar(1, vec![Term::monomial(1.0, &[3])]);
    let sol = solve_homogenized(&abar, &GraphDomain::interval(1.0), &RightHandSide::zero(), &WhitneyData::new(g.clone()), BvpOptions::new(1.0 / 32.0))
        .unwrap();
    let mut jet = [0.0; 3];
    for x in [0.13, 0.5, 0.77] {
        sol.field.jet(&[x], 2, &mut jet);
        assert!((jet[0] - x.powi(3)).abs() < 1e-9);
        assert!((jet[2] - 6.0 * x).abs() < 1e-7);
    }
}

#[test]
fn homogenized_2d_reproduces_affine_data() {
    let field = builtin_field("laminate2d", None, 1, 1, None).unwrap();
    let chi = solve_correctors(&field, CellOptions::default()).unwrap();
    let abar = effective_tensor(&field, &chi).unwrap();
    let dom = GraphDomain::graph(0.5, Psi::Flat, None).unwrap();
    let g = AnalyticField::scalar(2, vec![Term::monomial(1.0, &[1, 0])]);
    let sol = solve_homogenized(&abar, &dom, &RightHandSide::zero(), &WhitneyData::new(g), BvpOptions::new(1.0 / 16.0)).unwrap();
    for k in 0..sol.field.mesh.n_nodes() {
        assert!((sol.field.dofs[k] - sol.field.mesh.node(k)[0]).abs() < 1e-9);
    }
}

#[test]
fn galerkin_residual_is_orthogonal_to_interior_fields() {
    let field = builtin_field("skew-laminate2d", None, 1, 1, None).unwrap();
    let dom = GraphDomain::graph(0.5, Psi::Flat, None).unwrap();
    let eps = 0.25;
    let rhs = RightHandSide::source(AnalyticField::scalar(2, vec![Term::sine(1.0, 2, 0, 3.0)]), 2.0);
    let data = WhitneyData::new(AnalyticField::scalar(2, vec![Term::monomial(1.0, &[1, 1])]));
    let sol = solve_eps(&field, eps, &dom, &rhs, &data, BvpOptions::new(eps / 16.0)).unwrap();
    assert!(!sol.symmetric);
    let mesh = sol.field.mesh.clone();
    let System { matrix, load } = assemble(&mesh, Coefficients::Periodic { field: &field, eps }, &rhs).unwrap();
    let mut r = vec![0.0; load.len()];
    matrix.spmv(&sol.field.dofs, &mut r);
    let scale = load.iter().map(|v| v * v).sum::<f64>().sqrt() + 1.0;
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let v: Vec<f64> =
            (0..load.len()).map(|k| if mesh.is_boundary(k) { 0.0 } else { rng.random_range(-1.0..1.0) }).collect();
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res: f64 = v.iter().zip(r.iter().zip(&load)).map(|(vi, (ri, fi))| vi * (ri - fi)).sum();
        assert!(res.abs() / (scale * vn) <= 1e-9, "{res:e}");
    }
    assert!(data.trace_defect(&sol.field) < 1e-12);
}

#[test]
fn refinement_differences_shrink_at_first_order() {
    let field = sin1d();
    let eps = 0.25;
    let dom = GraphDomain::interval(1.0);
    let rhs = RightHandSide::source(AnalyticField::constant(1, &[1.0]), 2.0);
    let data = WhitneyData::new(AnalyticField::scalar(1, vec![Term::monomial(0.5, &[1])]));
    let solve = |h: f64| solve_eps(&field, eps, &dom, &rhs, &data, BvpOptions::new(h)).unwrap().field;
    let (u1, u2, u3) = (solve(eps / 16.0), solve(eps / 32.0), solve(eps / 64.0));
    let ratio = refinement_difference(&u1, &u2) / refinement_difference(&u2, &u3);
    assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    let with = solve_eps(&field, eps, &dom, &rhs, &data, BvpOptions::new(eps / 16.0).with_indicator(true)).unwrap();
    assert!((with.indicator.unwrap() - refinement_difference(&u1, &u2)).abs() < 1e-12);
}

#[test]
fn hermite_traces_match_the_data() {
    let field = builtin_field("laminate2d", None, 1, 2, None).unwrap();
    let dom = GraphDomain::graph(0.5, Psi::Flat, None).unwrap();
    let g = AnalyticField::scalar(2, vec![Term::sine(1.0, 2, 0, 2.0), Term::monomial(0.5, &[0, 2])]);
    let data = WhitneyData::new(g);
    let sol = solve_eps(&field, 0.25, &dom, &RightHandSide::zero(), &data, BvpOptions::new(1.0 / 32.0).with_kappa(8.0)).unwrap();
    assert!(data.trace_defect(&sol.field) < 1e-10);
    let ratio = energy_ratio(&sol.field, &RightHandSide::zero(), &data);
    assert!(ratio.is_finite() && ratio > 0.0);
}

#[test]
fn contract_violations_are_reported_before_solving() {
    let field = sin1d();
    let dom = GraphDomain::interval(1.0);
    let rhs = RightHandSide::zero();
    let data = WhitneyData::new(AnalyticField::zero(1, 1));
    let coarse = BvpOptions::new(0.01);
    assert!(matches!(solve_eps(&field, 0.05, &dom, &rhs, &data, coarse), Err(Error::ResolutionTooCoarse { .. })));
    assert!(matches!(fine_reference(&field, 0.05, &dom, &rhs, &data, coarse), Err(Error::ResolutionTooCoarse { .. })));
    let tight = BvpOptions::new(0.05 / 16.0).with_budget(100);
    assert!(matches!(fine_reference(&field, 0.05, &dom, &rhs, &data, tight), Err(Error::BudgetExceeded(_))));
    let wrong = WhitneyData::new(AnalyticField::zero(1, 2));
    assert!(matches!(solve_eps(&field, 0.05, &dom, &rhs, &wrong, BvpOptions::new(0.05 / 16.0)), Err(Error::InvalidInput(_))));
}
