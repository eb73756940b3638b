use std::f64::consts::{PI, SQRT_2};

use hamflow_core::comparison::*;
use hamflow_core::flow::FlowOptions;
use hamflow_core::hamiltonians::*;
use hamflow_core::jets::{sum, ScalarField};
use hamflow_core::Error;
use nalgebra::DMatrix;

fn half_square() -> ScalarField {
    ScalarField::new(2, |x| sum(x.iter().map(|v| v * v).collect::<Vec<_>>().iter()) * 0.5)
}

fn wavy() -> ScalarField {
    ScalarField::new(2, |x| (&x[0] * 1.3).sin() + &x[0] * &x[1] * 0.4 + (&x[1] * 0.7).cos())
}

fn mech() -> ChartHamiltonian {
    mechanical(CoMetric::euclidean(2), Potential::Quadratic(vec![1.0, 0.0])).unwrap()
}

fn bumpy_weight() -> WeightField {
    WeightField::new(ScalarField::new(2, |x| (&x[0] * 0.8).cos() * 0.3 + &x[1] * &x[1] * 0.2))
}

#[test]
fn euclidean_transport_of_a_paraboloid() {
    let tr = hj_transport(&euclidean(2), &WeightField::lebesgue(2), &half_square(), &[0.4, -0.3], 1.0, &FlowOptions::default()).unwrap();
    for s in &tr.states {
        let want = DMatrix::<f64>::identity(2, 2) / (1.0 + s.t);
        assert!((&s.hess - want).amax() <= 1e-10, "t = {}", s.t);
        assert!((s.trace_lap - 2.0 / (1.0 + s.t)).abs() <= 1e-10);
    }
    assert!((tr.states.last().unwrap().t - 1.0).abs() < 1e-12);
}

#[test]
fn linear_function_has_zero_hessian_along_flat_flow() {
    let u = ScalarField::new(2, |x| &x[0] * 0.6 - &x[1] * 0.8);
    let tr = hj_transport(&euclidean(2), &WeightField::lebesgue(2), &u, &[0.0, 0.0], 2.0, &FlowOptions::default()).unwrap();
    assert!(tr.states.iter().all(|s| s.hess.amax() <= 1e-12));
}

#[test]
fn riccati_residuals_vanish() {
    let opts = FlowOptions::default();
    let cases = [
        (mech(), WeightField::gaussian(2), [0.3, -0.2]),
        (sphere_chart(), bumpy_weight(), [0.2, 0.4]),
        (p_homogeneous(3.0, CoMetric::Sphere).unwrap(), WeightField::gaussian(2), [0.2, 0.4]),
    ];
    for (h, w, x) in &cases {
        let r = riccati_residual(h, w, &wavy(), x, 0.4, 8, &opts).unwrap();
        assert!(r.matrix <= 1e-6 && r.trace <= 1e-6, "{}: {r:?}", h.name());
        assert!(r.evolution_gap <= 1e-4, "{}: {r:?}", h.name());
    }
}

#[test]
fn bochner_identity_and_dimensional_slack() {
    let opts = FlowOptions::default();
    let cases = [
        (mech(), WeightField::gaussian(2), [0.3, -0.2]),
        (sphere_chart(), bumpy_weight(), [0.2, 0.4]),
        (p_homogeneous(3.0, CoMetric::Sphere).unwrap(), WeightField::gaussian(2), [0.2, 0.4]),
        (randers(DMatrix::identity(2, 2), vec![0.2, -0.1]).unwrap(), bumpy_weight(), [-0.5, 0.1]),
    ];
    for (h, w, x) in &cases {
        let rep = bochner_residual(h, w, &wavy(), x, &[2.0, 3.0, 4.0, 1e6], &opts).unwrap();
        assert!(rep.defect <= 1e-8 * (1.0 + rep.rhs.abs()), "{}: {rep:?}", h.name());
        for (n, slack) in &rep.slack {
            assert!(*slack >= -1e-8, "{}: N = {n}, slack {slack}", h.name());
        }
    }
}

#[test]
fn bochner_flat_example() {
    let rep =
        bochner_residual(&euclidean(2), &WeightField::lebesgue(2), &half_square(), &[0.5, 0.1], &[2.0], &FlowOptions::default()).unwrap();
    assert!(rep.lhs.abs() <= 1e-12 || (rep.lhs - 2.0).abs() <= 1e-10);
    assert!((rep.hess_hs2 - 2.0).abs() <= 1e-12);
    assert!(rep.ric_inf.abs() <= 1e-7);
    assert!((rep.laplacian - 2.0).abs() <= 1e-12);
    assert!(rep.slack[1].1.abs() <= 1e-7);
    let err =
        bochner_residual(&euclidean(2), &WeightField::lebesgue(2), &half_square(), &[0.0, 0.0], &[], &FlowOptions::default()).unwrap_err();
    assert_eq!(err, Error::HessianCritical);
}

#[test]
fn model_distortion_examples() {
    assert_eq!(s_kn(0.0, 3.0, 0.7).unwrap(), 0.7);
    assert!((s_kn(1.0, 1.0, PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((s_kn(-1.0, 1.0, 1.0).unwrap() - 1f64.sinh()).abs() < 1e-15);
    assert!((s_kn(2.0, 2.0, 0.3).unwrap() - 0.3f64.sin()).abs() < 1e-15);
    assert_eq!(s_kn(1.0, 1.0, PI), Err(Error::PastFocalTime));
    assert_eq!(comparison_bound(1.0, 2.0, 2.0 * PI), Err(Error::PastFocalTime));
    assert!(s_kn(1.0, 0.0, 0.5).is_err());
    assert!(s_kn(1.0, 1.0, -0.5).is_err());
    assert!((comparison_bound(0.0, 3.0, 0.5).unwrap() - 6.0).abs() < 1e-14);
    let t = 0.8;
    assert!((comparison_bound(2.0, 2.0, t).unwrap() - 2.0 / t.tan()).abs() < 1e-13);
    assert!((comparison_bound(-3.0, 3.0, t).unwrap() - 3.0 / t.tanh()).abs() < 1e-13);
    // the small-t continuation is smooth across its switch
    let c = comparison_bound(1.0, 1.0, 1e-2).unwrap();
    assert!((c - 1.0 / 1e-2f64.tan()).abs() < 1e-10);
}

#[test]
fn model_spaces_attain_the_bound() {
    for (k, n) in [(1.0, 2usize), (0.0, 2), (-1.0, 3)] {
        let big_n = n as f64;
        let c = k / big_n;
        let t_end = if k > 0.0 { 0.9 * PI / c.sqrt() } else { 3.0 };
        let setup = ComparisonSetup::new(n, k, big_n, t_end);
        let rep = laplacian_comparison_check(&setup, |_| DMatrix::identity(n, n) * c, |_| (0.0, 0.0)).unwrap();
        assert!(rep.max_abs_gap <= 1e-6, "K = {k}, N = {n}: {}", rep.max_abs_gap);
        assert!(rep.hypothesis_min.abs() <= 1e-12);
        assert_eq!(rep.focal_time, None);
    }
}

#[test]
fn flat_radial_distance() {
    let mut setup = ComparisonSetup::new(3, 0.0, 2.0, 2.0);
    setup.seed_rank = 2;
    let rep = laplacian_comparison_check(&setup, |_| DMatrix::zeros(3, 3), |_| (0.0, 0.0)).unwrap();
    for (t, l) in rep.times.iter().zip(&rep.laplacian) {
        assert!((l - 2.0 / t).abs() <= 1e-9 * (1.0 + 2.0 / t));
    }
    assert!(rep.max_abs_gap <= 1e-9);
    let mcp = mcp_ratio_check(&rep.varsigma, None, 0.0, 2.0, &rep.times).unwrap();
    assert!(mcp.non_increasing && mcp.derivative_bound_holds && mcp.equivalent, "{mcp:?}");
}

#[test]
fn sphere_satisfies_comparison() {
    let opts = FlowOptions::default();
    let t_end = 0.9 * PI * SQRT_2;
    let state = CotangentState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
    let curve = CurvatureCurve::along(&sphere_chart(), &WeightField::lebesgue(2), &state, t_end, &opts).unwrap();
    let setup = ComparisonSetup::new(2, 1.0, 2.0, t_end);
    let rep = laplacian_comparison_check(&setup, |t| curve.r_at(t), |t| curve.psi_at(t)).unwrap();
    assert!(rep.hypothesis_min >= -1e-4, "{}", rep.hypothesis_min);
    assert!(rep.worst_violation <= 1e-6, "{}", rep.worst_violation);
    let stop = rep.focal_time.unwrap();
    assert!((stop - PI).abs() <= 0.05, "{stop}");
}

#[test]
fn excess_curvature_is_detected() {
    // R = 2cI violates nothing; R = −I with K = 0 violates the hypothesis and the bound
    let setup = ComparisonSetup::new(2, 0.0, 2.0, 2.0);
    let rep = laplacian_comparison_check(&setup, |_| -DMatrix::<f64>::identity(2, 2), |_| (0.0, 0.0)).unwrap();
    assert!(rep.hypothesis_min < 0.0);
    assert!(rep.worst_violation > 1e-3);
}

fn grid(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

#[test]
fn mcp_examples() {
    let ts = grid(0.05, 2.5, 200);
    let constant = vec![0.3; ts.len()];
    let early = grid(0.05, 2.0, 200);
    let r = mcp_ratio_check(&constant, Some(&vec![0.0; ts.len()]), 1.0, 2.0, &early).unwrap();
    assert!(r.non_increasing && r.derivative_bound_holds && r.equivalent);
    // s_{1,2} decreases past π/√2
    let r = mcp_ratio_check(&constant, Some(&vec![0.0; ts.len()]), 1.0, 2.0, &ts).unwrap();
    assert!(!r.non_increasing && !r.derivative_bound_holds && r.equivalent);

    let sphere: Vec<f64> = ts.iter().map(|t| t.sin().ln()).collect();
    let dots: Vec<f64> = ts.iter().map(|t| 1.0 / t.tan()).collect();
    let r = mcp_ratio_check(&sphere, Some(&dots), 1.0, 1.0, &ts).unwrap();
    assert!(r.non_increasing && r.derivative_bound_holds, "{r:?}");
    assert!(r.worst_increase.abs() <= 1e-8);
    let r = mcp_ratio_check(&sphere, None, 1.0, 2.0, &ts).unwrap();
    assert!(r.non_increasing && r.derivative_bound_holds);

    let too_fast: Vec<f64> = ts.iter().map(|t| 2.0 * t.ln()).collect();
    let r = mcp_ratio_check(&too_fast, None, 0.0, 1.0, &ts).unwrap();
    assert!(!r.non_increasing && !r.derivative_bound_holds && r.equivalent);
}

#[test]
fn mcp_rejects_bad_input() {
    let ts = grid(0.1, 1.0, 10);
    assert_eq!(mcp_ratio_check(&[0.0; 3], None, 0.0, 2.0, &ts).unwrap_err(), Error::ShapeMismatch);
    let mut bad = ts.clone();
    bad.swap(2, 3);
    assert!(mcp_ratio_check(&[0.0; 10], None, 0.0, 2.0, &bad).is_err());
    let ts = grid(0.5, 4.0, 10);
    assert_eq!(mcp_ratio_check(&[0.0; 10], None, 1.0, 1.0, &ts).unwrap_err(), Error::PastFocalTime);
}
