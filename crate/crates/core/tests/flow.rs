use hamflow_core::flow::*;
use hamflow_core::hamiltonians::*;
use hamflow_core::jets::{grid_derivatives, sum, ScalarField};
use hamflow_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn state(x: &[f64], a: &[f64]) -> CotangentState {
    CotangentState::new(x.to_vec(), a.to_vec())
}

fn wavy_mechanical() -> ChartHamiltonian {
    let z = ScalarField::new(2, |x| &x[0].sin() * 0.3 + &(&x[1] * &x[1]) * 0.2);
    mechanical(CoMetric::euclidean(2), Potential::Field(z)).unwrap()
}

#[test]
fn harmonic_oscillator_quarter_period() {
    let h = harmonic_oscillator(1);
    let traj = hamiltonian_flow(&h, &state(&[0.0], &[1.0]), FRAC_PI_2, &FlowOptions::default()).unwrap();
    let end = traj.last();
    assert!((end.x[0] - 1.0).abs() <= 1e-8 && end.alpha[0].abs() <= 1e-8);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        assert!((s.x[0] - t.sin()).abs() <= 1e-8);
    }
}

#[test]
fn free_motion() {
    let h = euclidean(2);
    let traj = hamiltonian_flow(&h, &state(&[0.3, -1.0], &[0.5, 2.0]), 1.7, &FlowOptions::default()).unwrap();
    let end = traj.last();
    assert!((end.x[0] - (0.3 + 1.7 * 0.5)).abs() < 1e-12);
    assert!((end.x[1] - (-1.0 + 1.7 * 2.0)).abs() < 1e-12);
    assert_eq!(end.alpha, vec![0.5, 2.0]);
}

#[test]
fn mechanical_energy_is_conserved() {
    let h = wavy_mechanical();
    let traj = hamiltonian_flow(&h, &state(&[0.2, 0.4], &[1.0, -0.5]), 3.0, &FlowOptions::default()).unwrap();
    let speeds: Vec<f64> = traj.states.iter().map(|s| s.alpha[0].hypot(s.alpha[1])).collect();
    let spread = speeds.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 1e-2);
    assert!(traj.energy_drift(&h) <= 1e-8 * (1.0 + traj.h0.abs()) * 3.0);
}

#[test]
fn backward_flow_runs_in_negative_time() {
    let h = euclidean(1);
    let traj = hamiltonian_flow(&h, &state(&[0.0], &[1.0]), -0.5, &FlowOptions::default()).unwrap();
    assert_eq!(traj.origin, traj.len() - 1);
    assert!((traj.states[0].x[0] + 0.5).abs() < 1e-12);
}

#[test]
fn leaving_the_chart_is_an_error() {
    let chart = Chart::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
    let h = ChartHamiltonian::from_fn("boxed", 2, chart, true, |_, a| &sum(a.iter().map(|v| v * v).collect::<Vec<_>>().iter()) * 0.5);
    match hamiltonian_flow(&h, &state(&[0.0, 0.0], &[1.0, 0.0]), 2.0, &FlowOptions::default()) {
        Err(Error::LeftChart { time }) => assert!((time - 1.0).abs() < 2e-3),
        other => panic!("expected chart exit, got {other:?}"),
    }
}

#[test]
fn zero_covector_is_refused_for_nonsmooth_hamiltonians() {
    let h = p_homogeneous(3.0, CoMetric::euclidean(2)).unwrap();
    assert!(variational_flow(&h, &state(&[0.0, 0.0], &[0.0, 0.0]), 1.0, &FlowOptions::default()).is_err());
}

#[test]
fn euclidean_linearization() {
    let traj = variational_flow(&euclidean(2), &state(&[0.1, 0.2], &[1.0, -1.0]), 1.0, &FlowOptions::default()).unwrap();
    let js = traj.jacobians.as_ref().unwrap();
    assert_eq!(js[0], DMatrix::identity(4, 4));
    for (t, j) in traj.times.iter().zip(js) {
        let mut expected = DMatrix::identity(4, 4);
        expected[(0, 2)] = *t;
        expected[(1, 3)] = *t;
        assert!((j - expected).amax() < 1e-12);
    }
}

#[test]
fn oscillator_linearization_is_a_rotation() {
    let traj = variational_flow(&harmonic_oscillator(1), &state(&[0.3], &[0.8]), 2.0, &FlowOptions::default()).unwrap();
    for (t, j) in traj.times.iter().zip(traj.jacobians.as_ref().unwrap()) {
        let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!((j - rot).amax() < 1e-10);
    }
}

#[test]
fn symplectic_defect_is_small_on_fixtures() {
    let fixtures = [
        (wavy_mechanical(), state(&[0.2, 0.1], &[0.6, 0.8])),
        (sphere_chart(), state(&[0.3, -0.2], &[0.6, 0.8])),
        (p_homogeneous(3.0, CoMetric::Sphere).unwrap(), state(&[0.3, -0.2], &[0.6, 0.8])),
        (randers(DMatrix::identity(2, 2), vec![0.3, 0.0]).unwrap(), state(&[0.0, 0.0], &[0.2, 1.0])),
    ];
    for (h, s) in fixtures {
        let traj = variational_flow(&h, &s, 1.0, &FlowOptions::default()).unwrap();
        assert!(traj.symplectic_defect().unwrap() <= 1e-8, "{}", h.name());
        assert!(traj.energy_drift(&h) <= 1e-8 * (1.0 + traj.h0.abs()));
    }
}

#[test]
fn flow_composes() {
    let opts = FlowOptions::default();
    for h in [wavy_mechanical(), sphere_chart(), p_homogeneous(3.0, CoMetric::euclidean(2)).unwrap()] {
        let s0 = state(&[0.1, 0.3], &[0.7, -0.4]);
        let direct = hamiltonian_flow(&h, &s0, 1.25, &opts).unwrap();
        let mid = hamiltonian_flow(&h, &s0, 0.5, &opts).unwrap();
        let two = hamiltonian_flow(&h, mid.last(), 0.75, &opts).unwrap();
        let (a, b) = (direct.last().to_phase(), two.last().to_phase());
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap <= 1e-8, "{}: {gap}", h.name());
    }
}

#[test]
fn projected_curves_satisfy_euler_lagrange() {
    let opts = FlowOptions { steps_per_unit: 256, ..FlowOptions::default() };
    let eps = 1e-5;
    for h in [wavy_mechanical(), sphere_chart(), p_homogeneous(3.0, CoMetric::Sphere).unwrap()] {
        let traj = hamiltonian_flow(&h, &state(&[0.2, -0.1], &[0.5, 0.9]), 0.5, &opts).unwrap();
        let mut lv = Vec::new();
        let mut lx = Vec::new();
        for s in &traj.states {
            let v = legendre_dual(&h, s).unwrap();
            let partial = |k: usize, in_x: bool| {
                let (mut xp, mut xm, mut vp, mut vm) = (s.x.clone(), s.x.clone(), v.clone(), v.clone());
                if in_x {
                    xp[k] += eps;
                    xm[k] -= eps;
                } else {
                    vp[k] += eps;
                    vm[k] -= eps;
                }
                (lagrangian(&h, &xp, &vp).unwrap() - lagrangian(&h, &xm, &vm).unwrap()) / (2.0 * eps)
            };
            lv.push(vec![partial(0, false), partial(1, false)]);
            lx.push(vec![partial(0, true), partial(1, true)]);
        }
        for k in (8..traj.len() - 8).step_by(16) {
            let (d, _, _) = grid_derivatives(&lv, k, traj.step).unwrap();
            for i in 0..2 {
                let residual = lx[k][i] - d[i];
                assert!(residual.abs() <= 1e-5, "{}: residual {residual}", h.name());
            }
        }
    }
}

#[test]
fn euclidean_exponential_map_ignores_scale() {
    let z = [0.2, -0.4];
    let a = [0.7, 1.1];
    for c in [0.1, 1.0, 7.5] {
        let x = exp_scale_c(&euclidean(2), &z, &a, c, 1.0).unwrap();
        assert!((x[0] - 0.9).abs() < 1e-10 && (x[1] - 0.7).abs() < 1e-10);
    }
}

#[test]
fn riemannian_exponential_map_ignores_scale() {
    let z = [0.2, -0.4];
    let a = [0.7, 1.1];
    for h in [sphere_chart(), randers(DMatrix::identity(2, 2), vec![0.2, 0.1]).unwrap()] {
        let x1 = exp_scale_c(&h, &z, &a, 0.5, 1.0).unwrap();
        let x2 = exp_scale_c(&h, &z, &a, 2.0, 1.0).unwrap();
        assert!((x1[0] - x2[0]).abs() <= 1e-8 && (x1[1] - x2[1]).abs() <= 1e-8, "{}", h.name());
    }
}

#[test]
fn p_homogeneous_exponential_map_rescales() {
    let p = 3.0;
    let h = p_homogeneous(p, CoMetric::Sphere).unwrap();
    let z = [0.1, 0.2];
    let a = [0.6, -0.3];
    let (c, c2) = (0.4, 1.3);
    let lhs = exp_scale_c(&h, &z, &a, c2, 1.0).unwrap();
    let f = (c2 / c).powf((p - 2.0) / p);
    let rhs = exp_scale_c(&h, &z, &[f * a[0], f * a[1]], c, 1.0).unwrap();
    assert!((lhs[0] - rhs[0]).abs() <= 1e-8 && (lhs[1] - rhs[1]).abs() <= 1e-8);
}

#[test]
fn unreachable_scale_is_reported() {
    let h = euclidean(2);
    assert!(matches!(energy_scale(&h, &[0.0, 0.0], &[1.0, 0.0], -1.0), Err(Error::InvalidArgument(_))));
    let m = harmonic_oscillator(2);
    assert_eq!(energy_scale(&m, &[3.0, 0.0], &[1.0, 0.0], 1.0).unwrap_err(), Error::ScaleUnreachable);
}

#[test]
fn radial_potential_examples() {
    let grid: Vec<f64> = (0..=10).map(|k| 0.1 * k as f64).collect();
    for c in [0.5, 2.0] {
        let u = radial_potential(&euclidean(2), &[0.0, 0.0], &[1.0, 0.3], c, &grid).unwrap();
        assert_eq!(u[0], 0.0);
        for (t, v) in grid.iter().zip(&u) {
            assert!((v - 2.0 * c * t).abs() < 1e-10);
        }
    }
    let u = radial_potential(&wavy_mechanical(), &[0.0, 0.0], &[1.0, 0.3], 1.0, &grid).unwrap();
    let rates: Vec<f64> = grid.iter().zip(&u).skip(1).map(|(t, v)| v / t).collect();
    let spread = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rates.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread > 1e-3, "increments unexpectedly proportional");
    assert!(radial_potential(&euclidean(2), &[0.0, 0.0], &[1.0, 0.0], 1.0, &[0.5, 0.2]).is_err());
}

#[test]
fn omega_is_the_canonical_pairing() {
    // ω(u, v) = Σ (u_α v_x − u_x v_α)
    let u = [1.0, 0.0, 0.0, 2.0];
    let v = [0.0, 3.0, 1.0, 0.0];
    assert_eq!(omega(&u, &v), 1.0 * 0.0 + 2.0 * 3.0 - (1.0 * 1.0 + 0.0));
    assert_eq!(omega(&u, &v), -omega(&v, &u));
    let w = canonical_symplectic(2);
    assert_eq!(&w + w.transpose(), DMatrix::zeros(4, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn energy_and_symplecticity_hold_on_random_starts(x0 in -0.5f64..0.5, x1 in -0.5f64..0.5,
                                                     r in 0.3f64..1.5, th in 0.0f64..std::f64::consts::TAU) {
        let h = wavy_mechanical();
        let s = state(&[x0, x1], &[r * th.cos(), r * th.sin()]);
        let traj = variational_flow(&h, &s, 1.0, &FlowOptions::default()).unwrap();
        prop_assert!(traj.energy_drift(&h) <= 1e-8 * (1.0 + traj.h0.abs()));
        prop_assert!(traj.symplectic_defect().unwrap() <= 1e-8);
    }
}
