use std::f64::consts::{PI, TAU};

use hamflow_core::hamiltonians::*;
use hamflow_core::heatgrid::*;
use hamflow_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn torus1(cells: usize, f: impl Fn(f64) -> f64) -> GridField {
    let g = Grid::unit_torus(1, cells).unwrap();
    let v = g.sample(|x| f(x[0]));
    GridField::lebesgue(g, v).unwrap()
}

fn torus2(cells: usize, f: impl Fn(f64, f64) -> f64) -> GridField {
    let g = Grid::unit_torus(2, cells).unwrap();
    let v = g.sample(|x| f(x[0], x[1]));
    GridField::lebesgue(g, v).unwrap()
}

fn p3(n: usize) -> ChartHamiltonian {
    p_homogeneous(3.0, CoMetric::euclidean(n)).unwrap()
}

#[test]
fn grid_validation() {
    assert!(Grid::new(vec![4], 0.1, true).is_err());
    assert!(Grid::new(vec![8, 8, 8], 0.1, true).is_err());
    assert!(Grid::new(vec![8], 0.0, true).is_err());
    let g = Grid::unit_torus(2, 8).unwrap();
    assert_eq!(g.len(), 64);
    assert_eq!(g.neighbor(0, 0, -1), Some(56));
    let b = Grid::new(vec![8], 0.1, false).unwrap();
    assert_eq!(b.neighbor(0, 0, -1), None);
    assert!(GridField::lebesgue(g, vec![0.0; 3]).is_err());
}

#[test]
fn energy_examples() {
    let f = torus1(32, |x| (TAU * x).sin());
    let h = 1.0 / 32.0;
    let want = ((PI * h).sin() / h).powi(2);
    assert!((discrete_energy(&euclidean(1), &f).unwrap() - want).abs() <= 1e-12);
    assert_eq!(discrete_energy(&p3(2), &torus2(8, |_, _| 0.7)).unwrap(), 0.0);
    // linear ramp on a box: every one-sided slope is 1
    let g = Grid::new(vec![10], 0.1, false).unwrap();
    let v = g.sample(|x| x[0]);
    let e = discrete_energy(&euclidean(1), &GridField::lebesgue(g, v).unwrap()).unwrap();
    // end cells carry one term of weight ½
    assert!((e - 0.5 * 0.1 * 9.0).abs() <= 1e-12);
}

#[test]
fn discrete_laplacian_eigenfunctions() {
    let cells = 64;
    let h = 1.0 / cells as f64;
    for k in 1..4 {
        let f = torus1(cells, |x| (TAU * k as f64 * x).sin());
        let lap = discrete_laplacian(&euclidean(1), &f).unwrap();
        let lam = 4.0 / (h * h) * (PI * k as f64 * h).sin().powi(2);
        for (l, u) in lap.values.iter().zip(&f.values) {
            assert!((l + lam * u).abs() <= 1e-9 * lam);
        }
    }
}

#[test]
fn discrete_laplacian_conserves_mass() {
    let g = Grid::unit_torus(2, 16).unwrap();
    let vs = g.sample(|x| 0.4 * (TAU * x[0]).cos() + 0.2 * (TAU * x[1]).sin());
    let vals = g.sample(|x| (TAU * x[0]).sin() * (TAU * x[1]).cos() + 0.3 * (TAU * x[1]).sin());
    let f = GridField::new(g, vals, vs).unwrap();
    for h in [euclidean(2), p3(2), randers(DMatrix::identity(2, 2), vec![0.3, -0.2]).unwrap()] {
        let lap = discrete_laplacian(&h, &f).unwrap();
        let scale: f64 = lap.values.iter().zip(f.masses()).map(|(l, m)| (l * m).abs()).sum();
        assert!(lap.mass().abs() <= 1e-13 * scale.max(1.0), "{}", h.name());
    }
}

#[test]
fn constants_are_stationary() {
    let f = torus2(16, |_, _| 1.5);
    let run = heat_solve_explicit(&p3(2), &f, 0.01, 1e-4).unwrap();
    assert!(run.field.values.iter().all(|v| *v == 1.5));
}

fn spectral_error(cells: usize, t: f64) -> f64 {
    let f = torus1(cells, |x| (TAU * x).sin());
    let h = 1.0 / cells as f64;
    let run = heat_solve_explicit(&euclidean(1), &f, t, 0.25 * h * h).unwrap();
    let decay = (-TAU * TAU * t).exp();
    let exact = f.with_values(f.values.iter().map(|v| v * decay).collect());
    l2_distance(&run.field, &exact).unwrap()
}

#[test]
fn heat_matches_spectral_solution() {
    let fine = spectral_error(256, 0.1);
    let coarse = spectral_error(128, 0.1);
    assert!(fine <= 1e-4, "{fine}");
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn p3_heat_flow_invariants() {
    let f = torus2(24, |x, y| (TAU * x).sin() + 0.5 * (TAU * y).cos() * (TAU * x).cos());
    let dt = 0.5 * stability_bound(&p3(2), &f).unwrap();
    let run = heat_solve_explicit(&p3(2), &f, 0.02, dt).unwrap();
    let d = &run.diagnostics;
    assert!(d.mass_drift() <= 1e-12);
    assert!(d.max_energy_increase() <= 0.0);
    assert!(d.slope.last().unwrap() < &d.slope[0]);

    let other = torus2(24, |x, y| 0.3 * (TAU * y).sin() - 0.6 * (TAU * (x + y)).cos());
    let dt = 0.5 * stability_bound(&p3(2), &f).unwrap().min(stability_bound(&p3(2), &other).unwrap());
    let dist = heat_contraction(&p3(2), &f, &other, 0.02, dt).unwrap();
    assert!(dist.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    assert!(dist.last().unwrap() < &dist[0]);
}

#[test]
fn explicit_step_size_is_checked() {
    let f = torus1(64, |x| (TAU * x).sin());
    let bound = stability_bound(&euclidean(1), &f).unwrap();
    assert!((bound - 0.5 / (64.0 * 64.0)).abs() < 1e-15);
    match heat_solve_explicit(&euclidean(1), &f, 0.01, 1.5 * bound) {
        Err(Error::TimeStepTooLarge { bound: b }) => assert!((b - bound).abs() < 1e-15),
        other => panic!("{other:?}"),
    }
}

fn laplacian_matrix(f: &GridField) -> DMatrix<f64> {
    let n = f.grid.len();
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = discrete_laplacian(&euclidean(f.grid.dim()), &f.with_values(e)).unwrap();
        a.set_column(j, &DVector::from_vec(col.values));
    }
    a
}

#[test]
fn minimizing_movement_is_implicit_euler_for_quadratic_energy() {
    let f = torus2(12, |x, y| (TAU * x).sin() + 0.3 * (TAU * y).cos());
    let delta = 0.01;
    let (step, stats) = minimizing_movement_step(&euclidean(2), &f, delta).unwrap();
    assert!(stats.residual <= 1e-10);
    let n = f.grid.len();
    let sys = DMatrix::identity(n, n) - laplacian_matrix(&f) * delta;
    let want = sys.lu().solve(&DVector::from_column_slice(&f.values)).unwrap();
    let err = step.values.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn minimizing_movement_fixes_constants() {
    let f = torus2(10, |_, _| -0.4);
    let (g, _) = minimizing_movement_step(&p3(2), &f, 0.1).unwrap();
    assert!(g.values.iter().all(|v| (v + 0.4).abs() <= 1e-14));
    assert!(minimizing_movement_step(&p3(2), &f, 0.0).is_err());
}

#[test]
fn minimizing_movement_converges_at_first_order() {
    let f = torus1(32, |x| (TAU * x).sin());
    let t = 0.1;
    let h = 1.0 / 32.0;
    // the discrete semigroup acts on one Fourier mode by its discrete eigenvalue
    let lam = 4.0 / (h * h) * (PI * h).sin().powi(2);
    let exact = f.with_values(f.values.iter().map(|v| v * (-lam * t).exp()).collect());
    let errs: Vec<f64> = [8usize, 16, 32, 64]
        .iter()
        .map(|&k| l2_distance(&minimizing_movement(&euclidean(1), &f, t, k).unwrap(), &exact).unwrap())
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.0, "{errs:?}");
    }
}

#[test]
fn p3_minimizing_movement_decreases_error_with_k() {
    let f = torus1(32, |x| (TAU * x).sin());
    let t = 0.02;
    let bound = stability_bound(&p3(1), &f).unwrap();
    let exact = heat_solve_explicit(&p3(1), &f, t, 0.05 * bound).unwrap().field;
    let errs: Vec<f64> =
        [4usize, 8, 16].iter().map(|&k| l2_distance(&minimizing_movement(&p3(1), &f, t, k).unwrap(), &exact).unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < 0.6 * w[0]), "{errs:?}");
}

#[test]
fn slope_identity() {
    for h in [euclidean(2), p3(2)] {
        let f = torus2(16, |x, y| (TAU * x).sin() + 0.4 * (TAU * y).cos());
        let d0 = 2.0 * stability_bound(&h, &f).unwrap();
        let rep = slope_and_identity_check(&h, &f, &[d0, d0 / 2.0, d0 / 4.0], 64).unwrap();
        assert!(rep.slope_gap <= 0.02, "{}: {rep:?}", h.name());
        assert!(rep.energy_gap <= 0.02, "{}: {rep:?}", h.name());
    }
    let f = torus1(16, |x| x.sin());
    assert!(slope_and_identity_check(&euclidean(1), &f, &[1e-4], 4).is_err());
}

fn bump(amp: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| 1.0 + amp * (TAU * x).sin() * (0.5 + 0.5 * (TAU * y).cos())
}

#[test]
fn entropy_flow_keeps_uniform_density() {
    let f = torus2(12, |_, _| 1.0);
    let run = entropy_flow_solve(&p3(2), &f, 0.01, 1e-4, 0.0, 0).unwrap();
    assert!(run.field.values.iter().all(|v| (v - 1.0).abs() <= 1e-15));
}

#[test]
fn entropy_flow_coincides_with_heat_for_quadratic_hamiltonian() {
    let f = torus2(16, bump(0.5));
    let dt = 0.25 / (16.0 * 16.0 * 4.0);
    let ent = entropy_flow_solve(&euclidean(2), &f, 0.01, dt, 0.0, 4).unwrap();
    let heat = heat_solve_explicit(&euclidean(2), &f, 0.01, dt).unwrap();
    let gap = l2_distance(&ent.field, &heat.field).unwrap();
    assert!(gap <= 1e-6, "{gap}");
    let d = &ent.diagnostics;
    assert!(d.mass_drift() <= 1e-12);
    assert!(d.max_entropy_increase().unwrap() <= 0.0);
}

#[test]
fn entropy_flow_differs_from_heat_for_p3() {
    let f = torus1(64, |x| bump(0.8)(x, 0.0));
    let neg_log = f.with_values(f.values.iter().map(|r| -r.ln()).collect());
    let dt = 0.5 * stability_bound(&p3(1), &neg_log).unwrap();
    let t = 0.01;
    let ent = entropy_flow_solve(&p3(1), &f, t, dt, 0.0, 8).unwrap();
    let heat = heat_solve_explicit(&p3(1), &f, t, dt).unwrap();
    let gap = l2_distance(&ent.field, &heat.field).unwrap();
    assert!(gap >= 1e-3, "{gap}");
    let d = &ent.diagnostics;
    assert!(d.mass_drift() <= 1e-12);
    assert!(d.max_entropy_increase().unwrap() <= 0.0);
    assert!(ent.dissipation_gap <= 0.02, "{}", ent.dissipation_gap);
}

#[test]
fn entropy_flow_rejects_nonpositive_density() {
    let f = torus1(16, |x| (TAU * x).sin());
    assert!(matches!(entropy_flow_solve(&euclidean(1), &f, 0.01, 1e-4, 0.0, 0), Err(Error::PositivityLost { time, .. }) if time == 0.0));
    let f = torus1(16, |x| 1.0 + 0.9 * (TAU * x).sin());
    assert!(matches!(entropy_flow_solve(&euclidean(1), &f, 0.001, 1e-5, 0.5, 0), Err(Error::PositivityLost { .. })));
}

#[test]
fn p_harmonic_in_one_dimension_is_affine() {
    for p in [1.5, 3.0, 4.0] {
        let h = p_homogeneous(p, CoMetric::euclidean(1)).unwrap();
        let g = Grid::new(vec![21], 0.05, false).unwrap();
        let init = g.sample(|x| if x[0] > 0.99 { 2.0 } else { 0.3 * (7.0 * x[0]).sin() });
        let mut mask = vec![false; 21];
        mask[0] = true;
        mask[20] = true;
        let sol = dirichlet_harmonic(&h, &GridField::lebesgue(g.clone(), init).unwrap(), &mask).unwrap();
        let affine = g.sample(|x| 2.0 * x[0]);
        let err = sol.field.values.iter().zip(&affine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "p = {p}: {err}");
    }
}

#[test]
fn dirichlet_minimizer_is_discretely_harmonic() {
    let g = Grid::new(vec![12, 12], 1.0 / 11.0, false).unwrap();
    let mask: Vec<bool> = (0..g.len())
        .map(|c| {
            let (i, j) = (c / 12, c % 12);
            i == 0 || j == 0 || i == 11 || j == 11
        })
        .collect();
    let init = g.sample(|x| (3.0 * x[0]).sin() + x[1] * x[1]);
    let field = GridField::lebesgue(g.clone(), init.clone()).unwrap();
    for h in [euclidean(2), p3(2)] {
        let sol = dirichlet_harmonic(&h, &field, &mask).unwrap();
        assert!(sol.residual <= 1e-8, "{}: {}", h.name(), sol.residual);
        for c in 0..g.len() {
            if mask[c] {
                assert_eq!(sol.field.values[c], init[c]);
            }
        }
    }
    let flat =
        GridField::lebesgue(g.clone(), g.sample(|x| if x[0] == 0.0 || x[1] == 0.0 || x[0] > 0.99 || x[1] > 0.99 { 1.25 } else { x[0] }))
            .unwrap();
    let sol = dirichlet_harmonic(&euclidean(2), &flat, &mask).unwrap();
    assert!(sol.field.values.iter().all(|v| (v - 1.25).abs() <= 1e-12));
    // the p = 3 operator degenerates at constants, so the residual only controls the square of the error
    let sol = dirichlet_harmonic(&p3(2), &flat, &mask).unwrap();
    assert!(sol.field.values.iter().all(|v| (v - 1.25).abs() <= 1e-5));
    assert!(dirichlet_harmonic(&p3(2), &flat, &vec![false; g.len()]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_convex(a in prop::collection::vec(-1.0f64..1.0, 64), b in prop::collection::vec(-1.0f64..1.0, 64), s in 0.0f64..1.0) {
        let g = Grid::unit_torus(2, 8).unwrap();
        let fa = GridField::lebesgue(g.clone(), a.clone()).unwrap();
        let fb = fa.with_values(b.clone());
        let mid = fa.with_values(a.iter().zip(&b).map(|(x, y)| (1.0 - s) * x + s * y).collect());
        for h in [euclidean(2), p3(2)] {
            let lhs = discrete_energy(&h, &mid).unwrap();
            let rhs = (1.0 - s) * discrete_energy(&h, &fa).unwrap() + s * discrete_energy(&h, &fb).unwrap();
            prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn laplacian_is_minus_energy_gradient(a in prop::collection::vec(-1.0f64..1.0, 16), c in 0usize..16) {
        let g = Grid::unit_torus(1, 16).unwrap();
        let f = GridField::lebesgue(g, a.clone()).unwrap();
        let lap = discrete_laplacian(&p3(1), &f).unwrap();
        let eps = 1e-6;
        let mut up = a.clone();
        up[c] += eps;
        let mut dn = a;
        dn[c] -= eps;
        let fd = (discrete_energy(&p3(1), &f.with_values(up)).unwrap() - discrete_energy(&p3(1), &f.with_values(dn)).unwrap()) / (2.0 * eps);
        let m = f.masses()[c];
        prop_assert!((lap.values[c] + fd / m).abs() <= 1e-5 * (1.0 + lap.values[c].abs()));
    }
}
