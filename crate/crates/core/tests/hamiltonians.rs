use hamflow_core::hamiltonians::*;
use hamflow_core::jets::ScalarField;
use hamflow_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn anisotropic() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7])
}

fn fixtures() -> Vec<ChartHamiltonian> {
    vec![
        euclidean(2),
        riemannian(anisotropic()).unwrap(),
        sphere_chart(),
        hyperbolic_disk(),
        mechanical(CoMetric::euclidean(2), Potential::Quadratic(vec![1.0, 0.0])).unwrap(),
        randers(anisotropic(), vec![0.2, -0.1]).unwrap(),
        deformation(Profile::Polynomial { coeffs: vec![0.0, 0.0, 0.5, 0.1] }, CoMetric::Sphere).unwrap(),
        p_homogeneous(3.0, CoMetric::euclidean(2)).unwrap(),
        p_homogeneous(1.5, CoMetric::Constant(anisotropic())).unwrap(),
    ]
}

fn sample_states() -> Vec<CotangentState> {
    let mut out = Vec::new();
    for (i, x) in [[0.1, -0.2], [0.4, 0.3], [-0.5, 0.05]].iter().enumerate() {
        out.push(CotangentState::new(x.to_vec(), vec![0.0, 0.0]));
        for a in [[1.0, 0.5], [-0.3, 0.8], [0.05, -0.02]] {
            out.push(CotangentState::new(x.to_vec(), vec![a[0] * (1.0 + i as f64), a[1]]));
        }
    }
    out
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn legendre_dual_examples() {
    let s = |x: Vec<f64>, a: Vec<f64>| CotangentState::new(x, a);
    assert_eq!(legendre_dual(&euclidean(2), &s(vec![0.0, 0.0], vec![1.0, 2.0])).unwrap(), vec![1.0, 2.0]);
    let p3 = p_homogeneous(3.0, CoMetric::euclidean(2)).unwrap();
    let v = legendre_dual(&p3, &s(vec![0.0, 0.0], vec![2.0, 0.0])).unwrap();
    assert!(close(v[0], 4.0, 1e-14) && v[1].abs() < 1e-14);
    let z = ScalarField::new(2, |x| (&x[0] * &x[1]).sin() + x[0].exp());
    let m = mechanical(CoMetric::euclidean(2), Potential::Field(z)).unwrap();
    let v = legendre_dual(&m, &s(vec![0.7, -0.4], vec![0.0, 1.0])).unwrap();
    assert!(v[0].abs() < 1e-14 && close(v[1], 1.0, 1e-14));
    assert_eq!(legendre_dual(&p3, &s(vec![0.0, 0.0], vec![0.0, 0.0])).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn legendre_inverse_examples() {
    let inv = legendre_inverse(&euclidean(2), &[0.0, 0.0], &[3.0, -1.0]).unwrap();
    assert!(close(inv.alpha[0], 3.0, 1e-12) && close(inv.alpha[1], -1.0, 1e-12));
    let p3 = p_homogeneous(3.0, CoMetric::euclidean(2)).unwrap();
    let inv = legendre_inverse(&p3, &[0.0, 0.0], &[4.0, 0.0]).unwrap();
    assert!(close(inv.alpha[0], 2.0, 1e-10) && inv.alpha[1].abs() < 1e-10);
    let inv = legendre_inverse(&p3, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    assert!(inv.degenerate);
    assert_eq!(inv.alpha, vec![0.0, 0.0]);
}

#[test]
fn lagrangian_examples() {
    let e = euclidean(2);
    assert!(close(lagrangian(&e, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0, 1e-12));
    let m = mechanical(CoMetric::euclidean(2), Potential::Quadratic(vec![2.0, 1.0])).unwrap();
    let x = [0.3, -0.5];
    let z = 0.5 * (2.0 * 0.09 + 0.25);
    assert!(close(lagrangian(&m, &x, &[0.4, 1.2]).unwrap(), 0.5 * (0.16 + 1.44) - z, 1e-10));
    for p in [1.5, 3.0, 4.0] {
        let h = p_homogeneous(p, CoMetric::euclidean(2)).unwrap();
        let q = p / (p - 1.0);
        let v = [0.6, -0.9];
        let norm = (0.36f64 + 0.81).sqrt();
        assert!(close(lagrangian(&h, &[0.0, 0.0], &v).unwrap(), norm.powf(q) / q, 1e-9), "p = {p}");
        assert_eq!(lagrangian(&h, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }
}

#[test]
fn builtin_examples() {
    let r = riemannian(DMatrix::identity(2, 2)).unwrap();
    let e = euclidean(2);
    let p2 = p_homogeneous(2.0, CoMetric::euclidean(2)).unwrap();
    let a2 = deformation(Profile::Quadratic { a: 1.7 }, CoMetric::euclidean(2)).unwrap();
    for s in sample_states() {
        let expected = 0.5 * (s.alpha[0] * s.alpha[0] + s.alpha[1] * s.alpha[1]);
        assert!(close(r.value(&s.x, &s.alpha), expected, 1e-12));
        assert!(close(p2.value(&s.x, &s.alpha), e.value(&s.x, &s.alpha), 1e-12));
        assert!(close(a2.value(&s.x, &s.alpha), 1.7 * 1.7 * expected, 1e-12));
    }
}

#[test]
fn invalid_profiles_are_rejected() {
    for prof in [
        Profile::Power { p: 1.0 },
        Profile::Quadratic { a: 0.0 },
        Profile::Polynomial { coeffs: vec![0.0, 1.0, 1.0] },
        Profile::Polynomial { coeffs: vec![0.0, 0.0, 1.0, -1.0] },
    ] {
        let err = deformation(prof, CoMetric::euclidean(2)).unwrap_err();
        assert!(matches!(err, Error::InvalidDeformation(_)), "{err:?}");
    }
    assert!(randers(DMatrix::identity(2, 2), vec![1.2, 0.0]).is_err());
}

#[test]
fn every_builtin_passes_the_invariant_sampler() {
    let pts = sample_states();
    for h in fixtures() {
        let rep = check_invariants(&h, &pts).unwrap_or_else(|e| panic!("{}: {e}", h.name()));
        assert!(rep.min_fibre_eigenvalue > 0.0, "{}", h.name());
    }
    // a potential offset moves H(x,0) off zero; the sampler skips that clause for mechanical fixtures
    let hm = harmonic_oscillator(2);
    assert!(check_invariants(&hm, &pts).is_ok());
}

#[test]
fn jet_gradient_matches_analytic_gradient() {
    for h in fixtures() {
        for s in sample_states().iter().filter(|s| !s.on_zero_section()) {
            let (ax, aa) = h.gradient(&s.x, &s.alpha).unwrap();
            let (jx, ja) = h.jet_gradient(&s.x, &s.alpha).unwrap();
            for (a, j) in ax.iter().chain(&aa).zip(jx.iter().chain(&ja)) {
                assert!((a - j).abs() <= 1e-12 * (1.0 + a.abs()), "{}: {a} vs {j}", h.name());
            }
        }
    }
}

#[test]
fn jet_hessian_matches_differences_of_gradient() {
    let eps = 1e-6;
    for h in fixtures() {
        for s in sample_states().iter().filter(|s| !s.on_zero_section()) {
            let pj = h.jet(&s.x, &s.alpha, 2).unwrap();
            for k in 0..2 {
                let mut ap = s.alpha.clone();
                let mut am = s.alpha.clone();
                ap[k] += eps;
                am[k] -= eps;
                let (_, gp) = h.jet_gradient(&s.x, &ap).unwrap();
                let (_, gm) = h.jet_gradient(&s.x, &am).unwrap();
                for i in 0..2 {
                    let fd = (gp[i] - gm[i]) / (2.0 * eps);
                    assert!((fd - pj.haa(i, k)).abs() <= 1e-6 * (1.0 + fd.abs()), "{}", h.name());
                }
                let mut xp = s.x.clone();
                let mut xm = s.x.clone();
                xp[k] += eps;
                xm[k] -= eps;
                let (_, gp) = h.jet_gradient(&xp, &s.alpha).unwrap();
                let (_, gm) = h.jet_gradient(&xm, &s.alpha).unwrap();
                for i in 0..2 {
                    let fd = (gp[i] - gm[i]) / (2.0 * eps);
                    assert!((fd - pj.hxa(k, i)).abs() <= 1e-6 * (1.0 + fd.abs()), "{}", h.name());
                }
            }
        }
    }
}

fn fixture_strategy() -> impl Strategy<Value = usize> {
    0..fixtures().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn legendre_roundtrip(idx in fixture_strategy(), x0 in -0.6f64..0.6, x1 in -0.6f64..0.6,
                          r in 0.1f64..2.5, th in 0.0f64..std::f64::consts::TAU) {
        let h = &fixtures()[idx];
        let alpha = vec![r * th.cos(), r * th.sin()];
        let s = CotangentState::new(vec![x0, x1], alpha.clone());
        let v = legendre_dual(h, &s).unwrap();
        let back = legendre_inverse(h, &s.x, &v).unwrap();
        for (a, b) in back.alpha.iter().zip(&alpha) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + r), "{}: {:?} vs {:?}", h.name(), back.alpha, alpha);
        }
    }

    #[test]
    fn fenchel_young(idx in fixture_strategy(), x0 in -0.6f64..0.6, x1 in -0.6f64..0.6,
                     a0 in -2.0f64..2.0, a1 in -2.0f64..2.0, v0 in -2.0f64..2.0, v1 in -2.0f64..2.0) {
        let h = &fixtures()[idx];
        let x = [x0, x1];
        prop_assume!(a0.abs() + a1.abs() > 1e-3);
        let alpha = [a0, a1];
        let l = lagrangian(h, &x, &[v0, v1]).unwrap();
        if h.vanishes_on_zero_section() {
            prop_assert!(l >= -1e-12);
        }
        let gap = h.value(&x, &alpha) + l - (a0 * v0 + a1 * v1);
        prop_assert!(gap >= -1e-9, "{}: gap {gap}", h.name());
        let v = legendre_dual(h, &CotangentState::new(x.to_vec(), alpha.to_vec())).unwrap();
        let l_at = lagrangian(h, &x, &v).unwrap();
        let eq = h.value(&x, &alpha) + l_at - (a0 * v[0] + a1 * v[1]);
        prop_assert!(eq.abs() <= 1e-9 * (1.0 + l_at.abs()), "{}: equality gap {eq}", h.name());
    }
}

#[test]
fn legendre_inverse_small_velocity_subquadratic() {
    let h = p_homogeneous(1.5, CoMetric::euclidean(1)).unwrap();
    for v in [2.4566e-3, -1e-5, 1e-2, 40.0] {
        let inv = legendre_inverse(&h, &[0.0], &[v]).unwrap();
        // α = |v|^{q−1} sign v with q = 3
        assert!((inv.alpha[0] - v * v.abs()).abs() <= 1e-10 * (v * v).max(1e-12), "{v}: {inv:?}");
    }
}
