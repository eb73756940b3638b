use hamflow_core::jets::{compose, curve_derivatives, grid_derivatives, jet_eval, Jet, ScalarField};
use hamflow_core::Error;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

#[test]
fn square_at_one() {
    let j = jet_eval(|x| &x[0] * &x[0], &[1.0], 2).unwrap();
    assert_eq!(j.value(), 1.0);
    assert_eq!(j.d1(0), 2.0);
    assert_eq!(j.d2(0, 0), 2.0);
}

#[test]
fn sine_at_zero() {
    let j = jet_eval(|x| x[0].sin(), &[0.0], 3).unwrap();
    assert_eq!(j.value(), 0.0);
    assert_eq!(j.d1(0), 1.0);
    assert_eq!(j.d2(0, 0), 0.0);
    assert_eq!(j.d3(0, 0, 0), -1.0);
}

#[test]
fn constant_field_has_zero_derivatives() {
    let f = ScalarField::constant(3, 5.0);
    let j = f.jet(&[0.3, -1.0, 2.0], 3).unwrap();
    assert_eq!(j.value(), 5.0);
    for i in 0..3 {
        assert_eq!(j.d1(i), 0.0);
        for k in 0..3 {
            assert_eq!(j.d2(i, k), 0.0);
            for l in 0..3 {
                assert_eq!(j.d3(i, k, l), 0.0);
            }
        }
    }
}

#[test]
fn non_finite_values_are_rejected() {
    let err = jet_eval(|x| x[0].ln(), &[-1.0], 2).unwrap_err();
    assert_eq!(err, Error::OutsideSmoothDomain);
    assert!(jet_eval(|x| x[0].clone(), &[0.0], 4).is_err());
}

#[test]
fn curve_derivative_examples() {
    let d = curve_derivatives(|t| t * t * t, 1.0, None, None).unwrap();
    assert!(close(d.d1, 3.0, 1e-9) && close(d.d2, 6.0, 1e-9));
    let d = curve_derivatives(|_| 4.0, 0.7, None, None).unwrap();
    assert_eq!((d.d1, d.d2), (0.0, 0.0));
    let d = curve_derivatives(f64::exp, 0.0, None, None).unwrap();
    assert!(close(d.d1, 1.0, 1e-8) && close(d.d2, 1.0, 1e-8));
}

#[test]
fn unresolvable_step_is_reported() {
    let err = curve_derivatives(|t| (1.0 / t).sin(), 0.01, Some(2e-3), Some(1e-12)).unwrap_err();
    assert!(matches!(err, Error::StepUnresolvable { .. }));
}

#[test]
fn grid_derivatives_need_margin() {
    let samples: Vec<Vec<f64>> = (0..9).map(|k| vec![(k as f64 * 0.1).powi(2)]).collect();
    let (d1, d2, _) = grid_derivatives(&samples, 4, 0.1).unwrap();
    assert!(close(d1[0], 0.8, 1e-12) && close(d2[0], 2.0, 1e-10));
    assert!(grid_derivatives(&samples, 3, 0.1).is_err());
}

#[test]
fn composition_matches_closed_form() {
    // g(u, v) = u v², inner (u, v) = (sin x, x y) at (0.4, -1.3)
    let p = [0.4, -1.3];
    let inner_seed = Jet::seed(&p, 3);
    let inner = vec![inner_seed[0].sin(), &inner_seed[0] * &inner_seed[1]];
    let outer_seed = Jet::seed(&[inner[0].value(), inner[1].value()], 3);
    let outer = &outer_seed[0] * &(&outer_seed[1] * &outer_seed[1]);
    let c = compose(&outer, &inner);
    let direct = jet_eval(|x| &x[0].sin() * &(&(&x[0] * &x[1]) * &(&x[0] * &x[1])), &p, 3).unwrap();
    for i in 0..2 {
        assert!(close(c.d1(i), direct.d1(i), 1e-13));
        for j in 0..2 {
            assert!(close(c.d2(i, j), direct.d2(i, j), 1e-13));
            for k in 0..2 {
                assert!(close(c.d3(i, j, k), direct.d3(i, j, k), 1e-12));
            }
        }
    }
}

fn elementary(x: &[Jet]) -> Jet {
    // f = exp(x) cos(y) + x³ y / (1 + y²)
    let a = &x[0].exp() * &x[1].cos();
    let num = &(&x[0] * &x[0]) * &(&x[0] * &x[1]);
    let den = &(&x[1] * &x[1]) + &Jet::constant(1.0);
    &a + &(&num / &den)
}

fn elementary_derivatives(x: f64, y: f64) -> (f64, [f64; 2], [[f64; 2]; 2], f64) {
    let d = 1.0 + y * y;
    let v = x.exp() * y.cos() + x.powi(3) * y / d;
    let fx = x.exp() * y.cos() + 3.0 * x * x * y / d;
    let gy = (1.0 - y * y) / (d * d);
    let fy = -x.exp() * y.sin() + x.powi(3) * gy;
    let fxx = x.exp() * y.cos() + 6.0 * x * y / d;
    let fxy = -x.exp() * y.sin() + 3.0 * x * x * gy;
    let gyy = (2.0 * y * y * y - 6.0 * y) / (d * d * d);
    let fyy = -x.exp() * y.cos() + x.powi(3) * gyy;
    let fxxx = x.exp() * y.cos() + 6.0 * y / d;
    (v, [fx, fy], [[fxx, fxy], [fxy, fyy]], fxxx)
}

proptest! {
    #[test]
    fn leibniz_and_chain_rule(x in -1.5f64..1.5, y in -2.0f64..2.0) {
        let j = jet_eval(elementary, &[x, y], 3).unwrap();
        let (v, g, hs, t) = elementary_derivatives(x, y);
        prop_assert!(close(j.value(), v, 1e-13));
        for i in 0..2 {
            prop_assert!(close(j.d1(i), g[i], 1e-12));
            for k in 0..2 {
                prop_assert!(close(j.d2(i, k), hs[i][k], 1e-12));
            }
        }
        prop_assert!(close(j.d3(0, 0, 0), t, 1e-12));
    }

    #[test]
    fn derivative_tensors_are_symmetric(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.1f64..2.0) {
        let j = jet_eval(|v| &(&v[0] * &v[1]).sin() * &v[2].ln() + (&v[0] * &v[2]).exp(), &[x, y, z], 3).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                prop_assert_eq!(j.d2(a, b), j.d2(b, a));
                for c in 0..3 {
                    let base = j.d3(a, b, c);
                    prop_assert_eq!(base, j.d3(b, a, c));
                    prop_assert_eq!(base, j.d3(c, b, a));
                    prop_assert_eq!(base, j.d3(a, c, b));
                }
            }
        }
    }

    #[test]
    fn partial_shifts_derivatives(x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let j = jet_eval(elementary, &[x, y], 3).unwrap();
        let p = j.partial(0);
        prop_assert_eq!(p.value(), j.d1(0));
        prop_assert_eq!(p.d1(1), j.d2(0, 1));
        prop_assert_eq!(p.d2(0, 1), j.d3(0, 0, 1));
    }
}
