use std::f64::consts::{E, PI};

use hamflow::expr::Expr;
use hamflow::Error;
use proptest::prelude::*;

fn ev(src: &str, x: &[f64]) -> f64 {
    Expr::parse(src, x.len()).unwrap().eval(x)
}

#[test]
fn precedence_and_associativity() {
    assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
    assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
    assert_eq!(ev("2 ^ 3 ^ 2", &[]), 512.0);
    assert_eq!(ev("-2 ^ 2", &[]), -4.0);
    assert_eq!(ev("8 / 4 / 2", &[]), 1.0);
    assert_eq!(ev("7 - 2 - 1", &[]), 4.0);
    assert_eq!(ev("2 * -3", &[]), -6.0);
    assert_eq!(ev("1.5e2 + 2E-1", &[]), 150.2);
}

#[test]
fn variables_and_aliases() {
    let x = [0.5, -1.25, 2.0];
    assert_eq!(ev("x0 + 10 * x1 + 100 * x2", &x), ev("x + 10 * y + 100 * z", &x));
    assert_eq!(ev("x2", &x), 2.0);
}

#[test]
fn constants_and_functions() {
    assert!((ev("pi", &[]) - PI).abs() < 1e-15);
    assert!((ev("e", &[]) - E).abs() < 1e-15);
    let x = [0.3];
    let cases: [(&str, f64); 9] = [
        ("sin(x)", 0.3f64.sin()),
        ("cos(x)", 0.3f64.cos()),
        ("exp(x)", 0.3f64.exp()),
        ("ln(x)", 0.3f64.ln()),
        ("log(x)", 0.3f64.ln()),
        ("sqrt(x)", 0.3f64.sqrt()),
        ("sinh(x)", 0.3f64.sinh()),
        ("cosh(x)", 0.3f64.cosh()),
        ("tanh(x)", 0.3f64.tanh()),
    ];
    for (src, want) in cases {
        assert!((ev(src, &x) - want).abs() < 1e-15, "{src}");
    }
    assert!((ev("x ^ 2.5", &x) - 0.3f64.powf(2.5)).abs() < 1e-15);
    assert!((ev("2 ^ x", &x) - 2f64.powf(0.3)).abs() < 1e-15);
}

#[test]
fn derivatives_through_fields() {
    // u = x² y + sin(y), ∇u = (2xy, x² + cos y), ∂²u = [[2y, 2x], [2x, −sin y]]
    let u = Expr::parse("x^2 * y + sin(y)", 2).unwrap().to_field();
    let (x, y) = (0.7, -0.4);
    let j = u.jet(&[x, y], 2).unwrap();
    let g = j.gradient();
    assert!((g[0] - 2.0 * x * y).abs() < 1e-14);
    assert!((g[1] - (x * x + y.cos())).abs() < 1e-14);
    assert!((j.d2(0, 0) - 2.0 * y).abs() < 1e-14);
    assert!((j.d2(0, 1) - 2.0 * x).abs() < 1e-14);
    assert!((j.d2(1, 1) + y.sin()).abs() < 1e-14);
}

#[test]
fn errors_carry_offsets() {
    let bad = [("1 +", 3), ("2 * (x", 6), ("foo(x)", 0), ("x 1", 2), ("1 $ 2", 2)];
    for (src, at) in bad {
        match Expr::parse(src, 1) {
            Err(Error::Expr { offset, .. }) => assert_eq!(offset, at, "{src}"),
            other => panic!("{src}: {other:?}"),
        }
    }
    let e = Expr::parse("x3", 2).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    assert!(e.to_string().contains("x3"), "{e}");
}

proptest! {
    #[test]
    fn polynomials_match_direct_evaluation(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let src = format!("({a}) * x^3 - ({b}) * x * y^2 + 4 * y - 1");
        let got = ev(&src, &[x, y]);
        let want = a * x.powi(3) - b * x * y * y + 4.0 * y - 1.0;
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn exp_ln_round_trip(x in 0.01f64..50.0) {
        let got = ev("exp(ln(x))", &[x]);
        prop_assert!((got - x).abs() <= 1e-13 * x);
    }

    #[test]
    fn gradient_of_gaussian(x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let u = Expr::parse("exp(-(x^2 + y^2) / 2)", 2).unwrap().to_field();
        let g = u.jet(&[x, y], 1).unwrap().gradient();
        let v = (-(x * x + y * y) / 2.0).exp();
        prop_assert!((g[0] + x * v).abs() <= 1e-14);
        prop_assert!((g[1] + y * v).abs() <= 1e-14);
    }
}
