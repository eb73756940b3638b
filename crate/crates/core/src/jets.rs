//! Truncated third-order Taylor jets and Richardson-extrapolated curve derivatives.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// A multivariate Taylor jet truncated at order 3.
///
/// Jets of order 0 carry no derivative storage and stand for constants; they mix
/// freely with jets of any order. Derivative tensors are stored densely and are
/// symmetric because every operation produces them symmetrically.
#[derive(Clone, PartialEq)]
pub struct Jet {
    nvars: usize,
    order: u8,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value)
            .field("grad", &self.grad)
            .field("hess", &self.hess)
            .field("third", &self.third)
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet { nvars: 0, order: 0, value, grad: Vec::new(), hess: Vec::new(), third: Vec::new() }
    }

    /// The coordinate function `x_index` at `value`, differentiated up to `order`.
    pub fn variable(value: f64, index: usize, nvars: usize, order: u8) -> Self {
        assert!(index < nvars && order <= 3);
        if order == 0 {
            return Jet::constant(value);
        }
        let mut j = Jet::zeros(nvars, order);
        j.value = value;
        j.grad[index] = 1.0;
        j
    }

    /// Seeds `point.len()` independent variables.
    pub fn seed(point: &[f64], order: u8) -> Vec<Jet> {
        let n = point.len();
        point.iter().enumerate().map(|(i, &p)| Jet::variable(p, i, n, order)).collect()
    }

    fn zeros(nvars: usize, order: u8) -> Self {
        let n = nvars;
        Jet {
            nvars,
            order,
            value: 0.0,
            grad: if order >= 1 { vec![0.0; n] } else { Vec::new() },
            hess: if order >= 2 { vec![0.0; n * n] } else { Vec::new() },
            third: if order >= 3 { vec![0.0; n * n * n] } else { Vec::new() },
        }
    }

    pub fn order(&self) -> u8 {
        self.order
    }
    pub fn nvars(&self) -> usize {
        self.nvars
    }
    pub fn value(&self) -> f64 {
        self.value
    }
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
            && self.third.iter().all(|v| v.is_finite())
    }

    pub fn d1(&self, i: usize) -> f64 {
        if self.order >= 1 {
            self.grad[i]
        } else {
            0.0
        }
    }
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if self.order >= 2 {
            self.hess[i * self.nvars + j]
        } else {
            0.0
        }
    }
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order >= 3 {
            let n = self.nvars;
            self.third[(i * n + j) * n + k]
        } else {
            0.0
        }
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.nvars).map(|i| self.d1(i)).collect()
    }

    /// Row-major Hessian.
    pub fn hessian(&self) -> Vec<f64> {
        let n = self.nvars;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.d2(i, j);
            }
        }
        out
    }

    /// Jet of the partial derivative along variable `k`, one order lower.
    pub fn partial(&self, k: usize) -> Jet {
        if self.order == 0 {
            return Jet::constant(0.0);
        }
        let n = self.nvars;
        let mut r = Jet::zeros(n, self.order - 1);
        r.value = self.grad[k];
        if r.order >= 1 {
            for i in 0..n {
                r.grad[i] = self.d2(k, i);
            }
        }
        if r.order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    r.hess[i * n + j] = self.d3(k, i, j);
                }
            }
        }
        r
    }

    /// Drops derivatives above `order`.
    pub fn truncate(&self, order: u8) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        if order == 0 {
            return Jet::constant(self.value);
        }
        let mut r = self.clone();
        r.order = order;
        if order < 3 {
            r.third = Vec::new();
        }
        if order < 2 {
            r.hess = Vec::new();
        }
        r
    }

    fn shape_with(&self, other: &Jet) -> (usize, u8) {
        let order = self.order.max(other.order);
        let nvars = if self.order == 0 {
            other.nvars
        } else {
            if other.order != 0 {
                debug_assert_eq!(self.nvars, other.nvars, "jets over different variable sets");
            }
            self.nvars
        };
        (nvars, order)
    }

    fn fill_hess<F: FnMut(usize, usize) -> f64>(&mut self, mut f: F) {
        let n = self.nvars;
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                self.hess[i * n + j] = v;
                self.hess[j * n + i] = v;
            }
        }
    }

    fn fill_third<F: FnMut(usize, usize, usize) -> f64>(&mut self, mut f: F) {
        let n = self.nvars;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let v = f(i, j, k);
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        self.third[(a * n + b) * n + c] = v;
                    }
                }
            }
        }
    }

    fn scale(&self, s: f64) -> Jet {
        let mut r = self.clone();
        r.value *= s;
        r.grad.iter_mut().for_each(|v| *v *= s);
        r.hess.iter_mut().for_each(|v| *v *= s);
        r.third.iter_mut().for_each(|v| *v *= s);
        r
    }

    fn add_jet(&self, other: &Jet, sign: f64) -> Jet {
        let (n, order) = self.shape_with(other);
        let mut r = Jet::zeros(n, order);
        r.value = self.value + sign * other.value;
        for (slot, a, b) in
            [(&mut r.grad, &self.grad, &other.grad), (&mut r.hess, &self.hess, &other.hess), (&mut r.third, &self.third, &other.third)]
        {
            for (idx, v) in slot.iter_mut().enumerate() {
                *v = a.get(idx).copied().unwrap_or(0.0) + sign * b.get(idx).copied().unwrap_or(0.0);
            }
        }
        r
    }

    fn mul_jet(&self, b: &Jet) -> Jet {
        if self.order == 0 {
            return b.scale(self.value);
        }
        if b.order == 0 {
            return self.scale(b.value);
        }
        let a = self;
        let (n, order) = a.shape_with(b);
        let mut r = Jet::zeros(n, order);
        r.value = a.value * b.value;
        for i in 0..n {
            r.grad[i] = a.d1(i) * b.value + a.value * b.d1(i);
        }
        if order >= 2 {
            r.fill_hess(|i, j| a.d2(i, j) * b.value + a.d1(i) * b.d1(j) + a.d1(j) * b.d1(i) + a.value * b.d2(i, j));
        }
        if order >= 3 {
            r.fill_third(|i, j, k| {
                a.d3(i, j, k) * b.value
                    + a.d2(i, j) * b.d1(k)
                    + a.d2(i, k) * b.d1(j)
                    + a.d2(j, k) * b.d1(i)
                    + a.d1(i) * b.d2(j, k)
                    + a.d1(j) * b.d2(i, k)
                    + a.d1(k) * b.d2(i, j)
                    + a.value * b.d3(i, j, k)
            });
        }
        r
    }

    /// Composes a univariate function given its derivatives `[f, f', f'', f''']` at `self.value`.
    pub fn chain(&self, f: [f64; 4]) -> Jet {
        let u = self;
        let n = u.nvars;
        let mut r = Jet::zeros(n, u.order);
        r.value = f[0];
        if u.order >= 1 {
            for i in 0..n {
                r.grad[i] = f[1] * u.d1(i);
            }
        }
        if u.order >= 2 {
            r.fill_hess(|i, j| f[2] * u.d1(i) * u.d1(j) + f[1] * u.d2(i, j));
        }
        if u.order >= 3 {
            r.fill_third(|i, j, k| {
                f[3] * u.d1(i) * u.d1(j) * u.d1(k)
                    + f[2] * (u.d2(i, j) * u.d1(k) + u.d2(i, k) * u.d1(j) + u.d2(j, k) * u.d1(i))
                    + f[1] * u.d3(i, j, k)
            });
        }
        r
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain([s, c, -s, -c])
    }
    pub fn cos(&self) -> Jet {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain([c, -s, -c, s])
    }
    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.chain([e; 4])
    }
    pub fn ln(&self) -> Jet {
        let x = self.value;
        self.chain([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }
    pub fn sqrt(&self) -> Jet {
        let x = self.value;
        let s = x.sqrt();
        self.chain([s, 0.5 / s, -0.25 / (s * x), 0.375 / (s * x * x)])
    }
    pub fn recip(&self) -> Jet {
        let x = self.value;
        let r = 1.0 / x;
        self.chain([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }
    pub fn powf(&self, p: f64) -> Jet {
        let x = self.value;
        self.chain([x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0), p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0)])
    }
    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value;
        let p = k as f64;
        let pw = |e: i32| if e < 0 && x == 0.0 { 0.0 } else { x.powi(e) };
        self.chain([pw(k), p * pw(k - 1), p * (p - 1.0) * pw(k - 2), p * (p - 1.0) * (p - 2.0) * pw(k - 3)])
    }
    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain([s, c, s, c])
    }
    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value.sinh(), self.value.cosh());
        self.chain([c, s, c, s])
    }
    pub fn tanh(&self) -> Jet {
        let t = self.value.tanh();
        let s2 = 1.0 - t * t;
        self.chain([t, s2, -2.0 * t * s2, s2 * (6.0 * t * t - 2.0)])
    }
    pub fn square(&self) -> Jet {
        self * self
    }
}

/// Jet of `outer ∘ inner` where `outer` is a jet in `inner.len()` variables and every
/// `inner` component is a jet in a common set of variables.
pub fn compose(outer: &Jet, inner: &[Jet]) -> Jet {
    let m = inner.len();
    let inner_order = inner.iter().map(|j| j.order).max().unwrap_or(0);
    let n = inner.iter().find(|j| j.order > 0).map(|j| j.nvars).unwrap_or(0);
    let order = outer.order.min(inner_order);
    if order == 0 || n == 0 {
        return Jet::constant(outer.value);
    }
    let mut r = Jet::zeros(n, order);
    r.value = outer.value;
    for a in 0..n {
        r.grad[a] = (0..m).map(|p| outer.d1(p) * inner[p].d1(a)).sum();
    }
    if order >= 2 {
        r.fill_hess(|a, b| {
            let mut s = 0.0;
            for p in 0..m {
                s += outer.d1(p) * inner[p].d2(a, b);
                for q in 0..m {
                    s += outer.d2(p, q) * inner[p].d1(a) * inner[q].d1(b);
                }
            }
            s
        });
    }
    if order >= 3 {
        r.fill_third(|a, b, c| {
            let mut s = 0.0;
            for p in 0..m {
                let zp = &inner[p];
                s += outer.d1(p) * zp.d3(a, b, c);
                for q in 0..m {
                    let zq = &inner[q];
                    s += outer.d2(p, q) * (zp.d2(a, b) * zq.d1(c) + zp.d2(a, c) * zq.d1(b) + zp.d2(b, c) * zq.d1(a));
                    for rr in 0..m {
                        s += outer.d3(p, q, rr) * zp.d1(a) * zq.d1(b) * inner[rr].d1(c);
                    }
                }
            }
            s
        });
    }
    r
}

macro_rules! impl_binops {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
        impl $tr<f64> for Jet {
            type Output = Jet;
            fn $m(self, rhs: f64) -> Jet {
                (&self).$m(&Jet::constant(rhs))
            }
        }
        impl $tr<f64> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: f64) -> Jet {
                self.$m(&Jet::constant(rhs))
            }
        }
        impl $tr<Jet> for f64 {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&Jet::constant(self)).$m(&rhs)
            }
        }
        impl $tr<&Jet> for f64 {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&Jet::constant(self)).$m(rhs)
            }
        }
    };
}

impl_binops!(Add, add, |a, b| a.add_jet(b, 1.0));
impl_binops!(Sub, sub, |a, b| a.add_jet(b, -1.0));
impl_binops!(Mul, mul, |a, b| a.mul_jet(b));
impl_binops!(Div, div, |a, b| if b.order == 0 { a.scale(1.0 / b.value) } else { a.mul_jet(&b.recip()) });

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of a sequence of jets (a constant zero when empty).
pub fn sum<'a, I: IntoIterator<Item = &'a Jet>>(items: I) -> Jet {
    items.into_iter().fold(Jet::constant(0.0), |acc, j| acc + j)
}

/// Jet-valued function of `dim` variables, evaluated through truncated Taylor arithmetic.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    f: Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField(dim={})", self.dim)
    }
}

impl ScalarField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        ScalarField { dim, f: Arc::new(f) }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::new(dim, move |_| Jet::constant(c))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Jet {
        (self.f)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let seeds: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        (self.f)(&seeds).value()
    }

    pub fn jet(&self, x: &[f64], order: u8) -> Result<Jet> {
        jet_eval(|v| (self.f)(v), x, order)
    }
}

/// Evaluates `f` at `point` with all partial derivatives up to `order`.
pub fn jet_eval<F>(f: F, point: &[f64], order: u8) -> Result<Jet>
where
    F: Fn(&[Jet]) -> Jet,
{
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidArgument("jet order must be 1, 2 or 3"));
    }
    let seeds = Jet::seed(point, order);
    let mut j = f(&seeds);
    if j.order == 0 {
        // constant result: widen to the requested shape
        let v = j.value;
        j = Jet::zeros(point.len(), order);
        j.value = v;
    }
    if !j.is_finite() {
        return Err(Error::OutsideSmoothDomain);
    }
    Ok(j)
}

/// First and second derivatives of a curve with their Richardson error estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveDerivatives {
    pub d1: f64,
    pub d1_err: f64,
    pub d2: f64,
    pub d2_err: f64,
}

/// Default base step for [`curve_derivatives`] at `t0`.
pub fn default_step(t0: f64) -> f64 {
    1e-3 * (1.0 + t0.abs())
}

/// Richardson combination of central differences taken with steps `h`, `2h`, `4h`.
///
/// `plus[k]` and `minus[k]` hold `g(t0 ± 2^k h)`.
pub fn richardson(center: f64, plus: [f64; 3], minus: [f64; 3], h: f64) -> CurveDerivatives {
    let mut d1 = [0.0; 3];
    let mut d2 = [0.0; 3];
    for k in 0..3 {
        let s = h * (1u32 << k) as f64;
        d1[k] = (plus[k] - minus[k]) / (2.0 * s);
        d2[k] = ((plus[k] - center) + (minus[k] - center)) / (s * s);
    }
    let level = |d: [f64; 3]| {
        let fine = (4.0 * d[0] - d[1]) / 3.0;
        let coarse = (4.0 * d[1] - d[2]) / 3.0;
        let best = (16.0 * fine - coarse) / 15.0;
        (best, (best - fine).abs())
    };
    let (a, ae) = level(d1);
    let (b, be) = level(d2);
    CurveDerivatives { d1: a, d1_err: ae, d2: b, d2_err: be }
}

/// Derivatives of `g` at `t0` from central differences with steps `h0, 2h0, 4h0` and two
/// Richardson levels. `g` must be smooth on `[t0 − 4h0, t0 + 4h0]`.
pub fn curve_derivatives<G>(mut g: G, t0: f64, h0: Option<f64>, tol: Option<f64>) -> Result<CurveDerivatives>
where
    G: FnMut(f64) -> f64,
{
    let h = h0.unwrap_or_else(|| default_step(t0));
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    let c = g(t0);
    let mut plus = [0.0; 3];
    let mut minus = [0.0; 3];
    for k in 0..3 {
        let s = h * (1u32 << k) as f64;
        plus[k] = g(t0 + s);
        minus[k] = g(t0 - s);
    }
    let d = richardson(c, plus, minus, h);
    if let Some(tol) = tol {
        let err = d.d1_err.max(d.d2_err);
        if !(err <= tol) {
            return Err(Error::StepUnresolvable { estimate: err });
        }
    }
    Ok(d)
}

/// Componentwise derivatives of a vector-valued sequence sampled on a uniform grid.
///
/// Uses samples at offsets `±1, ±2, ±4` around `k`; `step` is the grid spacing.
pub fn grid_derivatives(samples: &[Vec<f64>], k: usize, step: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if k < 4 || k + 4 >= samples.len() {
        return Err(Error::InvalidArgument("grid derivative needs four samples of margin"));
    }
    let dim = samples[k].len();
    let mut d1 = vec![0.0; dim];
    let mut d2 = vec![0.0; dim];
    let mut err: f64 = 0.0;
    for c in 0..dim {
        let plus = [samples[k + 1][c], samples[k + 2][c], samples[k + 4][c]];
        let minus = [samples[k - 1][c], samples[k - 2][c], samples[k - 4][c]];
        let d = richardson(samples[k][c], plus, minus, step);
        d1[c] = d.d1;
        d2[c] = d.d2;
        err = err.max(d.d1_err).max(d.d2_err);
    }
    Ok((d1, d2, err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule_third_order() {
        // f = x^2 y at (2, 3)
        let v = Jet::seed(&[2.0, 3.0], 3);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert_eq!(f.value(), 12.0);
        assert_eq!(f.d1(0), 12.0);
        assert_eq!(f.d1(1), 4.0);
        assert_eq!(f.d2(0, 0), 6.0);
        assert_eq!(f.d2(0, 1), 4.0);
        assert_eq!(f.d3(0, 0, 1), 2.0);
        assert_eq!(f.d3(0, 1, 0), 2.0);
        assert_eq!(f.d3(0, 0, 0), 0.0);
    }

    #[test]
    fn partial_of_jet() {
        let v = Jet::seed(&[1.0, 2.0], 3);
        let f = (&v[0] * &v[1]).sin();
        let p = f.partial(1);
        // d/dy sin(xy) = x cos(xy)
        assert!((p.value() - 2f64.cos()).abs() < 1e-15);
        // d/dx of x cos(xy) = cos(xy) - xy sin(xy)
        assert!((p.d1(0) - (2f64.cos() - 2.0 * 2f64.sin())).abs() < 1e-14);
    }

    #[test]
    fn richardson_is_exact_on_quintics() {
        let d = curve_derivatives(|t| t.powi(5), 0.5, Some(0.01), None).unwrap();
        assert!((d.d1 - 5.0 * 0.5f64.powi(4)).abs() < 1e-11);
        assert!((d.d2 - 20.0 * 0.5f64.powi(3)).abs() < 1e-8);
    }
}
