//! Chart Hamiltonians, the Legendre transform and the built-in fixture zoo.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jets::{Jet, ScalarField};

/// Coordinate domain of a single chart.
#[derive(Clone, Debug, PartialEq)]
pub enum Chart {
    Whole,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { radius: f64 },
    Torus { lengths: Vec<f64> },
}

impl Chart {
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Chart::Whole | Chart::Torus { .. } => true,
            Chart::Box { lo, hi } => x.iter().zip(lo).zip(hi).all(|((v, l), h)| v > l && v < h),
            Chart::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() < radius * radius,
        }
    }
}

/// A point of the cotangent bundle in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentState {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl CotangentState {
    pub fn new(x: Vec<f64>, alpha: Vec<f64>) -> Self {
        CotangentState { x, alpha }
    }
    pub fn dim(&self) -> usize {
        self.x.len()
    }
    pub fn to_phase(&self) -> Vec<f64> {
        let mut z = self.x.clone();
        z.extend_from_slice(&self.alpha);
        z
    }
    pub fn from_phase(z: &[f64]) -> Self {
        let n = z.len() / 2;
        CotangentState { x: z[..n].to_vec(), alpha: z[n..].to_vec() }
    }
    pub fn on_zero_section(&self) -> bool {
        self.alpha.iter().all(|a| *a == 0.0)
    }
}

/// Reference measure `m = e^{-ς} dx`.
#[derive(Clone, Debug)]
pub struct WeightField {
    pub varsigma: ScalarField,
}

impl WeightField {
    pub fn new(varsigma: ScalarField) -> Self {
        WeightField { varsigma }
    }
    pub fn lebesgue(n: usize) -> Self {
        WeightField { varsigma: ScalarField::constant(n, 0.0) }
    }
    /// `ς = |x|²/2`.
    pub fn gaussian(n: usize) -> Self {
        WeightField::new(ScalarField::new(n, |x| {
            let s = crate::jets::sum(x.iter().map(|v| v * v).collect::<Vec<_>>().iter());
            s * 0.5
        }))
    }
}

/// Model behind a [`ChartHamiltonian`]: a jet oracle with an optional analytic gradient.
pub trait HamiltonianModel: Send + Sync {
    fn eval(&self, x: &[Jet], alpha: &[Jet]) -> Jet;
    /// `(H_x, H_α)` when a closed form exists.
    fn gradient(&self, _x: &[f64], _alpha: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

struct ClosureModel<F>(F);

impl<F> HamiltonianModel for ClosureModel<F>
where
    F: Fn(&[Jet], &[Jet]) -> Jet + Send + Sync,
{
    fn eval(&self, x: &[Jet], alpha: &[Jet]) -> Jet {
        (self.0)(x, alpha)
    }
}

#[derive(Clone)]
pub struct ChartHamiltonian {
    name: String,
    dim: usize,
    chart: Chart,
    zero_section_smooth: bool,
    vanishes_on_zero_section: bool,
    x_independent: bool,
    model: Arc<dyn HamiltonianModel>,
}

impl fmt::Debug for ChartHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartHamiltonian")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("chart", &self.chart)
            .field("zero_section_smooth", &self.zero_section_smooth)
            .finish()
    }
}

/// Jet of `H` in the `2n` phase variables `(x, α)`.
#[derive(Clone, Debug)]
pub struct PhaseJet {
    pub n: usize,
    pub jet: Jet,
}

impl PhaseJet {
    pub fn value(&self) -> f64 {
        self.jet.value()
    }
    pub fn hx(&self, i: usize) -> f64 {
        self.jet.d1(i)
    }
    pub fn ha(&self, i: usize) -> f64 {
        self.jet.d1(self.n + i)
    }
    pub fn hxx(&self, i: usize, j: usize) -> f64 {
        self.jet.d2(i, j)
    }
    /// `∂²H / ∂x^i ∂α_j`.
    pub fn hxa(&self, i: usize, j: usize) -> f64 {
        self.jet.d2(i, self.n + j)
    }
    pub fn haa(&self, i: usize, j: usize) -> f64 {
        self.jet.d2(self.n + i, self.n + j)
    }
    /// `∂³H / ∂α_i ∂α_j ∂x^k`.
    pub fn haax(&self, i: usize, j: usize, k: usize) -> f64 {
        self.jet.d3(self.n + i, self.n + j, k)
    }
    pub fn haaa(&self, i: usize, j: usize, k: usize) -> f64 {
        self.jet.d3(self.n + i, self.n + j, self.n + k)
    }
    /// `∂³H / ∂x^i ∂α_j ∂x^k`.
    pub fn hxax(&self, i: usize, j: usize, k: usize) -> f64 {
        self.jet.d3(i, self.n + j, k)
    }
    /// `∂³H / ∂x^i ∂α_j ∂α_k`.
    pub fn hxaa(&self, i: usize, j: usize, k: usize) -> f64 {
        self.jet.d3(i, self.n + j, self.n + k)
    }
    pub fn h_x(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.hx(i))
    }
    pub fn h_a(&self) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| self.ha(i))
    }
    pub fn h_aa(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.haa(i, j))
    }
    pub fn h_xa(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.hxa(i, j))
    }
    pub fn h_xx(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.hxx(i, j))
    }
    /// Time derivative of `H_{α_iα_j}` along the Hamiltonian flow.
    pub fn h_aa_dot(&self) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| self.haax(i, j, k) * self.ha(k) - self.haaa(i, j, k) * self.hx(k)).sum())
    }
    /// Jacobian of the Hamiltonian vector field in `(x, α)` block order.
    pub fn vector_field_jacobian(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.hxa(j, i);
                m[(i, n + j)] = self.haa(i, j);
                m[(n + i, j)] = -self.hxx(i, j);
                m[(n + i, n + j)] = -self.hxa(i, j);
            }
        }
        m
    }
}

impl ChartHamiltonian {
    pub fn new(name: &str, dim: usize, chart: Chart, zero_section_smooth: bool, model: Arc<dyn HamiltonianModel>) -> Self {
        ChartHamiltonian {
            name: name.to_string(),
            dim,
            chart,
            zero_section_smooth,
            vanishes_on_zero_section: true,
            x_independent: false,
            model,
        }
    }

    /// Hamiltonian from a jet closure `H(x, α)`.
    pub fn from_fn<F>(name: &str, dim: usize, chart: Chart, zero_section_smooth: bool, f: F) -> Self
    where
        F: Fn(&[Jet], &[Jet]) -> Jet + Send + Sync + 'static,
    {
        ChartHamiltonian::new(name, dim, chart, zero_section_smooth, Arc::new(ClosureModel(f)))
    }

    /// Marks `H(x, 0)` as possibly nonzero (potentials).
    pub fn with_potential_offset(mut self) -> Self {
        self.vanishes_on_zero_section = false;
        self
    }

    /// Declares that `H` does not depend on `x`.
    pub fn with_x_independence(mut self) -> Self {
        self.x_independent = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn chart(&self) -> &Chart {
        &self.chart
    }
    pub fn zero_section_smooth(&self) -> bool {
        self.zero_section_smooth
    }
    pub fn vanishes_on_zero_section(&self) -> bool {
        self.vanishes_on_zero_section
    }
    pub fn is_x_independent(&self) -> bool {
        self.x_independent
    }

    pub fn eval_jets(&self, x: &[Jet], alpha: &[Jet]) -> Jet {
        self.model.eval(x, alpha)
    }

    pub fn value(&self, x: &[f64], alpha: &[f64]) -> f64 {
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        let al: Vec<Jet> = alpha.iter().map(|&v| Jet::constant(v)).collect();
        self.model.eval(&xs, &al).value()
    }

    /// `(H_x, H_α)`, analytic when the model provides it.
    pub fn gradient(&self, x: &[f64], alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if let Some(g) = self.model.gradient(x, alpha) {
            return Ok(g);
        }
        self.jet_gradient(x, alpha)
    }

    /// `(H_x, H_α)` through jet arithmetic only.
    pub fn jet_gradient(&self, x: &[f64], alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let j = self.jet(x, alpha, 1)?;
        let n = self.dim;
        Ok(((0..n).map(|i| j.hx(i)).collect(), (0..n).map(|i| j.ha(i)).collect()))
    }

    /// Jet in all `2n` phase variables.
    pub fn jet(&self, x: &[f64], alpha: &[f64], order: u8) -> Result<PhaseJet> {
        let n = self.dim;
        if x.len() != n || alpha.len() != n {
            return Err(Error::InvalidArgument("state dimension mismatch"));
        }
        let mut point = x.to_vec();
        point.extend_from_slice(alpha);
        let jet = crate::jets::jet_eval(|v| self.model.eval(&v[..n], &v[n..]), &point, order)?;
        Ok(PhaseJet { n, jet })
    }

    /// Jet in the fibre variables `α` only.
    pub fn fibre_jet(&self, x: &[f64], alpha: &[f64], order: u8) -> Result<Jet> {
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(v)).collect();
        crate::jets::jet_eval(|a| self.model.eval(&xs, a), alpha, order)
    }

    pub fn h_aa(&self, x: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.fibre_jet(x, alpha, 2)?;
        let n = self.dim;
        Ok(DMatrix::from_fn(n, n, |i, k| j.d2(i, k)))
    }

    pub fn check_state(&self, s: &CotangentState) -> Result<()> {
        if s.x.len() != self.dim || s.alpha.len() != self.dim {
            return Err(Error::InvalidArgument("state dimension mismatch"));
        }
        if !self.chart.contains(&s.x) {
            return Err(Error::LeftChart { time: 0.0 });
        }
        if s.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("covector not finite"));
        }
        Ok(())
    }

    pub fn require_smooth_at(&self, alpha: &[f64]) -> Result<()> {
        if !self.zero_section_smooth && alpha.iter().all(|a| *a == 0.0) {
            return Err(Error::ZeroSection);
        }
        Ok(())
    }
}

/// Defects found by [`check_invariants`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    pub max_zero_section_value: f64,
    pub min_value_off_zero: f64,
    pub min_fibre_eigenvalue: f64,
}

/// Samples `H(x,0) = 0`, `H > 0` off the zero section and `H_αα ≻ 0`.
pub fn check_invariants(h: &ChartHamiltonian, points: &[CotangentState]) -> Result<InvariantReport> {
    let mut rep = InvariantReport { max_zero_section_value: 0.0, min_value_off_zero: f64::INFINITY, min_fibre_eigenvalue: f64::INFINITY };
    let zero = vec![0.0; h.dim()];
    for s in points {
        if h.vanishes_on_zero_section() {
            rep.max_zero_section_value = rep.max_zero_section_value.max(h.value(&s.x, &zero).abs());
        }
        if s.on_zero_section() {
            continue;
        }
        if h.vanishes_on_zero_section() {
            rep.min_value_off_zero = rep.min_value_off_zero.min(h.value(&s.x, &s.alpha));
        }
        let m = h.h_aa(&s.x, &s.alpha)?;
        let ev = m.symmetric_eigen().eigenvalues.min();
        rep.min_fibre_eigenvalue = rep.min_fibre_eigenvalue.min(ev);
    }
    if rep.max_zero_section_value > 1e-12 {
        return Err(Error::InvalidParameters(format!("H(x,0) = {:e}", rep.max_zero_section_value)));
    }
    if rep.min_value_off_zero <= 0.0 {
        return Err(Error::InvalidParameters("H not positive off the zero section".to_string()));
    }
    if rep.min_fibre_eigenvalue <= 0.0 {
        return Err(Error::InvalidParameters("H_aa not positive-definite".to_string()));
    }
    Ok(rep)
}

/// `v = H_α(x, α)`; the zero covector maps to the zero vector when `H` is not smooth there.
pub fn legendre_dual(h: &ChartHamiltonian, state: &CotangentState) -> Result<Vec<f64>> {
    if !h.zero_section_smooth() && state.on_zero_section() {
        return Ok(vec![0.0; h.dim()]);
    }
    Ok(h.gradient(&state.x, &state.alpha)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LegendreInverse {
    pub alpha: Vec<f64>,
    /// Set when `v = 0` and `H` is only C¹ on the zero section.
    pub degenerate: bool,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Solves `H_α(x, α) = v` by damped Newton with Armijo backtracking, starting at `α = v`.
pub fn legendre_inverse(h: &ChartHamiltonian, x: &[f64], v: &[f64]) -> Result<LegendreInverse> {
    let n = h.dim();
    if v.len() != n || x.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch"));
    }
    if norm(v) == 0.0 && !h.zero_section_smooth() {
        return Ok(LegendreInverse { alpha: vec![0.0; n], degenerate: true, iterations: 0 });
    }
    let scale = 1.0 + norm(v);
    let objective = |a: &[f64]| h.value(x, a) - a.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut alpha = ray_start(h, x, v).unwrap_or_else(|| v.to_vec());
    for it in 0..200 {
        if !h.zero_section_smooth() && norm(&alpha) == 0.0 {
            alpha = v.iter().map(|c| c * 1e-3).collect();
        }
        let j = h.fibre_jet(x, &alpha, 2)?;
        let g = DVector::from_fn(n, |i, _| j.d1(i) - v[i]);
        if g.norm() <= 1e-13 * scale {
            return Ok(LegendreInverse { alpha, degenerate: false, iterations: it });
        }
        let m = DMatrix::from_fn(n, n, |i, k| j.d2(i, k));
        let d = match m.clone().cholesky() {
            Some(c) => -c.solve(&g),
            None => -g.clone(),
        };
        let f0 = j.value() - alpha.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let slope = g.dot(&d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = alpha.iter().zip(d.iter()).map(|(a, s)| a + t * s).collect();
            let ft = objective(&trial);
            if ft.is_finite() && ft <= f0 + 1e-4 * t * slope + 1e-15 * f0.abs().max(1.0) {
                alpha = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let (_, ha) = h.gradient(x, &alpha)?;
    let residual = norm(&ha.iter().zip(v).map(|(a, b)| a - b).collect::<Vec<_>>());
    if residual <= 1e-10 * scale {
        return Ok(LegendreInverse { alpha, degenerate: false, iterations: 200 });
    }
    Err(Error::LegendreFailed { residual })
}

/// `s u` with `u = v/|v|` and `⟨H_α(s u), u⟩ = |v|`, which is monotone in `s` by convexity.
fn ray_start(h: &ChartHamiltonian, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
    let r = norm(v);
    if r == 0.0 {
        return None;
    }
    let u: Vec<f64> = v.iter().map(|c| c / r).collect();
    let phi = |s: f64| -> Option<f64> {
        let a: Vec<f64> = u.iter().map(|c| c * s).collect();
        let (_, ha) = h.gradient(x, &a).ok()?;
        let d: f64 = ha.iter().zip(&u).map(|(p, q)| p * q).sum::<f64>() - r;
        d.is_finite().then_some(d)
    };
    let (mut lo, mut hi) = (r, r);
    if phi(r)? < 0.0 {
        while phi(hi)? < 0.0 {
            hi *= 4.0;
            if hi > 1e150 {
                return None;
            }
        }
        lo = hi / 4.0;
    } else {
        while phi(lo)? >= 0.0 {
            lo /= 4.0;
            if lo < 1e-150 {
                return None;
            }
        }
        hi = lo * 4.0;
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if phi(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = (lo * hi).sqrt();
    Some(u.iter().map(|c| c * s).collect())
}

/// `L(x, v) = τ(v)(v) − H(x, τ(v))`.
pub fn lagrangian(h: &ChartHamiltonian, x: &[f64], v: &[f64]) -> Result<f64> {
    let inv = legendre_inverse(h, x, v)?;
    let pairing: f64 = inv.alpha.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok(pairing - h.value(x, &inv.alpha))
}

/// Dual (co-)Finsler norms `F*(x, α)` used to build fixtures.
#[derive(Clone, Debug, PartialEq)]
pub enum CoMetric {
    /// `|α|_G = √(αᵀGα)` with constant positive-definite `G = g⁻¹`.
    Constant(DMatrix<f64>),
    /// Round unit sphere in stereographic coordinates: `F* = ½(1+|x|²)|α|`.
    Sphere,
    /// Poincaré ball of curvature −1: `F* = ½(1−|x|²)|α|`.
    Hyperbolic,
    /// Randers co-metric `|α|_G + ⟨b, α⟩` with `bᵀG⁻¹b < 1`.
    Randers { g: DMatrix<f64>, b: Vec<f64> },
}

impl CoMetric {
    pub fn euclidean(n: usize) -> Self {
        CoMetric::Constant(DMatrix::identity(n, n))
    }

    pub fn is_riemannian(&self) -> bool {
        !matches!(self, CoMetric::Randers { .. })
    }

    fn conformal_factor(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            CoMetric::Sphere => Some((0.5 * (1.0 + r2), x.to_vec())),
            CoMetric::Hyperbolic => Some((0.5 * (1.0 - r2), x.iter().map(|v| -v).collect())),
            _ => None,
        }
    }

    fn conformal_jet(&self, x: &[Jet]) -> Option<Jet> {
        let r2 = crate::jets::sum(x.iter().map(|v| v * v).collect::<Vec<_>>().iter());
        match self {
            CoMetric::Sphere => Some((r2 + 1.0) * 0.5),
            CoMetric::Hyperbolic => Some((1.0 - r2) * 0.5),
            _ => None,
        }
    }

    fn quad_form(g: &DMatrix<f64>, a: &[Jet]) -> Jet {
        let n = a.len();
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if g[(i, j)] != 0.0 {
                    terms.push(&(&a[i] * &a[j]) * g[(i, j)]);
                }
            }
        }
        crate::jets::sum(terms.iter())
    }

    /// `½ F*²` for Riemannian co-metrics, smooth across the zero section.
    pub fn half_square_jet(&self, x: &[Jet], a: &[Jet]) -> Jet {
        match self {
            CoMetric::Constant(g) => CoMetric::quad_form(g, a) * 0.5,
            CoMetric::Sphere | CoMetric::Hyperbolic => {
                let lam = self.conformal_jet(x).unwrap();
                let s = crate::jets::sum(a.iter().map(|v| v * v).collect::<Vec<_>>().iter());
                &(&lam * &lam) * &s * 0.5
            }
            CoMetric::Randers { .. } => self.norm_jet(x, a).square() * 0.5,
        }
    }

    pub fn norm_jet(&self, x: &[Jet], a: &[Jet]) -> Jet {
        match self {
            CoMetric::Constant(g) => CoMetric::quad_form(g, a).sqrt(),
            CoMetric::Sphere | CoMetric::Hyperbolic => {
                let lam = self.conformal_jet(x).unwrap();
                let s = crate::jets::sum(a.iter().map(|v| v * v).collect::<Vec<_>>().iter());
                lam * s.sqrt()
            }
            CoMetric::Randers { g, b } => {
                let lin = crate::jets::sum(a.iter().zip(b).map(|(ai, bi)| ai * *bi).collect::<Vec<_>>().iter());
                CoMetric::quad_form(g, a).sqrt() + lin
            }
        }
    }

    /// `(F*, ∂_x F*, ∂_α F*)` at `α ≠ 0`.
    pub fn norm_gradient(&self, x: &[f64], a: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = a.len();
        match self {
            CoMetric::Constant(g) | CoMetric::Randers { g, .. } => {
                let av = DVector::from_column_slice(a);
                let ga = g * &av;
                let q = av.dot(&ga).sqrt();
                let mut f = q;
                let mut fa: Vec<f64> = ga.iter().map(|v| v / q).collect();
                if let CoMetric::Randers { b, .. } = self {
                    f += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
                    fa.iter_mut().zip(b).for_each(|(v, bi)| *v += bi);
                }
                (f, vec![0.0; n], fa)
            }
            CoMetric::Sphere | CoMetric::Hyperbolic => {
                let (lam, dlam) = self.conformal_factor(x).unwrap();
                let r = norm(a);
                (lam * r, dlam.iter().map(|d| d * r).collect(), a.iter().map(|v| lam * v / r).collect())
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let check_pd = |g: &DMatrix<f64>| -> Result<()> {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::InvalidParameters("metric has wrong shape".to_string()));
            }
            if (g - g.transpose()).amax() > 1e-12 {
                return Err(Error::InvalidParameters("metric not symmetric".to_string()));
            }
            if g.clone().cholesky().is_none() {
                return Err(Error::InvalidParameters("metric not positive-definite".to_string()));
            }
            Ok(())
        };
        match self {
            CoMetric::Constant(g) => check_pd(g),
            CoMetric::Sphere | CoMetric::Hyperbolic => Ok(()),
            CoMetric::Randers { g, b } => {
                check_pd(g)?;
                if b.len() != n {
                    return Err(Error::InvalidParameters("drift has wrong length".to_string()));
                }
                let ginv = g.clone().try_inverse().ok_or(Error::Singular)?;
                let bv = DVector::from_column_slice(b);
                let s = bv.dot(&(ginv * &bv));
                if s >= 1.0 {
                    return Err(Error::InvalidParameters(format!("Randers drift too large: |b|² = {s}")));
                }
                Ok(())
            }
        }
    }

    fn chart(&self, n: usize) -> Chart {
        match self {
            CoMetric::Hyperbolic => Chart::Ball { radius: 1.0 },
            _ => {
                let _ = n;
                Chart::Whole
            }
        }
    }
}

/// Convex deformation profile `h` with `h(0) = h'(0) = 0`, `h'' > 0` on `(0, ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `h(t) = (a t)²/2`.
    Quadratic { a: f64 },
    /// `h(t) = t^p / p`.
    Power { p: f64 },
    /// `h(t) = Σ c_k t^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl Profile {
    /// `[h, h', h'', h''']` at `t ≥ 0`.
    pub fn derivatives(&self, t: f64) -> [f64; 4] {
        match self {
            Profile::Quadratic { a } => {
                let a2 = a * a;
                [0.5 * a2 * t * t, a2 * t, a2, 0.0]
            }
            Profile::Power { p } => {
                let p = *p;
                if t == 0.0 {
                    let d2 = if p == 2.0 {
                        1.0
                    } else if p < 2.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    };
                    return [0.0, 0.0, d2, 0.0];
                }
                [t.powf(p) / p, t.powf(p - 1.0), (p - 1.0) * t.powf(p - 2.0), (p - 1.0) * (p - 2.0) * t.powf(p - 3.0)]
            }
            Profile::Polynomial { coeffs } => {
                let mut out = [0.0; 4];
                for (k, c) in coeffs.iter().enumerate() {
                    let k = k as i32;
                    for (d, slot) in out.iter_mut().enumerate() {
                        let d = d as i32;
                        if k >= d {
                            let falling: f64 = (0..d).map(|i| (k - i) as f64).product();
                            *slot += c * falling * t.powi(k - d);
                        }
                    }
                }
                out
            }
        }
    }

    /// `h'(s)/s`, the factor `c(α)` at `s = F*(α)`.
    pub fn speed_factor(&self, s: f64) -> f64 {
        self.derivatives(s)[1] / s
    }

    fn is_quadratic(&self) -> Option<f64> {
        match self {
            Profile::Quadratic { a } => Some(a * a),
            Profile::Power { p } if *p == 2.0 => Some(1.0),
            Profile::Polynomial { coeffs } if coeffs.iter().enumerate().all(|(k, c)| k == 2 || *c == 0.0) => {
                Some(2.0 * coeffs.get(2).copied().unwrap_or(0.0))
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Quadratic { a } if !(*a > 0.0 && a.is_finite()) => {
                return Err(Error::InvalidDeformation(format!("quadratic scale a = {a} must be positive")));
            }
            Profile::Power { p } if !(*p > 1.0 && p.is_finite()) => {
                return Err(Error::InvalidDeformation(format!("exponent p = {p} must exceed 1")));
            }
            Profile::Polynomial { coeffs } => {
                if coeffs.iter().take(2).any(|c| *c != 0.0) {
                    return Err(Error::InvalidDeformation("h(0) and h'(0) must vanish".to_string()));
                }
                if coeffs.last().is_none_or(|c| *c <= 0.0) || coeffs.len() < 3 {
                    return Err(Error::InvalidDeformation("leading coefficient must be positive".to_string()));
                }
            }
            _ => {}
        }
        let d0 = self.derivatives(0.0);
        if d0[0].abs() > 1e-14 || d0[1].abs() > 1e-14 {
            return Err(Error::InvalidDeformation("h(0) and h'(0) must vanish".to_string()));
        }
        for k in 1..=400 {
            let t = k as f64 * 0.05;
            if !(self.derivatives(t)[2] > 0.0) {
                return Err(Error::InvalidDeformation(format!("h'' not positive at t = {t}")));
            }
        }
        Ok(())
    }

    fn apply(&self, f: &Jet) -> Jet {
        f.chain(self.derivatives(f.value()))
    }
}

/// Scalar potential `Z(x)`.
#[derive(Clone, Debug)]
pub enum Potential {
    /// `Z = ½ Σ k_i (x^i)²`.
    Quadratic(Vec<f64>),
    Field(ScalarField),
}

impl Potential {
    fn jet(&self, x: &[Jet]) -> Jet {
        match self {
            Potential::Quadratic(k) => {
                let terms: Vec<Jet> = x.iter().zip(k).map(|(xi, ki)| &(xi * xi) * (0.5 * ki)).collect();
                crate::jets::sum(terms.iter())
            }
            Potential::Field(f) => f.eval_jets(x),
        }
    }
    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            Potential::Quadratic(k) => Some(x.iter().zip(k).map(|(xi, ki)| xi * ki).collect()),
            Potential::Field(_) => None,
        }
    }
}

/// `H = h(F*(x, α)) + Z(x)`.
struct Builtin {
    metric: CoMetric,
    profile: Profile,
    potential: Option<Potential>,
}

impl HamiltonianModel for Builtin {
    fn eval(&self, x: &[Jet], alpha: &[Jet]) -> Jet {
        let kinetic = match (self.metric.is_riemannian(), self.profile.is_quadratic()) {
            (true, Some(a2)) => self.metric.half_square_jet(x, alpha) * a2,
            _ => self.profile.apply(&self.metric.norm_jet(x, alpha)),
        };
        match &self.potential {
            Some(z) => kinetic + z.jet(x),
            None => kinetic,
        }
    }

    fn gradient(&self, x: &[f64], alpha: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = x.len();
        let (mut hx, ha) = if alpha.iter().all(|a| *a == 0.0) {
            (vec![0.0; n], vec![0.0; n])
        } else {
            let (f, fx, fa) = self.metric.norm_gradient(x, alpha);
            let hp = match (self.metric.is_riemannian(), self.profile.is_quadratic()) {
                (true, Some(a2)) => a2 * f,
                _ => self.profile.derivatives(f)[1],
            };
            (fx.iter().map(|v| hp * v).collect(), fa.iter().map(|v| hp * v).collect())
        };
        if let Some(z) = &self.potential {
            let g = z.gradient(x)?;
            hx.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        Some((hx, ha))
    }
}

fn build(name: &str, n: usize, metric: CoMetric, profile: Profile, potential: Option<Potential>) -> Result<ChartHamiltonian> {
    metric.validate(n)?;
    profile.validate()?;
    let smooth = metric.is_riemannian() && profile.is_quadratic().is_some();
    let chart = metric.chart(n);
    let x_indep = matches!(metric, CoMetric::Constant(_) | CoMetric::Randers { .. }) && potential.is_none();
    let has_pot = potential.is_some();
    let mut h = ChartHamiltonian::new(name, n, chart, smooth, Arc::new(Builtin { metric, profile, potential }));
    if has_pot {
        h = h.with_potential_offset();
    }
    if x_indep {
        h = h.with_x_independence();
    }
    Ok(h)
}

/// `H = |α|²/2` on `ℝⁿ`.
pub fn euclidean(n: usize) -> ChartHamiltonian {
    build("euclidean", n, CoMetric::euclidean(n), Profile::Quadratic { a: 1.0 }, None).expect("valid fixture")
}

/// `H = ½ αᵀGα` with `G` the inverse metric.
pub fn riemannian(g_inv: DMatrix<f64>) -> Result<ChartHamiltonian> {
    let n = g_inv.nrows();
    build("riemannian", n, CoMetric::Constant(g_inv), Profile::Quadratic { a: 1.0 }, None)
}

/// Round unit 2-sphere in stereographic coordinates.
pub fn sphere_chart() -> ChartHamiltonian {
    build("sphere_chart", 2, CoMetric::Sphere, Profile::Quadratic { a: 1.0 }, None).expect("valid fixture")
}

/// Hyperbolic plane of curvature −1 on the Poincaré disk.
pub fn hyperbolic_disk() -> ChartHamiltonian {
    build("hyperbolic_disk", 2, CoMetric::Hyperbolic, Profile::Quadratic { a: 1.0 }, None).expect("valid fixture")
}

/// `H = ½F*² + Z` with a Riemannian co-metric.
pub fn mechanical(metric: CoMetric, potential: Potential) -> Result<ChartHamiltonian> {
    if !metric.is_riemannian() {
        return Err(Error::InvalidParameters("mechanical Hamiltonians need a Riemannian metric".to_string()));
    }
    let n = match &metric {
        CoMetric::Constant(g) => g.nrows(),
        _ => 2,
    };
    if let Potential::Quadratic(k) = &potential {
        if k.len() != n {
            return Err(Error::InvalidParameters("potential has wrong length".to_string()));
        }
    }
    build("mechanical", n, metric, Profile::Quadratic { a: 1.0 }, Some(potential))
}

/// `H = (|α|² + |x|²)/2` on `ℝⁿ`.
pub fn harmonic_oscillator(n: usize) -> ChartHamiltonian {
    let mut h = mechanical(CoMetric::euclidean(n), Potential::Quadratic(vec![1.0; n])).expect("valid fixture");
    h.name = "harmonic_oscillator".to_string();
    h
}

/// `H = ½(|α|_G + ⟨b, α⟩)²`.
pub fn randers(g_inv: DMatrix<f64>, b: Vec<f64>) -> Result<ChartHamiltonian> {
    let n = g_inv.nrows();
    build("randers", n, CoMetric::Randers { g: g_inv, b }, Profile::Quadratic { a: 1.0 }, None)
}

/// `H = h ∘ F*`.
pub fn deformation(profile: Profile, metric: CoMetric) -> Result<ChartHamiltonian> {
    let n = metric_dim(&metric);
    build("deformation", n, metric, profile, None)
}

/// `H = F*^p / p`.
pub fn p_homogeneous(p: f64, metric: CoMetric) -> Result<ChartHamiltonian> {
    let n = metric_dim(&metric);
    build("p_homogeneous", n, metric, Profile::Power { p }, None)
}

fn metric_dim(m: &CoMetric) -> usize {
    match m {
        CoMetric::Constant(g) | CoMetric::Randers { g, .. } => g.nrows(),
        CoMetric::Sphere | CoMetric::Hyperbolic => 2,
    }
}
