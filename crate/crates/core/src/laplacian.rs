//! Pointwise gradient, weighted divergence, Laplacians and the Hessian of a function.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::flow::FlowOptions;
use crate::frames::{local_trajectory, psi_along, psi_derivatives};
use crate::hamiltonians::{ChartHamiltonian, CotangentState, WeightField};
use crate::jets::{Jet, ScalarField};

/// Jet-valued vector field `V(x) = Σ V^i ∂_{x^i}`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    f: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(dim={})", self.dim)
    }
}

impl VectorField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        VectorField { dim, f: Arc::new(f) }
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.f)(x)
    }
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let seeds: Vec<Jet> = x.iter().map(|v| Jet::constant(*v)).collect();
        (self.f)(&seeds).iter().map(|j| j.value()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    pub v: Vec<f64>,
    /// `du_x = 0` where the gradient vector need not be differentiable.
    pub degenerate: bool,
}

fn du(u: &ScalarField, x: &[f64], order: u8) -> Result<Jet> {
    if u.dim() != x.len() {
        return Err(Error::InvalidArgument("dimension mismatch"));
    }
    u.jet(x, order)
}

/// `∇u = τ*(du)`.
pub fn gradient(h: &ChartHamiltonian, u: &ScalarField, x: &[f64]) -> Result<GradientVector> {
    let j = du(u, x, 1)?;
    let d = j.gradient();
    if d.iter().all(|v| *v == 0.0) {
        return Ok(GradientVector { v: vec![0.0; x.len()], degenerate: true });
    }
    let (_, ha) = h.gradient(x, &d)?;
    Ok(GradientVector { v: ha, degenerate: false })
}

/// `div_m V = Σ (∂_i V^i − V^i ∂_i ς)`.
pub fn divergence_m(v: &VectorField, weight: &WeightField, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let seeds = Jet::seed(x, 1);
    let comps = v.eval_jets(&seeds);
    let s = weight.varsigma.jet(x, 1)?;
    let mut out = 0.0;
    for i in 0..n {
        out += comps[i].d1(i) - comps[i].value() * s.d1(i);
    }
    if !out.is_finite() {
        return Err(Error::OutsideSmoothDomain);
    }
    Ok(out)
}

/// Weighted Laplacian from the first and second derivatives of `u` at `x`.
pub fn laplacian_hm_from_parts(h: &ChartHamiltonian, weight: &WeightField, x: &[f64], du: &[f64], uxx: &DMatrix<f64>) -> Result<f64> {
    let n = x.len();
    if !h.zero_section_smooth() && du.iter().all(|v| *v == 0.0) {
        return Err(Error::CriticalPoint);
    }
    let pj = h.jet(x, du, 2)?;
    let s = weight.varsigma.jet(x, 1)?;
    let mut out = 0.0;
    for i in 0..n {
        out += pj.hxa(i, i) - pj.ha(i) * s.d1(i);
        for j in 0..n {
            out += pj.haa(i, j) * uxx[(i, j)];
        }
    }
    Ok(out)
}

/// `Δ^H_m u(x)` from the coordinate expansion.
pub fn laplacian_hm(h: &ChartHamiltonian, weight: &WeightField, u: &ScalarField, x: &[f64]) -> Result<f64> {
    let j = du(u, x, 2)?;
    let n = x.len();
    let uxx = DMatrix::from_fn(n, n, |a, b| j.d2(a, b));
    laplacian_hm_from_parts(h, weight, x, &j.gradient(), &uxx)
}

/// Hessian matrix in the frame normalizing `H_αα(du_x)` to the identity.
pub fn hessian_from_parts(h: &ChartHamiltonian, x: &[f64], du: &[f64], uxx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if du.iter().all(|v| *v == 0.0) {
        return Err(Error::HessianCritical);
    }
    let pj = h.jet(x, du, 3)?;
    let m = pj.h_aa();
    let chol = m.cholesky().ok_or(Error::ConvexityViolated { time: 0.0 })?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::Singular)?;
    let lt = l.transpose();
    let p = &lt * pj.h_xa() * linv.transpose();
    let mdot = &linv * pj.h_aa_dot() * linv.transpose();
    let ut = &lt * uxx * &l;
    let hess = (&p + p.transpose()) * 0.5 - mdot * 0.5 + ut;
    Ok((&hess + hess.transpose()) * 0.5)
}

/// `Hess^H u(x)`.
pub fn hessian_h(h: &ChartHamiltonian, u: &ScalarField, x: &[f64]) -> Result<DMatrix<f64>> {
    let j = du(u, x, 2)?;
    let n = x.len();
    let uxx = DMatrix::from_fn(n, n, |a, b| j.d2(a, b));
    hessian_from_parts(h, x, &j.gradient(), &uxx)
}

/// `Δ^H u(x)`, the trace of the Hessian.
pub fn laplacian_h_unweighted(h: &ChartHamiltonian, u: &ScalarField, x: &[f64]) -> Result<f64> {
    Ok(hessian_h(h, u, x)?.trace())
}

/// `(ψ∘η)'(0)` along the trajectory through `du_x`.
pub fn psi_drift(h: &ChartHamiltonian, weight: &WeightField, u: &ScalarField, x: &[f64], opts: &FlowOptions) -> Result<f64> {
    let j = du(u, x, 1)?;
    let state = CotangentState::new(x.to_vec(), j.gradient());
    let traj = local_trajectory(h, &state, opts, false)?;
    let psi = psi_along(h, weight, &traj)?;
    Ok(psi_derivatives(&psi, traj.origin, traj.step)?.0)
}

/// Duality defect `|du(∇u) − H(du) − L(∇u)|`.
pub fn duality_defect(h: &ChartHamiltonian, u: &ScalarField, x: &[f64]) -> Result<f64> {
    let d = du(u, x, 1)?.gradient();
    let g = gradient(h, u, x)?;
    let pairing: f64 = d.iter().zip(&g.v).map(|(a, b)| a * b).sum();
    let l = crate::hamiltonians::lagrangian(h, x, &g.v)?;
    Ok((pairing - h.value(x, &d) - l).abs())
}
