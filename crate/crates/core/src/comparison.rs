//! Riccati evolution along Hamilton–Jacobi characteristics, Bochner–Weitzenböck,
//! Laplacian comparison and the measure contraction ratio.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::flow::{flow_interval, FlowOptions, FlowTrajectory};
use crate::frames::{
    canonical_frame, curvature_operator, midpoint, psi_along, psi_derivatives, weighted_curvature, FrameBundle, LOCAL_MARGIN,
};
use crate::hamiltonians::{ChartHamiltonian, CotangentState, WeightField};
use crate::jets::{compose, grid_derivatives, Jet, ScalarField};
use crate::laplacian::{hessian_from_parts, laplacian_hm_from_parts};

#[derive(Clone, Debug)]
pub struct RiccatiState {
    pub t: f64,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// `−B⁻¹A`.
    pub hess: DMatrix<f64>,
    /// `tr Hess − (ψ∘η)'`, the weighted Laplacian along the characteristic.
    pub trace_lap: f64,
}

/// Everything computed along one characteristic `t ↦ Φ_t(du_{x0})`.
#[derive(Clone, Debug)]
pub struct HjTransport {
    pub trajectory: FlowTrajectory,
    pub frame: FrameBundle,
    /// Index range of `[0, T]` inside the trajectory.
    pub first: usize,
    pub last: usize,
    /// `R(t)` for every index in `first..=last`.
    pub r: Vec<DMatrix<f64>>,
    pub states: Vec<RiccatiState>,
    /// `ψ(t)` at every trajectory index.
    pub psi: Vec<f64>,
    u_xx0: DMatrix<f64>,
}

fn coordinate_hessian_at(traj: &FlowTrajectory, u0: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let n = traj.dim();
    let jac = &traj.jacobians.as_ref().ok_or(Error::InvalidArgument("trajectory lacks jacobians"))?[k];
    let mut seed = DMatrix::zeros(2 * n, n);
    seed.view_mut((0, 0), (n, n)).fill_with_identity();
    seed.view_mut((n, 0), (n, n)).copy_from(u0);
    let xy = jac * seed;
    let x = xy.view((0, 0), (n, n)).into_owned();
    let y = xy.view((n, 0), (n, n)).into_owned();
    let xinv = x.lu().try_inverse().ok_or(Error::RiccatiBlowUp { time: traj.times[k] })?;
    let u = y * xinv;
    Ok((&u + u.transpose()) * 0.5)
}

impl HjTransport {
    /// Coordinate Hessian `∂²u_t` at `η(t_k)` from the Lagrangian graph `J_k (I, ∂²u_0)`.
    pub fn coordinate_hessian(&self, k: usize) -> Result<DMatrix<f64>> {
        coordinate_hessian_at(&self.trajectory, &self.u_xx0, k)
    }

    /// `Hess^H u_t(η(t_k))` from the coordinate Hessian, expressed in the transported frame.
    pub fn pointwise_hessian(&self, h: &ChartHamiltonian, k: usize) -> Result<DMatrix<f64>> {
        let s = &self.trajectory.states[k];
        let fresh = hessian_from_parts(h, &s.x, &s.alpha, &self.coordinate_hessian(k)?)?;
        let o = &self.frame.o[k];
        Ok(o * fresh * o.transpose())
    }

    /// `Δ^H_m u_t(η(t_k))` from the coordinate expansion.
    pub fn pointwise_laplacian(&self, h: &ChartHamiltonian, weight: &WeightField, k: usize) -> Result<f64> {
        let s = &self.trajectory.states[k];
        laplacian_hm_from_parts(h, weight, &s.x, &s.alpha, &self.coordinate_hessian(k)?)
    }

    pub fn state_at(&self, k: usize) -> &RiccatiState {
        &self.states[k - self.first]
    }
}

fn check_b(b: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let inv = b.clone().lu().try_inverse().ok_or(Error::RiccatiBlowUp { time: t })?;
    if !(inv.amax() < 1e8) {
        return Err(Error::RiccatiBlowUp { time: t });
    }
    Ok(inv)
}

/// Evolves `(A, B)` with `Ḃ = −A`, `Ȧ = BR` along the characteristic of `du_{x0}` on `[0, t_end]`.
pub fn hj_transport(
    h: &ChartHamiltonian,
    weight: &WeightField,
    u: &ScalarField,
    x0: &[f64],
    t_end: f64,
    opts: &FlowOptions,
) -> Result<HjTransport> {
    if !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("horizon must be nonnegative"));
    }
    let n = x0.len();
    let uj = u.jet(x0, 2)?;
    let du = uj.gradient();
    let u_xx0 = DMatrix::from_fn(n, n, |a, b| uj.d2(a, b));
    let hess0 = hessian_from_parts(h, x0, &du, &u_xx0)?;
    let state0 = CotangentState::new(x0.to_vec(), du);
    let margin = LOCAL_MARGIN as f64 / opts.steps_per_unit as f64;
    let traj = flow_interval(h, &state0, margin, t_end + margin, opts, true)?;
    let fb = canonical_frame(h, &traj)?;
    let first = traj.origin;
    let last = traj.index_of(t_end);
    let mut r = Vec::with_capacity(last - first + 1);
    for k in first..=last {
        r.push(curvature_operator(&fb, k)?.r);
    }
    let psi = psi_along(h, weight, &traj)?;
    let step = traj.step;
    let lap_at = |k: usize, hess: &DMatrix<f64>| -> Result<f64> { Ok(hess.trace() - psi_derivatives(&psi, k, step)?.0) };

    let mut a = -&hess0;
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut states = Vec::with_capacity(r.len());
    states.push(RiccatiState { t: 0.0, a: a.clone(), b: b.clone(), trace_lap: lap_at(first, &hess0)?, hess: hess0 });
    let rhs = |a: &DMatrix<f64>, b: &DMatrix<f64>, rr: &DMatrix<f64>| (b * rr, -a);
    for i in 0..r.len().saturating_sub(1) {
        let k = first + i;
        let dt = traj.times[k + 1] - traj.times[k];
        let rm = midpoint(&r, i, 1);
        let (ka1, kb1) = rhs(&a, &b, &r[i]);
        let (ka2, kb2) = rhs(&(&a + &ka1 * (0.5 * dt)), &(&b + &kb1 * (0.5 * dt)), &rm);
        let (ka3, kb3) = rhs(&(&a + &ka2 * (0.5 * dt)), &(&b + &kb2 * (0.5 * dt)), &rm);
        let (ka4, kb4) = rhs(&(&a + &ka3 * dt), &(&b + &kb3 * dt), &r[i + 1]);
        a += (ka1 + ka2 * 2.0 + ka3 * 2.0 + ka4) * (dt / 6.0);
        b += (kb1 + kb2 * 2.0 + kb3 * 2.0 + kb4) * (dt / 6.0);
        let t = traj.times[k + 1];
        let binv = check_b(&b, t)?;
        let hs = -(&binv * &a);
        let hs = (&hs + hs.transpose()) * 0.5;
        states.push(RiccatiState { t, a: a.clone(), b: b.clone(), trace_lap: lap_at(k + 1, &hs)?, hess: hs });
    }
    Ok(HjTransport { trajectory: traj, frame: fb, first, last, r, states, psi, u_xx0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiResidual {
    /// `max ‖∂_t Hess + Hess² + R‖_F`.
    pub matrix: f64,
    /// `max |∂_t Δ_m + ‖Hess‖²_HS + Ric_∞|`.
    pub trace: f64,
    /// `max ‖Hess_Riccati − Hess_pointwise‖` over the samples.
    pub evolution_gap: f64,
}

/// Residuals of the matrix Riccati equation and its weighted trace on `samples` points of `[0, T]`.
pub fn riccati_residual(
    h: &ChartHamiltonian,
    weight: &WeightField,
    u: &ScalarField,
    x0: &[f64],
    t_end: f64,
    samples: usize,
    opts: &FlowOptions,
) -> Result<RiccatiResidual> {
    let tr = hj_transport(h, weight, u, x0, t_end, opts)?;
    let n = x0.len();
    let step = tr.trajectory.step;
    let count = samples.max(1);
    let mut out = RiccatiResidual { matrix: 0.0, trace: 0.0, evolution_gap: 0.0 };
    for s in 0..=count {
        let k = tr.first + (tr.last - tr.first) * s / count;
        let mut hess_curve = Vec::with_capacity(9);
        let mut lap_curve = Vec::with_capacity(9);
        for j in k - 4..=k + 4 {
            let hs = tr.pointwise_hessian(h, j)?;
            hess_curve.push(hs.as_slice().to_vec());
            lap_curve.push(vec![tr.pointwise_laplacian(h, weight, j)?]);
        }
        let hess = DMatrix::from_column_slice(n, n, &hess_curve[4]);
        let (dh, _, _) = grid_derivatives(&hess_curve, 4, step)?;
        let dh = DMatrix::from_column_slice(n, n, &dh);
        let rr = &tr.r[k - tr.first];
        out.matrix = out.matrix.max((&dh + &hess * &hess + rr).norm());
        let (dl, _, _) = grid_derivatives(&lap_curve, 4, step)?;
        let (_, p2) = psi_derivatives(&tr.psi, k, step)?;
        let ric_inf = rr.trace() + p2;
        out.trace = out.trace.max((dl[0] + hess.norm_squared() + ric_inf).abs());
        out.evolution_gap = out.evolution_gap.max((&tr.state_at(k).hess - &hess).amax());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BochnerReport {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub ric_inf: f64,
    pub hess_hs2: f64,
    pub laplacian: f64,
    /// `(N, lhs − Ric_N − (Δ_m u)²/N)`.
    pub slack: Vec<(f64, f64)>,
}

/// Both sides of the Bochner–Weitzenböck identity at `x`, with the dimensional slack for each `N`.
pub fn bochner_residual(
    h: &ChartHamiltonian,
    weight: &WeightField,
    u: &ScalarField,
    x: &[f64],
    ns: &[f64],
    opts: &FlowOptions,
) -> Result<BochnerReport> {
    let n = x.len();
    let u3 = u.jet(x, 3)?;
    let du = u3.gradient();
    if du.iter().all(|v| *v == 0.0) {
        return Err(Error::HessianCritical);
    }
    let pj = h.jet(x, &du, 3)?;
    let s2 = weight.varsigma.jet(x, 2)?;
    // z(y) = (y, du_y) as second-order jets in y
    let mut inner = Jet::seed(x, 2);
    for k in 0..n {
        inner.push(u3.partial(k));
    }
    let at = |phase: &Jet| compose(phase, &inner).truncate(1);
    let f = compose(&pj.jet, &inner);
    let fj: Vec<Jet> = (0..n).map(|j| f.partial(j)).collect();
    let ha: Vec<Jet> = (0..n).map(|i| pj.jet.partial(n + i)).collect();
    let mut div = 0.0;
    let mut lap = Jet::constant(0.0);
    for i in 0..n {
        let mut vi = Jet::constant(0.0);
        for j in 0..n {
            let kij = at(&ha[i].partial(n + j));
            vi = vi + &kij * &fj[j];
            lap = lap + kij * u3.partial(i).partial(j);
        }
        div += vi.d1(i) - vi.value() * s2.d1(i);
        let sigma_i = s2.partial(i);
        lap = lap + at(&pj.jet.partial(i).partial(n + i)) - at(&ha[i]) * sigma_i;
    }
    let grad_u: Vec<f64> = (0..n).map(|i| pj.ha(i)).collect();
    let dlap: f64 = (0..n).map(|k| lap.d1(k) * grad_u[k]).sum();
    let lhs = div - dlap;

    let hess = hessian_from_parts(h, x, &du, &DMatrix::from_fn(n, n, |a, b| u3.d2(a, b)))?;
    let hess_hs2 = hess.norm_squared();
    let mut all_ns = vec![f64::INFINITY];
    all_ns.extend_from_slice(ns);
    let rep = weighted_curvature(h, weight, &CotangentState::new(x.to_vec(), du), &all_ns, opts)?;
    let ric_inf = rep.ric_n[0].1;
    let rhs = ric_inf + hess_hs2;
    let laplacian = lap.value();
    let slack = rep
        .ric_n
        .iter()
        .map(|&(nn, ric_n)| {
            let dim_term = if nn.is_infinite() { 0.0 } else { laplacian * laplacian / nn };
            (nn, lhs - ric_n - dim_term)
        })
        .collect();
    Ok(BochnerReport { lhs, rhs, defect: (lhs - rhs).abs(), ric_inf, hess_hs2, laplacian, slack })
}

/// `s_{K,N}(t)`.
pub fn s_kn(k: f64, big_n: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) || !(big_n > 0.0) {
        return Err(Error::InvalidArgument("need t ≥ 0 and N > 0"));
    }
    let c = k / big_n;
    if k > 0.0 {
        let r = c.sqrt();
        if t >= core::f64::consts::PI / r {
            return Err(Error::PastFocalTime);
        }
        Ok((r * t).sin() / r)
    } else if k == 0.0 {
        Ok(t)
    } else {
        let r = (-c).sqrt();
        Ok((r * t).sinh() / r)
    }
}

/// `N s'/s` of the model, the comparison bound.
pub fn comparison_bound(k: f64, big_n: f64, t: f64) -> Result<f64> {
    s_kn(k, big_n, t)?;
    Ok(big_n / t + big_n * cot_excess(k / big_n, t))
}

/// `√c cot(√c t) − 1/t`, continued to `c ≤ 0`; stable for small `t`.
fn cot_excess(c: f64, t: f64) -> f64 {
    let y2 = c * t * t;
    if y2.abs() < 1e-4 {
        return -c * t / 3.0 - c * c * t * t * t / 45.0 - 2.0 * c * c * c * t.powi(5) / 945.0;
    }
    if c > 0.0 {
        let r = c.sqrt();
        r / (r * t).tan() - 1.0 / t
    } else {
        let r = (-c).sqrt();
        r / (r * t).tanh() - 1.0 / t
    }
}

/// Inputs of a comparison run: curvature hypothesis `Ric_N ≥ K` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonSetup {
    pub n: usize,
    pub k: f64,
    pub big_n: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Number of directions in which the cone seed `I/t0` is singular.
    pub seed_rank: usize,
    pub max_step: f64,
}

impl ComparisonSetup {
    pub fn new(n: usize, k: f64, big_n: f64, t_end: f64) -> Self {
        ComparisonSetup { n, k, big_n, t0: 1e-6, t_end, seed_rank: n, max_step: 2e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `max (Δ(t) − N s'/s(t))`.
    pub worst_violation: f64,
    pub max_abs_gap: f64,
    pub focal_time: Option<f64>,
    /// `min (Ric_N(t) − K)` over the integration nodes.
    pub hypothesis_min: f64,
    pub times: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub bound: Vec<f64>,
    /// `ς∘η` up to a constant, integrated with the Riccati system.
    pub varsigma: Vec<f64>,
}

/// Integrates `Hess' = −Hess² − R(t)` from the cone seed and compares `Δ = tr Hess − ψ'` with `N s'/s`.
///
/// The state is `G = Hess − P/t` with `P` the seed projector, which stays bounded as `t ↓ 0`.
pub fn laplacian_comparison_check<R, W>(setup: &ComparisonSetup, r_oracle: R, weight_derivs: W) -> Result<ComparisonReport>
where
    R: Fn(f64) -> DMatrix<f64>,
    W: Fn(f64) -> (f64, f64),
{
    let n = setup.n;
    if setup.seed_rank > n || !(setup.t0 > 0.0) || !(setup.t_end > setup.t0) {
        return Err(Error::InvalidArgument("bad comparison setup"));
    }
    let mut p = DMatrix::<f64>::zeros(n, n);
    for i in n - setup.seed_rank..n {
        p[(i, i)] = 1.0;
    }
    let rank = setup.seed_rank as f64;
    let rhs = |t: f64, g: &DMatrix<f64>| -> DMatrix<f64> { -(&p * g + g * &p) / t - g * g - r_oracle(t) };
    let focal = if setup.k > 0.0 { Some(core::f64::consts::PI * (setup.big_n / setup.k).sqrt()) } else { None };
    let mut report = ComparisonReport {
        worst_violation: f64::NEG_INFINITY,
        max_abs_gap: 0.0,
        focal_time: None,
        hypothesis_min: f64::INFINITY,
        times: Vec::new(),
        laplacian: Vec::new(),
        bound: Vec::new(),
        varsigma: Vec::new(),
    };
    let mut t = setup.t0;
    let mut g = DMatrix::<f64>::zeros(n, n);
    let mut sig = rank * t.ln();
    let lap_of = |t: f64, g: &DMatrix<f64>| g.trace() - weight_derivs(t).0;
    loop {
        let rr = r_oracle(t);
        let (p1, p2) = weight_derivs(t);
        let hyp = crate::frames::ric_n_from_parts(rr.trace(), p1, p2, n, setup.big_n) - setup.k;
        report.hypothesis_min = report.hypothesis_min.min(hyp);
        let regular = lap_of(t, &g) + (rank - setup.big_n) / t;
        let excess = regular - setup.big_n * cot_excess(setup.k / setup.big_n, t);
        report.worst_violation = report.worst_violation.max(excess);
        report.max_abs_gap = report.max_abs_gap.max(excess.abs());
        report.times.push(t);
        report.laplacian.push(rank / t + lap_of(t, &g));
        report.bound.push(comparison_bound(setup.k, setup.big_n, t).unwrap_or(f64::NEG_INFINITY));
        report.varsigma.push(sig);
        if t >= setup.t_end * (1.0 - 1e-14) {
            break;
        }
        let mut dt = setup.max_step.min(0.01 * t).min(setup.t_end - t);
        if let Some(f) = focal {
            if t + dt >= f {
                report.focal_time = Some(f);
                break;
            }
            dt = dt.min(0.5 * (f - t));
        }
        let h2 = 0.5 * dt;
        let k1 = rhs(t, &g);
        let k2 = rhs(t + h2, &(&g + &k1 * h2));
        let k3 = rhs(t + h2, &(&g + &k2 * h2));
        let k4 = rhs(t + dt, &(&g + &k3 * dt));
        let l1 = lap_of(t, &g);
        let l2 = lap_of(t + h2, &(&g + &k1 * h2));
        let l3 = lap_of(t + h2, &(&g + &k2 * h2));
        let l4 = lap_of(t + dt, &(&g + &k3 * dt));
        g += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        sig += rank * ((t + dt) / t).ln() + (l1 + 2.0 * l2 + 2.0 * l3 + l4) * (dt / 6.0);
        t += dt;
        if !(g.amax() < 1e8) || !g.iter().all(|v| v.is_finite()) {
            report.focal_time = Some(t);
            break;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McpReport {
    pub non_increasing: bool,
    /// Largest step increase of `log(e^ς / s^N)`, scaled by `1 + |log ratio|`.
    pub worst_increase: f64,
    pub derivative_bound_holds: bool,
    /// `max ((ς∘η)' − N s'/s)`.
    pub worst_derivative_excess: f64,
    pub equivalent: bool,
}

/// Ratio `e^{ς∘η}/s_{K,N}^N` on a grid, and the pointwise trace bound `(ς∘η)' ≤ N s'/s`.
///
/// Without `varsigma_dot` the derivative comes from finite differences of the samples.
pub fn mcp_ratio_check(varsigma: &[f64], varsigma_dot: Option<&[f64]>, k: f64, big_n: f64, t_grid: &[f64]) -> Result<McpReport> {
    let m = t_grid.len();
    if m < 5 || varsigma.len() != m || varsigma_dot.is_some_and(|d| d.len() != m) {
        return Err(Error::ShapeMismatch);
    }
    if !t_grid.windows(2).all(|w| w[1] > w[0]) || !(t_grid[0] > 0.0) {
        return Err(Error::InvalidArgument("t grid must be positive and increasing"));
    }
    let log_ratio: Vec<f64> = t_grid.iter().zip(varsigma).map(|(t, s)| Ok(s - big_n * s_kn(k, big_n, *t)?.ln())).collect::<Result<_>>()?;
    let mut worst_increase = f64::NEG_INFINITY;
    for w in 0..m - 1 {
        let inc = (log_ratio[w + 1] - log_ratio[w]) / (1.0 + log_ratio[w].abs());
        worst_increase = worst_increase.max(inc);
    }
    let deriv: Vec<f64> = match varsigma_dot {
        Some(d) => d.to_vec(),
        None => (0..m).map(|i| nonuniform_derivative(t_grid, varsigma, i)).collect(),
    };
    let mut worst_derivative_excess = f64::NEG_INFINITY;
    for i in 0..m {
        let b = comparison_bound(k, big_n, t_grid[i])?;
        worst_derivative_excess = worst_derivative_excess.max((deriv[i] - b) / (1.0 + b.abs()));
    }
    let non_increasing = worst_increase <= 1e-8;
    let derivative_bound_holds = worst_derivative_excess <= 1e-5;
    Ok(McpReport {
        non_increasing,
        worst_increase,
        derivative_bound_holds,
        worst_derivative_excess,
        equivalent: non_increasing == derivative_bound_holds,
    })
}

/// Derivative of the Lagrange interpolant through the (up to) five nearest samples.
fn nonuniform_derivative(t: &[f64], f: &[f64], i: usize) -> f64 {
    let m = t.len();
    let lo = i.saturating_sub(2).min(m - 5);
    let idx: Vec<usize> = (lo..lo + 5).collect();
    let x = t[i];
    let mut d = 0.0;
    for &j in &idx {
        let mut denom = 1.0;
        for &l in &idx {
            if l != j {
                denom *= t[j] - t[l];
            }
        }
        let mut num = 0.0;
        for &skip in &idx {
            if skip == j {
                continue;
            }
            let mut prod = 1.0;
            for &l in &idx {
                if l != j && l != skip {
                    prod *= x - t[l];
                }
            }
            num += prod;
        }
        d += f[j] * num / denom;
    }
    d
}

/// `R(t)`, `(ψ∘η)'` and `(ψ∘η)''` sampled along one trajectory, interpolated on demand.
#[derive(Clone, Debug)]
pub struct CurvatureCurve {
    pub times: Vec<f64>,
    pub r: Vec<DMatrix<f64>>,
    pub psi: Vec<(f64, f64)>,
}

impl CurvatureCurve {
    /// Curvature along `t ↦ Φ_t(state)` for `t ∈ [0, t_end]`.
    pub fn along(h: &ChartHamiltonian, weight: &WeightField, state: &CotangentState, t_end: f64, opts: &FlowOptions) -> Result<Self> {
        let margin = LOCAL_MARGIN as f64 / opts.steps_per_unit as f64;
        let traj = flow_interval(h, state, margin, t_end + margin, opts, true)?;
        let fb = canonical_frame(h, &traj)?;
        let psi = psi_along(h, weight, &traj)?;
        let first = traj.origin;
        let last = traj.index_of(t_end);
        let mut out = CurvatureCurve { times: Vec::new(), r: Vec::new(), psi: Vec::new() };
        for k in first..=last {
            out.times.push(traj.times[k] - traj.times[first]);
            out.r.push(curvature_operator(&fb, k)?.r);
            out.psi.push(psi_derivatives(&psi, k, traj.step)?);
        }
        Ok(out)
    }

    fn stencil(&self, t: f64) -> ([usize; 4], [f64; 4]) {
        let m = self.times.len();
        let step = (self.times[m - 1] - self.times[0]) / (m - 1) as f64;
        let pos = ((t - self.times[0]) / step).floor() as isize;
        let lo = (pos - 1).clamp(0, m as isize - 4) as usize;
        let idx = [lo, lo + 1, lo + 2, lo + 3];
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (t - self.times[idx[b]]) / (self.times[idx[a]] - self.times[idx[b]]);
                }
            }
        }
        (idx, w)
    }

    pub fn r_at(&self, t: f64) -> DMatrix<f64> {
        let (idx, w) = self.stencil(t);
        let mut out = &self.r[idx[0]] * w[0];
        for a in 1..4 {
            out += &self.r[idx[a]] * w[a];
        }
        out
    }

    pub fn psi_at(&self, t: f64) -> (f64, f64) {
        let (idx, w) = self.stencil(t);
        let mut out = (0.0, 0.0);
        for a in 0..4 {
            out.0 += self.psi[idx[a]].0 * w[a];
            out.1 += self.psi[idx[a]].1 * w[a];
        }
        out
    }
}
