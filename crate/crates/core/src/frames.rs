//! Canonical frames along Hamiltonian trajectories and the curvature they carry.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::flow::{flow_interval, omega, FlowOptions, FlowTrajectory};
use crate::hamiltonians::{ChartHamiltonian, CoMetric, CotangentState, Profile, WeightField};
use crate::jets::grid_derivatives;

/// Below this size `(ψ∘η)'(0)` counts as zero in the `N = n` branch of `Ric_N`.
pub const ZERO_DRIFT_TOL: f64 = 1e-9;

/// Number of grid steps kept on each side of a point where curvature is extracted.
pub const LOCAL_MARGIN: usize = 8;

/// Time-dependent orthogonal re-gauging `t ↦ (Q(t), Q'(t))` of the vertical frame.
pub type Gauge = Arc<dyn Fn(f64) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync>;

#[derive(Clone, Debug)]
pub struct FrameBundle {
    pub trajectory: FlowTrajectory,
    /// Columns `ξ_i(t)`.
    pub xi: Vec<DMatrix<f64>>,
    pub xi_dot: Vec<DMatrix<f64>>,
    /// Columns `ē_i(t) = J(t)⁻¹ (0, ξ_i(t))`.
    pub ebar: Vec<DMatrix<f64>>,
    pub ebar_dot: Vec<DMatrix<f64>>,
    pub omega: Vec<DMatrix<f64>>,
    pub o: Vec<DMatrix<f64>>,
    /// Columns `e_i(t) = Σ_j O_ij ē_j`.
    pub e: Vec<DMatrix<f64>>,
    pub e_dot: Vec<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameDefects {
    /// `max |ω(ė_i, e_j) − δ_ij|`.
    pub duality: f64,
    /// `max |ω(e_i, e_j)|`.
    pub lagrangian: f64,
    /// `max ‖OᵀO − I‖`.
    pub orthogonality: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureRoute {
    FrameSecondDerivative,
    CoordinateFormula,
}

#[derive(Clone, Debug)]
pub struct CurvatureReport {
    /// `R_ij` with `−ë_i = Σ_j R_ij e_j`.
    pub r: DMatrix<f64>,
    pub ric: f64,
    /// `(N, Ric_N)` pairs when a weight was supplied.
    pub ric_n: Vec<(f64, f64)>,
    /// `((ψ∘η)'(0), (ψ∘η)''(0))` when a weight was supplied.
    pub psi_derivs: Option<(f64, f64)>,
    pub route: CurvatureRoute,
    /// Size of the `ė` components of `ë` (zero for a canonical frame).
    pub vertical_defect: f64,
    pub fd_error: f64,
}

impl CurvatureReport {
    pub fn symmetry_defect(&self) -> f64 {
        (&self.r - self.r.transpose()).amax()
    }
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

fn lower_half(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i > j {
            x[(i, j)]
        } else if i == j {
            0.5 * x[(i, j)]
        } else {
            0.0
        }
    })
}

/// `ξ = chol(H_αα)^{-T}` and its analytic time derivative at one state.
pub fn vertical_frame_at(h: &ChartHamiltonian, s: &CotangentState, time: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pj = h.jet(&s.x, &s.alpha, 3)?;
    let m = pj.h_aa();
    let mdot = pj.h_aa_dot();
    let chol = m.cholesky().ok_or(Error::ConvexityViolated { time })?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(Error::ConvexityViolated { time })?;
    let xi = linv.transpose();
    let ldot = &l * lower_half(&(&linv * mdot * &xi));
    let xi_dot = -(&xi * ldot.transpose() * &xi);
    Ok((xi, xi_dot))
}

/// Vertical orthonormal frame `ξ(t)` (columns) and `ξ'(t)` along a trajectory.
pub fn vertical_frame(h: &ChartHamiltonian, traj: &FlowTrajectory) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let mut xs = Vec::with_capacity(traj.len());
    let mut ds = Vec::with_capacity(traj.len());
    for (s, t) in traj.states.iter().zip(&traj.times) {
        h.require_smooth_at(&s.alpha)?;
        let (a, b) = vertical_frame_at(h, s, *t)?;
        xs.push(a);
        ds.push(b);
    }
    Ok((xs, ds))
}

pub fn canonical_frame(h: &ChartHamiltonian, traj: &FlowTrajectory) -> Result<FrameBundle> {
    canonical_frame_with_gauge(h, traj, None)
}

pub(crate) fn midpoint(om: &[DMatrix<f64>], k: usize, dir: isize) -> DMatrix<f64> {
    // cubic interpolation of Ω halfway between k and k + dir
    let len = om.len() as isize;
    let at = |i: isize| &om[i as usize];
    let (a, b) = (k as isize, k as isize + dir);
    let before = a - dir;
    let after = b + dir;
    if (0..len).contains(&before) && (0..len).contains(&after) {
        (at(a) * 9.0 + at(b) * 9.0 - at(before) - at(after)) / 16.0
    } else if (0..len).contains(&after) && (0..len).contains(&(after + dir)) {
        (at(a) * 5.0 + at(b) * 15.0 - at(after) * 5.0 + at(after + dir)) / 16.0
    } else if (0..len).contains(&before) && (0..len).contains(&(before - dir)) {
        (at(b) * 5.0 + at(a) * 15.0 - at(before) * 5.0 + at(before - dir)) / 16.0
    } else {
        (at(a) + at(b)) * 0.5
    }
}

/// Canonical frame with an optional re-gauging `ξ ↦ ξQ(t)` of the vertical frame.
pub fn canonical_frame_with_gauge(h: &ChartHamiltonian, traj: &FlowTrajectory, gauge: Option<Gauge>) -> Result<FrameBundle> {
    let jacs = traj.jacobians.as_ref().ok_or(Error::InvalidArgument("trajectory lacks jacobians"))?;
    let n = traj.dim();
    let (mut xi, mut xi_dot) = vertical_frame(h, traj)?;
    if let Some(g) = gauge {
        for k in 0..traj.len() {
            let (q, qd) = g(traj.times[k]);
            xi_dot[k] = &xi_dot[k] * &q + &xi[k] * qd;
            xi[k] = &xi[k] * q;
        }
    }
    let len = traj.len();
    let mut ebar = Vec::with_capacity(len);
    let mut ebar_dot = Vec::with_capacity(len);
    let mut om = Vec::with_capacity(len);
    for k in 0..len {
        let s = &traj.states[k];
        let pj = h.jet(&s.x, &s.alpha, 2)?;
        let m = pj.h_aa();
        let p = pj.h_xa();
        let jinv = jacs[k].clone().lu().try_inverse().ok_or(Error::Singular)?;
        let mut vert = DMatrix::zeros(2 * n, n);
        let mut w = DMatrix::zeros(2 * n, n);
        let mx = &m * &xi[k];
        let px = &xi_dot[k] + &p * &xi[k];
        for i in 0..n {
            for r in 0..n {
                vert[(n + r, i)] = xi[k][(r, i)];
                w[(r, i)] = -mx[(r, i)];
                w[(n + r, i)] = px[(r, i)];
            }
        }
        let eb = &jinv * vert;
        let ebd = &jinv * w;
        let omk = DMatrix::from_fn(n, n, |i, j| omega(ebd.column(i).as_slice(), ebd.column(j).as_slice()));
        ebar.push(eb);
        ebar_dot.push(ebd);
        om.push(omk);
    }
    // O' = ½ O Ω from the origin in both directions
    let mut o = vec![DMatrix::zeros(n, n); len];
    let origin = traj.origin;
    o[origin] = DMatrix::identity(n, n);
    let rhs = |oo: &DMatrix<f64>, w: &DMatrix<f64>| oo * w * 0.5;
    for dir in [1isize, -1] {
        let mut k = origin as isize;
        loop {
            let next = k + dir;
            if next < 0 || next >= len as isize {
                break;
            }
            let dt = traj.times[next as usize] - traj.times[k as usize];
            let o0 = &o[k as usize];
            let wa = &om[k as usize];
            let wm = midpoint(&om, k as usize, dir);
            let wb = &om[next as usize];
            let k1 = rhs(o0, wa);
            let k2 = rhs(&(o0 + &k1 * (0.5 * dt)), &wm);
            let k3 = rhs(&(o0 + &k2 * (0.5 * dt)), &wm);
            let k4 = rhs(&(o0 + &k3 * dt), wb);
            o[next as usize] = o0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            k = next;
        }
    }
    let mut e = Vec::with_capacity(len);
    let mut e_dot = Vec::with_capacity(len);
    for k in 0..len {
        let odot = &o[k] * &om[k] * 0.5;
        e.push(&ebar[k] * o[k].transpose());
        e_dot.push(&ebar[k] * odot.transpose() + &ebar_dot[k] * o[k].transpose());
    }
    let fb = FrameBundle { trajectory: traj.clone(), xi, xi_dot, ebar, ebar_dot, omega: om, o, e, e_dot };
    let d = fb.defects();
    let worst = d.duality.max(d.lagrangian).max(d.orthogonality);
    if !(worst <= 1e-5) {
        return Err(Error::FrameFailed { defect: worst, time: 0.0 });
    }
    Ok(fb)
}

impl FrameBundle {
    pub fn len(&self) -> usize {
        self.e.len()
    }
    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.xi[0].nrows()
    }

    pub fn defects_at(&self, k: usize) -> FrameDefects {
        let n = self.dim();
        let (e, ed) = (&self.e[k], &self.e_dot[k]);
        let mut duality: f64 = 0.0;
        let mut lagrangian: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = omega(ed.column(i).as_slice(), e.column(j).as_slice()) - if i == j { 1.0 } else { 0.0 };
                duality = duality.max(d.abs());
                lagrangian = lagrangian.max(omega(e.column(i).as_slice(), e.column(j).as_slice()).abs());
            }
        }
        let orth = (self.o[k].transpose() * &self.o[k] - DMatrix::identity(n, n)).amax();
        FrameDefects { duality, lagrangian, orthogonality: orth }
    }

    pub fn defects(&self) -> FrameDefects {
        let mut d = FrameDefects { duality: 0.0, lagrangian: 0.0, orthogonality: 0.0 };
        for k in 0..self.len() {
            let x = self.defects_at(k);
            d.duality = d.duality.max(x.duality);
            d.lagrangian = d.lagrangian.max(x.lagrangian);
            d.orthogonality = d.orthogonality.max(x.orthogonality);
        }
        d
    }

    /// `max_t ‖ξᵀ H_αα ξ − I‖`.
    pub fn vertical_defect(&self, h: &ChartHamiltonian) -> Result<f64> {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for (s, xi) in self.trajectory.states.iter().zip(&self.xi) {
            let m = h.h_aa(&s.x, &s.alpha)?;
            worst = worst.max((xi.transpose() * m * xi - DMatrix::identity(n, n)).amax());
        }
        Ok(worst)
    }

    /// Matrix `C` with `e'_i = Σ_j C_ij e_j` relating another canonical frame on the same trajectory.
    pub fn relation_to(&self, other: &FrameBundle, k: usize) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| omega(self.e_dot[k].column(j).as_slice(), other.e[k].column(i).as_slice()))
    }
}

/// Curvature operator `R^t_α` at grid index `k` from second differences of the frame.
pub fn curvature_operator(fb: &FrameBundle, k: usize) -> Result<CurvatureReport> {
    let n = fb.dim();
    if k < 4 || k + 4 >= fb.len() {
        return Err(Error::InvalidArgument("curvature needs four grid points of margin"));
    }
    let samples: Vec<Vec<f64>> = (k - 4..=k + 4).map(|i| flatten(&fb.e[i])).collect();
    let (_, d2, fd_error) = grid_derivatives(&samples, 4, fb.trajectory.step)?;
    let eddot = DMatrix::from_column_slice(2 * n, n, &d2);
    let mut basis = DMatrix::zeros(2 * n, 2 * n);
    basis.view_mut((0, 0), (2 * n, n)).copy_from(&fb.e[k]);
    basis.view_mut((0, n), (2 * n, n)).copy_from(&fb.e_dot[k]);
    let lu = basis.clone().lu();
    let coeffs = lu.solve(&(-&eddot)).ok_or(Error::CurvatureIllConditioned { residual: f64::INFINITY })?;
    let residual = (&basis * &coeffs + &eddot).amax();
    if !(residual <= 1e-8 * (1.0 + eddot.amax())) {
        return Err(Error::CurvatureIllConditioned { residual });
    }
    let r = DMatrix::from_fn(n, n, |i, j| coeffs[(j, i)]);
    let vertical_defect = coeffs.view((n, 0), (n, n)).amax();
    if !(vertical_defect <= 1e-4 * (1.0 + r.amax())) {
        return Err(Error::CurvatureIllConditioned { residual: vertical_defect });
    }
    let ric = r.trace();
    Ok(CurvatureReport {
        r,
        ric,
        ric_n: Vec::new(),
        psi_derivs: None,
        route: CurvatureRoute::FrameSecondDerivative,
        vertical_defect,
        fd_error,
    })
}

/// Two-sided variational trajectory of `±LOCAL_MARGIN` steps around `state`.
pub fn local_trajectory(h: &ChartHamiltonian, state: &CotangentState, opts: &FlowOptions, with_jac: bool) -> Result<FlowTrajectory> {
    let w = LOCAL_MARGIN as f64 / opts.steps_per_unit as f64;
    flow_interval(h, state, w, w, opts, with_jac)
}

/// `R^0_α` in the canonical frame via the frame route.
pub fn curvature_at(h: &ChartHamiltonian, state: &CotangentState, opts: &FlowOptions) -> Result<CurvatureReport> {
    h.require_smooth_at(&state.alpha)?;
    let traj = local_trajectory(h, state, opts, true)?;
    let fb = canonical_frame(h, &traj)?;
    curvature_operator(&fb, traj.origin)
}

/// `Ric^H(α)`, zero on the zero section.
pub fn ricci(h: &ChartHamiltonian, state: &CotangentState) -> Result<f64> {
    ricci_with(h, state, &FlowOptions::default())
}

pub fn ricci_with(h: &ChartHamiltonian, state: &CotangentState, opts: &FlowOptions) -> Result<f64> {
    if state.on_zero_section() {
        return Ok(0.0);
    }
    Ok(curvature_at(h, state, opts)?.ric)
}

/// `Ric_N` from `Ric`, `(ψ∘η)'`, `(ψ∘η)''`; `N = f64::INFINITY` selects `Ric_∞`.
pub fn ric_n_from_parts(ric: f64, psi1: f64, psi2: f64, n: usize, big_n: f64) -> f64 {
    let n = n as f64;
    if big_n.is_infinite() {
        ric + psi2
    } else if big_n <= n {
        if psi1.abs() <= ZERO_DRIFT_TOL {
            ric + psi2
        } else {
            f64::NEG_INFINITY
        }
    } else {
        ric + psi2 - psi1 * psi1 / (big_n - n)
    }
}

/// `ψ(t) = ς(η(t)) + ½ log det L_vv(η̇(t))` sampled along a trajectory.
pub fn psi_along(h: &ChartHamiltonian, weight: &WeightField, traj: &FlowTrajectory) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| {
            let m = h.h_aa(&s.x, &s.alpha)?;
            let det = m.determinant();
            if !(det > 0.0) {
                return Err(Error::ConvexityViolated { time: 0.0 });
            }
            Ok(weight.varsigma.value(&s.x) - 0.5 * det.ln())
        })
        .collect()
}

/// `((ψ∘η)', (ψ∘η)'')` at grid index `k`.
pub fn psi_derivatives(psi: &[f64], k: usize, step: f64) -> Result<(f64, f64)> {
    let samples: Vec<Vec<f64>> = psi.iter().map(|v| vec![*v]).collect();
    let (d1, d2, _) = grid_derivatives(&samples, k, step)?;
    Ok((d1[0], d2[0]))
}

/// Curvature together with weighted Ricci curvatures for each requested `N`.
pub fn weighted_curvature(
    h: &ChartHamiltonian,
    weight: &WeightField,
    state: &CotangentState,
    ns: &[f64],
    opts: &FlowOptions,
) -> Result<CurvatureReport> {
    h.require_smooth_at(&state.alpha)?;
    let traj = local_trajectory(h, state, opts, true)?;
    let fb = canonical_frame(h, &traj)?;
    let mut rep = curvature_operator(&fb, traj.origin)?;
    let psi = psi_along(h, weight, &traj)?;
    let (p1, p2) = psi_derivatives(&psi, traj.origin, traj.step)?;
    rep.psi_derivs = Some((p1, p2));
    rep.ric_n = ns.iter().map(|&nn| (nn, ric_n_from_parts(rep.ric, p1, p2, h.dim(), nn))).collect();
    Ok(rep)
}

/// `Ric^H_N(α)`; may be `−∞` when `N = n`.
pub fn weighted_ricci(h: &ChartHamiltonian, weight: &WeightField, state: &CotangentState, big_n: f64) -> Result<f64> {
    if big_n < h.dim() as f64 {
        return Err(Error::InvalidArgument("N must be at least n"));
    }
    let rep = weighted_curvature(h, weight, state, &[big_n], &FlowOptions::default())?;
    Ok(rep.ric_n[0].1)
}

/// Curvature from the coordinate formula, valid where `H_αα = I` along the trajectory.
pub fn curvature_coordinate_formula(h: &ChartHamiltonian, state: &CotangentState, opts: &FlowOptions) -> Result<CurvatureReport> {
    h.require_smooth_at(&state.alpha)?;
    let n = h.dim();
    let traj = local_trajectory(h, state, opts, false)?;
    let mut p_samples = Vec::with_capacity(traj.len());
    let mut worst: f64 = 0.0;
    for s in &traj.states {
        let pj = h.jet(&s.x, &s.alpha, 2)?;
        worst = worst.max((pj.h_aa() - DMatrix::identity(n, n)).amax());
        let p = pj.h_xa();
        p_samples.push(flatten(&(&p + p.transpose())));
    }
    if worst > 1e-8 {
        return Err(Error::CoordinateFormulaInapplicable { defect: worst });
    }
    let (d1, _, fd_error) = grid_derivatives(&p_samples, traj.origin, traj.step)?;
    let sym_dot = DMatrix::from_column_slice(n, n, &d1);
    let pj = h.jet(&state.x, &state.alpha, 2)?;
    let p = pj.h_xa();
    let hxx = pj.h_xx();
    let r = DMatrix::from_fn(n, n, |i, j| {
        let mut v = 0.0;
        for k in 0..n {
            v += 0.25 * (p[(i, k)] - p[(k, i)]) * (p[(j, k)] - p[(k, j)]);
            v -= p[(i, k)] * p[(j, k)];
        }
        v - 0.5 * sym_dot[(i, j)] + hxx[(i, j)]
    });
    let ric = r.trace();
    Ok(CurvatureReport {
        r,
        ric,
        ric_n: Vec::new(),
        psi_derivs: None,
        route: CurvatureRoute::CoordinateFormula,
        vertical_defect: 0.0,
        fd_error,
    })
}

/// Operator matrix, in vertical coordinates at `α(t)`, of `dΦ_t ∘ R^t_α ∘ dΦ_t⁻¹` minus that of `R^0_{α(t)}`.
pub fn time_shift_defect(h: &ChartHamiltonian, state: &CotangentState, t: f64, opts: &FlowOptions) -> Result<f64> {
    let w = LOCAL_MARGIN as f64 / opts.steps_per_unit as f64;
    let traj = flow_interval(h, state, w, t + w, opts, true)?;
    let fb = canonical_frame(h, &traj)?;
    let k = traj.index_of(t);
    let rt = curvature_operator(&fb, k)?.r;
    let b = &fb.xi[k] * fb.o[k].transpose();
    let binv = b.clone().try_inverse().ok_or(Error::Singular)?;
    let a1 = &b * rt.transpose() * binv;
    let shifted = traj.states[k].clone();
    let r0 = curvature_at(h, &shifted, opts)?.r;
    let (xi0, _) = vertical_frame_at(h, &shifted, 0.0)?;
    let xinv = xi0.clone().try_inverse().ok_or(Error::Singular)?;
    let a2 = &xi0 * r0.transpose() * xinv;
    Ok((a1 - a2).amax())
}

/// Largest drift `‖C(t) − C(0)‖` between the canonical frames built from two vertical gauges.
pub fn gauge_drift(h: &ChartHamiltonian, traj: &FlowTrajectory, gauge: Gauge) -> Result<f64> {
    let a = canonical_frame(h, traj)?;
    let b = canonical_frame_with_gauge(h, traj, Some(gauge))?;
    let c0 = a.relation_to(&b, traj.origin);
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() {
        worst = worst.max((a.relation_to(&b, k) - &c0).amax());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub c: f64,
    /// `(N, lhs, rhs)` for weighted Ricci curvatures.
    pub weighted: Vec<(f64, f64, f64)>,
}

/// Compares `Ric^{h∘F*}(α)` with `c(α)² Ric^{F*²/2}(α)`, `c(α) = h'(F*)/F*`.
pub fn fconv_scaling_check(
    metric: &CoMetric,
    profile: &Profile,
    state: &CotangentState,
    weight: Option<(&WeightField, &[f64])>,
    opts: &FlowOptions,
) -> Result<ScalingCheck> {
    use crate::jets::Jet;
    let hf = crate::hamiltonians::deformation(Profile::Quadratic { a: 1.0 }, metric.clone())?;
    let hh = crate::hamiltonians::deformation(profile.clone(), metric.clone())?;
    let xs: Vec<Jet> = state.x.iter().map(|v| Jet::constant(*v)).collect();
    let al: Vec<Jet> = state.alpha.iter().map(|v| Jet::constant(*v)).collect();
    let f = metric.norm_jet(&xs, &al).value();
    let c = profile.speed_factor(f);
    let (ns, w) = match weight {
        Some((w, ns)) => (ns.to_vec(), w.clone()),
        None => (Vec::new(), WeightField::lebesgue(hf.dim())),
    };
    let a = weighted_curvature(&hh, &w, state, &ns, opts)?;
    let b = weighted_curvature(&hf, &w, state, &ns, opts)?;
    let lhs = a.ric;
    let rhs = c * c * b.ric;
    let weighted = a.ric_n.iter().zip(&b.ric_n).map(|((nn, x), (_, y))| (*nn, *x, c * c * *y)).collect();
    Ok(ScalingCheck { lhs, rhs, defect: (lhs - rhs).abs(), c, weighted })
}
