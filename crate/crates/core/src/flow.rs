//! Hamiltonian flow, its linearization, the exponential map of scale `c` and radial potentials.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hamiltonians::{ChartHamiltonian, CotangentState};

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub steps_per_unit: usize,
    /// How many times the step count may be doubled when the energy drifts.
    pub max_refinements: u32,
    /// Absolute energy tolerance; defaults to `1e-8 (1 + |H0|) max(T, 1)`.
    pub conserve_tol: Option<f64>,
    pub symplectic_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { steps_per_unit: 1024, max_refinements: 4, conserve_tol: None, symplectic_tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    /// `dΦ_t` in `(x, α)` block order, identity at `t = 0`.
    pub jacobians: Option<Vec<DMatrix<f64>>>,
    pub h0: f64,
    /// Uniform time step (signed grids are stored in increasing time).
    pub step: f64,
    /// Index of `t = 0`.
    pub origin: usize,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }
    pub fn last(&self) -> &CotangentState {
        self.states.last().expect("nonempty trajectory")
    }
    /// Index of the grid point closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = self.origin as f64 + t / self.step;
        (k.round().max(0.0) as usize).min(self.len() - 1)
    }
    pub fn energy_drift(&self, h: &ChartHamiltonian) -> f64 {
        self.states.iter().map(|s| (h.value(&s.x, &s.alpha) - self.h0).abs()).fold(0.0, f64::max)
    }
    /// `max_t ‖JᵀΩJ − Ω‖` with `Ω` the canonical symplectic matrix.
    pub fn symplectic_defect(&self) -> Option<f64> {
        let js = self.jacobians.as_ref()?;
        let n = self.dim();
        let w = canonical_symplectic(n);
        Some(js.iter().map(|j| (j.transpose() * &w * j - &w).amax()).fold(0.0, f64::max))
    }
}

/// Matrix of `ω = Σ dα_i ∧ dx^i` in `(x, α)` block order: `ω(u, v) = uᵀ W v`.
pub fn canonical_symplectic(n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        w[(i, n + i)] = -1.0;
        w[(n + i, i)] = 1.0;
    }
    w
}

/// `ω(u, v)` for phase vectors in `(x, α)` order.
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() / 2;
    (0..n).map(|i| u[n + i] * v[i] - u[i] * v[n + i]).sum()
}

/// Classical RK4 over `steps` uniform steps of size `dt`; `observe` sees every accepted state.
pub fn rk4<F, O>(y0: &[f64], t0: f64, dt: f64, steps: usize, mut rhs: F, mut observe: O) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let m = y0.len();
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let mut tmp = vec![0.0; m];
    observe(0, t0, &y)?;
    for s in 0..steps {
        let t = t0 + s as f64 * dt;
        rhs(t, &y, &mut k1)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k2)?;
        for i in 0..m {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        rhs(t + 0.5 * dt, &tmp, &mut k3)?;
        for i in 0..m {
            tmp[i] = y[i] + dt * k3[i];
        }
        rhs(t + dt, &tmp, &mut k4)?;
        for i in 0..m {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        observe(s + 1, t0 + (s + 1) as f64 * dt, &y)?;
    }
    Ok(y)
}

fn phase_rhs(h: &ChartHamiltonian, n: usize, with_jac: bool, y: &[f64], out: &mut [f64]) -> Result<()> {
    let (x, a) = (&y[..n], &y[n..2 * n]);
    if !with_jac {
        let (hx, ha) = h.gradient(x, a)?;
        for i in 0..n {
            out[i] = ha[i];
            out[n + i] = -hx[i];
        }
        return Ok(());
    }
    let pj = h.jet(x, a, 2)?;
    for i in 0..n {
        out[i] = pj.ha(i);
        out[n + i] = -pj.hx(i);
    }
    let d = pj.vector_field_jacobian();
    let m = 2 * n;
    let j = DMatrix::from_column_slice(m, m, &y[m..m + m * m]);
    let dj = d * j;
    out[m..m + m * m].copy_from_slice(dj.as_slice());
    Ok(())
}

/// Integrates on the uniform grid `t_k = (k − back) dt`, `k = 0..=back+fwd`.
pub fn flow_grid(
    h: &ChartHamiltonian,
    state0: &CotangentState,
    back: usize,
    fwd: usize,
    dt: f64,
    with_jac: bool,
) -> Result<FlowTrajectory> {
    h.check_state(state0)?;
    if with_jac || !h.zero_section_smooth() {
        h.require_smooth_at(&state0.alpha)?;
    }
    let n = h.dim();
    let m = 2 * n;
    let mut y0 = state0.to_phase();
    if with_jac {
        y0.extend_from_slice(DMatrix::<f64>::identity(m, m).as_slice());
    }
    let h0 = h.value(&state0.x, &state0.alpha);
    let run = |steps: usize, dir: f64| -> Result<Vec<(f64, Vec<f64>)>> {
        let mut out = Vec::with_capacity(steps + 1);
        rk4(
            &y0,
            0.0,
            dir * dt,
            steps,
            |_, y, o| phase_rhs(h, n, with_jac, y, o),
            |_, t, y| {
                if !h.chart().contains(&y[..n]) || y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::LeftChart { time: t });
                }
                out.push((t, y.to_vec()));
                Ok(())
            },
        )?;
        Ok(out)
    };
    let backward = run(back, -1.0)?;
    let forward = run(fwd, 1.0)?;
    let mut times = Vec::with_capacity(back + fwd + 1);
    let mut states = Vec::with_capacity(back + fwd + 1);
    let mut jacs = Vec::new();
    let mut push = |t: f64, y: &[f64]| {
        times.push(t);
        states.push(CotangentState::from_phase(&y[..m]));
        if with_jac {
            jacs.push(DMatrix::from_column_slice(m, m, &y[m..]));
        }
    };
    for (t, y) in backward.iter().rev() {
        push(*t, y);
    }
    for (t, y) in forward.iter().skip(1) {
        push(*t, y);
    }
    Ok(FlowTrajectory { times, states, jacobians: if with_jac { Some(jacs) } else { None }, h0, step: dt, origin: back })
}

/// Two-sided trajectory on `[−back_time, fwd_time]` with automatic step doubling on energy drift.
pub fn flow_interval(
    h: &ChartHamiltonian,
    state0: &CotangentState,
    back_time: f64,
    fwd_time: f64,
    opts: &FlowOptions,
    with_jac: bool,
) -> Result<FlowTrajectory> {
    if !(back_time >= 0.0 && fwd_time >= 0.0) || !back_time.is_finite() || !fwd_time.is_finite() {
        return Err(Error::InvalidArgument("flow interval must be finite and contain 0"));
    }
    let mut spu = opts.steps_per_unit.max(1);
    let span = back_time + fwd_time;
    let mut last_drift = 0.0;
    for _ in 0..=opts.max_refinements {
        let total = (span * spu as f64).ceil().max(1.0) as usize;
        let dt = if span > 0.0 { span / total as f64 } else { 1.0 / spu as f64 };
        let back = if span > 0.0 { (back_time / dt).round() as usize } else { 0 };
        let fwd = if span > 0.0 { total - back } else { 0 };
        let traj = flow_grid(h, state0, back, fwd, dt, with_jac)?;
        let tol = opts.conserve_tol.unwrap_or(1e-8 * (1.0 + traj.h0.abs()) * span.max(1.0));
        last_drift = traj.energy_drift(h);
        if last_drift <= tol {
            if let Some(defect) = traj.symplectic_defect() {
                if defect > opts.symplectic_tol * span.max(1.0) {
                    return Err(Error::SymplecticDefect { defect });
                }
            }
            return Ok(traj);
        }
        spu *= 2;
    }
    Err(Error::EnergyDrift { drift: last_drift })
}

/// Flow of `ẋ = H_α, α̇ = −H_x` for time `t_end` (negative times run backward).
pub fn hamiltonian_flow(h: &ChartHamiltonian, state0: &CotangentState, t_end: f64, opts: &FlowOptions) -> Result<FlowTrajectory> {
    if t_end >= 0.0 {
        flow_interval(h, state0, 0.0, t_end, opts, false)
    } else {
        flow_interval(h, state0, -t_end, 0.0, opts, false)
    }
}

/// Flow together with its linearization `J' = DX_H J`, `J(0) = I`.
pub fn variational_flow(h: &ChartHamiltonian, state0: &CotangentState, t_end: f64, opts: &FlowOptions) -> Result<FlowTrajectory> {
    if t_end >= 0.0 {
        flow_interval(h, state0, 0.0, t_end, opts, true)
    } else {
        flow_interval(h, state0, -t_end, 0.0, opts, true)
    }
}

/// The scale `a > 0` with `H(x, aα) = c`.
pub fn energy_scale(h: &ChartHamiltonian, x: &[f64], alpha: &[f64], c: f64) -> Result<f64> {
    if alpha.iter().all(|a| *a == 0.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument("exponential map needs alpha != 0 and c > 0"));
    }
    let phi = |a: f64| -> f64 {
        let v: Vec<f64> = alpha.iter().map(|p| a * p).collect();
        h.value(x, &v) - c
    };
    if phi(0.0) >= 0.0 {
        return Err(Error::ScaleUnreachable);
    }
    let mut hi = 1.0;
    let mut n = 0;
    while phi(hi) < 0.0 {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(Error::ScaleUnreachable);
        }
    }
    let mut lo = 0.0;
    let mut a = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = phi(a);
        if f.abs() <= 1e-15 * c.max(1.0) {
            break;
        }
        if f < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let v: Vec<f64> = alpha.iter().map(|p| a * p).collect();
        let (_, ha) = h.gradient(x, &v)?;
        let slope: f64 = ha.iter().zip(alpha).map(|(p, q)| p * q).sum();
        let newton = a - f / slope;
        a = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Ok(a)
}

/// Radial curve `s ↦ Φ_s(aα)` on `[0, s_max]` with `H(aα) = c`, together with `a`.
pub fn radial_curve(
    h: &ChartHamiltonian,
    z: &[f64],
    alpha: &[f64],
    c: f64,
    s_max: f64,
    opts: &FlowOptions,
) -> Result<(f64, FlowTrajectory)> {
    let a = energy_scale(h, z, alpha, c)?;
    let start = CotangentState::new(z.to_vec(), alpha.iter().map(|p| a * p).collect());
    Ok((a, hamiltonian_flow(h, &start, s_max, opts)?))
}

/// `exp_z^c(tα) = π Φ_{t/a}(aα)`; `t = 1` is the exponential map of scale `c`.
pub fn exp_scale_c(h: &ChartHamiltonian, z: &[f64], alpha: &[f64], c: f64, t: f64) -> Result<Vec<f64>> {
    exp_scale_c_with(h, z, alpha, c, t, &FlowOptions::default())
}

pub fn exp_scale_c_with(h: &ChartHamiltonian, z: &[f64], alpha: &[f64], c: f64, t: f64, opts: &FlowOptions) -> Result<Vec<f64>> {
    let a = energy_scale(h, z, alpha, c)?;
    let start = CotangentState::new(z.to_vec(), alpha.iter().map(|p| a * p).collect());
    Ok(hamiltonian_flow(h, &start, t / a, opts)?.last().x.clone())
}

/// `u_z^c(η(s)) = c s + ∫₀ˢ L(η̇)` at the flow times `s_grid` (non-negative, increasing).
pub fn radial_potential(h: &ChartHamiltonian, z: &[f64], alpha: &[f64], c: f64, s_grid: &[f64]) -> Result<Vec<f64>> {
    radial_potential_with(h, z, alpha, c, s_grid, &FlowOptions::default())
}

pub fn radial_potential_with(
    h: &ChartHamiltonian,
    z: &[f64],
    alpha: &[f64],
    c: f64,
    s_grid: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<f64>> {
    if s_grid.iter().any(|s| *s < 0.0) || s_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be non-negative and increasing"));
    }
    let s_max = s_grid.last().copied().unwrap_or(0.0);
    let (_, traj) = radial_curve(h, z, alpha, c, s_max, opts)?;
    // c + L(η̇) = α(H_α) at α = τ(η̇)
    let integrand: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            let (_, ha) = h.gradient(&s.x, &s.alpha)?;
            let lag = s.alpha.iter().zip(&ha).map(|(p, q)| p * q).sum::<f64>() - h.value(&s.x, &s.alpha);
            Ok(c + lag)
        })
        .collect::<Result<_>>()?;
    let mut cumulative = vec![0.0; traj.len()];
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        cumulative[k] = cumulative[k - 1] + 0.5 * dt * (integrand[k] + integrand[k - 1]);
    }
    Ok(s_grid
        .iter()
        .map(|&s| {
            let pos = s / traj.step;
            let k = (pos.floor() as usize).min(traj.len() - 1);
            if k + 1 >= traj.len() {
                return cumulative[k];
            }
            let w = pos - k as f64;
            (1.0 - w) * cumulative[k] + w * cumulative[k + 1]
        })
        .collect())
}
