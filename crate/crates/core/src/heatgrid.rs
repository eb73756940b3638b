//! Grid realizations of the heat flow, the entropy gradient flow and Dirichlet energy minimization.
//!
//! Every cell `c` owns `2^d` one-sided difference terms `H(x_c + σh/2, D^σ u_c)`, one per sign
//! pattern `σ`, weighted by `m_c / 2^d`. The discrete Laplacian is `−(1/m_c) ∂E/∂u_c`, so fluxes
//! telescope and `Σ_c m_c (Δu)_c = 0`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hamiltonians::{lagrangian, ChartHamiltonian};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub shape: Vec<usize>,
    pub spacing: f64,
    /// Torus when true, box with Dirichlet data otherwise.
    pub periodic: bool,
}

impl Grid {
    pub fn new(shape: Vec<usize>, spacing: f64, periodic: bool) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::InvalidArgument("grid dimension must be 1 or 2"));
        }
        if shape.iter().any(|s| *s < 8) || !(spacing > 0.0) {
            return Err(Error::InvalidArgument("grid needs at least 8 cells per axis and positive spacing"));
        }
        Ok(Grid { shape, spacing, periodic })
    }

    /// Torus `[0, 1)^d` with `cells` cells per axis.
    pub fn unit_torus(d: usize, cells: usize) -> Result<Self> {
        Grid::new(vec![cells; d], 1.0 / cells as f64, true)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn index(&self, idx: &[usize]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.shape[1] + idx[1]
        }
    }

    fn multi(&self, c: usize) -> Vec<usize> {
        if self.dim() == 1 {
            vec![c]
        } else {
            vec![c / self.shape[1], c % self.shape[1]]
        }
    }

    pub fn coords(&self, c: usize) -> Vec<f64> {
        self.multi(c).iter().map(|i| *i as f64 * self.spacing).collect()
    }

    pub fn neighbor(&self, c: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut idx = self.multi(c);
        let n = self.shape[axis] as isize;
        let j = idx[axis] as isize + dir;
        let j = if self.periodic {
            j.rem_euclid(n)
        } else if (0..n).contains(&j) {
            j
        } else {
            return None;
        };
        idx[axis] = j as usize;
        Some(self.index(&idx))
    }

    /// Samples `f` at the grid points.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|c| f(&self.coords(c))).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// `ς` per cell; the cell mass is `e^{−ς_c} h^d`.
    pub varsigma: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>, varsigma: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || varsigma.len() != grid.len() {
            return Err(Error::ShapeMismatch);
        }
        Ok(GridField { grid, values, varsigma })
    }

    pub fn lebesgue(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        GridField::new(grid, values, vec![0.0; n])
    }

    pub fn masses(&self) -> Vec<f64> {
        let vol = self.grid.spacing.powi(self.grid.dim() as i32);
        self.varsigma.iter().map(|s| (-s).exp() * vol).collect()
    }

    pub fn with_values(&self, values: Vec<f64>) -> GridField {
        GridField { grid: self.grid.clone(), values, varsigma: self.varsigma.clone() }
    }

    /// `∫ u dm`.
    pub fn mass(&self) -> f64 {
        self.masses().iter().zip(&self.values).map(|(m, u)| m * u).sum()
    }

    /// `∫ u log u dm`, `None` unless `u > 0`.
    pub fn entropy(&self) -> Option<f64> {
        if self.values.iter().any(|u| !(*u > 0.0)) {
            return None;
        }
        Some(self.masses().iter().zip(&self.values).map(|(m, u)| m * u * u.ln()).sum())
    }

    /// `‖u‖_{L²(m)}`.
    pub fn l2_norm(&self) -> f64 {
        l2(&self.values, &self.masses())
    }
}

fn l2(v: &[f64], m: &[f64]) -> f64 {
    v.iter().zip(m).map(|(a, w)| w * a * a).sum::<f64>().sqrt()
}

/// `‖u − w‖_{L²(m)}`.
pub fn l2_distance(a: &GridField, b: &GridField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::ShapeMismatch);
    }
    let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    Ok(l2(&d, &a.masses()))
}

#[derive(Clone, Debug)]
struct Term {
    cell: usize,
    nbrs: Vec<usize>,
    signs: Vec<f64>,
    x: Vec<f64>,
    weight: f64,
}

/// Difference terms and masses of a field's grid.
#[derive(Clone, Debug)]
struct Stencil {
    terms: Vec<Term>,
    masses: Vec<f64>,
    h: f64,
    d: usize,
}

impl Stencil {
    fn new(field: &GridField) -> Self {
        let g = &field.grid;
        let d = g.dim();
        let masses = field.masses();
        let mut terms = Vec::with_capacity(g.len() << d);
        for c in 0..g.len() {
            let x = g.coords(c);
            'sigma: for pattern in 0..(1usize << d) {
                let mut nbrs = Vec::with_capacity(d);
                let mut signs = Vec::with_capacity(d);
                let mut xt = x.clone();
                for a in 0..d {
                    let s = if pattern >> a & 1 == 0 { 1.0 } else { -1.0 };
                    match g.neighbor(c, a, s as isize) {
                        Some(nb) => nbrs.push(nb),
                        None => continue 'sigma,
                    }
                    signs.push(s);
                    xt[a] += 0.5 * s * g.spacing;
                }
                terms.push(Term { cell: c, nbrs, signs, x: xt, weight: masses[c] / (1usize << d) as f64 });
            }
        }
        Stencil { terms, masses, h: g.spacing, d }
    }

    fn diff(&self, t: &Term, u: &[f64]) -> Vec<f64> {
        (0..self.d).map(|a| t.signs[a] * (u[t.nbrs[a]] - u[t.cell]) / self.h).collect()
    }

    /// Adds `w · Σ_a q_a ∂(D^σ_a u)/∂u` into `out`.
    fn scatter(&self, t: &Term, q: &[f64], out: &mut [f64]) {
        for a in 0..self.d {
            let v = t.weight * q[a] * t.signs[a] / self.h;
            out[t.nbrs[a]] += v;
            out[t.cell] -= v;
        }
    }

    fn energy(&self, h: &ChartHamiltonian, u: &[f64]) -> Result<f64> {
        let mut e = 0.0;
        for t in &self.terms {
            let v = h.value(&t.x, &self.diff(t, u));
            if !v.is_finite() {
                return Err(Error::OutsideSmoothDomain);
            }
            e += t.weight * v;
        }
        Ok(e)
    }

    /// `∂E/∂u`.
    fn energy_gradient(&self, h: &ChartHamiltonian, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        for t in &self.terms {
            let (_, ha) = h.gradient(&t.x, &self.diff(t, u))?;
            self.scatter(t, &ha, &mut out);
        }
        Ok(out)
    }

    fn laplacian(&self, h: &ChartHamiltonian, u: &[f64]) -> Result<Vec<f64>> {
        let g = self.energy_gradient(h, u)?;
        Ok(g.iter().zip(&self.masses).map(|(gc, m)| -gc / m).collect())
    }

    fn fibre_hessians(&self, h: &ChartHamiltonian, u: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.terms.iter().map(|t| fibre_hessian(h, &t.x, &self.diff(t, u))).collect()
    }

    fn hess_vec(&self, cache: &[DMatrix<f64>], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        for (t, m) in self.terms.iter().zip(cache) {
            let dp = nalgebra::DVector::from_vec(self.diff(t, p));
            let q = m * dp;
            self.scatter(t, q.as_slice(), &mut out);
        }
        out
    }

    fn hess_diag(&self, cache: &[DMatrix<f64>], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (t, m) in self.terms.iter().zip(cache) {
            let mut sum_all = 0.0;
            for a in 0..self.d {
                let ea = t.signs[a] / self.h;
                out[t.nbrs[a]] += t.weight * m[(a, a)] * ea * ea;
                for b in 0..self.d {
                    sum_all += m[(a, b)] * t.signs[a] * t.signs[b] / (self.h * self.h);
                }
            }
            out[t.cell] += t.weight * sum_all;
        }
        out
    }

    /// `max λ_max(H_αα)` over the terms, scaled by the worst neighbour mass ratio.
    fn stiffness(&self, cache: &[DMatrix<f64>]) -> f64 {
        let mut lam: f64 = 0.0;
        for (t, m) in self.terms.iter().zip(cache) {
            let ev = m.clone().symmetric_eigen().eigenvalues.amax();
            let ratio = t.nbrs.iter().map(|nb| self.masses[t.cell] / self.masses[*nb]).fold(1.0, f64::max);
            lam = lam.max(ev * ratio);
        }
        lam
    }
}

/// `H_αα(x, α)`, by central differences of `H_α` where the jet is not finite (e.g. `α = 0` for `p > 2`).
fn fibre_hessian(h: &ChartHamiltonian, x: &[f64], a: &[f64]) -> Result<DMatrix<f64>> {
    if let Ok(m) = h.h_aa(x, a) {
        if m.iter().all(|v| v.is_finite()) {
            return Ok(m);
        }
    }
    let n = a.len();
    let scale = 1e-7 * (1.0 + a.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut ap = a.to_vec();
        let mut am = a.to_vec();
        ap[j] += scale;
        am[j] -= scale;
        let (_, gp) = h.gradient(x, &ap)?;
        let (_, gm) = h.gradient(x, &am)?;
        for i in 0..n {
            m[(i, j)] = (gp[i] - gm[i]) / (2.0 * scale);
        }
    }
    let m = (&m + m.transpose()) * 0.5;
    if m.iter().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(Error::OutsideSmoothDomain)
    }
}

fn check_dim(h: &ChartHamiltonian, field: &GridField) -> Result<()> {
    if h.dim() != field.grid.dim() {
        return Err(Error::ShapeMismatch);
    }
    Ok(())
}

/// `E(u) = Σ_c m_c 2^{−d} Σ_σ H(x_c + σh/2, D^σ u_c)`.
pub fn discrete_energy(h: &ChartHamiltonian, field: &GridField) -> Result<f64> {
    check_dim(h, field)?;
    Stencil::new(field).energy(h, &field.values)
}

/// `(Δ^H_m u)_c = −(1/m_c) ∂E/∂u_c`.
pub fn discrete_laplacian(h: &ChartHamiltonian, field: &GridField) -> Result<GridField> {
    check_dim(h, field)?;
    let lap = Stencil::new(field).laplacian(h, &field.values)?;
    Ok(field.with_values(lap))
}

/// Largest stable explicit step `h² / (2d Λ)` with `Λ` the stiffness of `H_α` on the data.
pub fn stability_bound(h: &ChartHamiltonian, field: &GridField) -> Result<f64> {
    check_dim(h, field)?;
    let st = Stencil::new(field);
    let cache = st.fibre_hessians(h, &field.values)?;
    let lam = st.stiffness(&cache);
    Ok(if lam > 0.0 { st.h * st.h / (2.0 * st.d as f64 * lam) } else { f64::INFINITY })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowDiagnostics {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<Option<f64>>,
    /// `‖Δ^H_m u‖_{L²(m)}`.
    pub slope: Vec<f64>,
}

impl FlowDiagnostics {
    fn record(&mut self, t: f64, field: &GridField, energy: f64, lap: &[f64], masses: &[f64]) {
        self.times.push(t);
        self.mass.push(field.mass());
        self.energy.push(energy);
        self.entropy.push(field.entropy());
        self.slope.push(l2(lap, masses));
    }

    /// `max |mass − mass₀| / max(1, |mass₀|)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass.first().copied().unwrap_or(0.0);
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs().max(1.0)
    }

    /// Largest step-to-step increase of the energy.
    pub fn max_energy_increase(&self) -> f64 {
        self.energy.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest step-to-step increase of the entropy.
    pub fn max_entropy_increase(&self) -> Option<f64> {
        let e: Option<Vec<f64>> = self.entropy.iter().copied().collect();
        e.map(|e| e.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max))
    }
}

#[derive(Clone, Debug)]
pub struct HeatRun {
    pub field: GridField,
    pub diagnostics: FlowDiagnostics,
    pub steps: usize,
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and T ≥ 0"));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Explicit Euler for `∂_t u = Δ^H_m u`, ending exactly at `t_end` with steps of at most `dt`.
pub fn heat_solve_explicit(h: &ChartHamiltonian, field0: &GridField, t_end: f64, dt: f64) -> Result<HeatRun> {
    check_dim(h, field0)?;
    let steps = step_count(t_end, dt)?;
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let st = Stencil::new(field0);
    let cache = st.fibre_hessians(h, &field0.values)?;
    let lam = st.stiffness(&cache);
    if lam > 0.0 {
        let bound = st.h * st.h / (2.0 * st.d as f64 * lam);
        if dt > bound {
            return Err(Error::TimeStepTooLarge { bound });
        }
    }
    let mut field = field0.clone();
    let mut diag = FlowDiagnostics::default();
    let mut energy = st.energy(h, &field.values)?;
    let mut lap = st.laplacian(h, &field.values)?;
    diag.record(0.0, &field, energy, &lap, &st.masses);
    for k in 0..steps {
        for (u, l) in field.values.iter_mut().zip(&lap) {
            *u += dt * l;
        }
        let e_new = st.energy(h, &field.values)?;
        if e_new > energy + 1e-13 * (1.0 + energy.abs()) {
            return Err(Error::TimeStepTooLarge { bound: dt * 0.5 });
        }
        energy = e_new;
        lap = st.laplacian(h, &field.values)?;
        diag.record((k + 1) as f64 * dt, &field, energy, &lap, &st.masses);
    }
    Ok(HeatRun { field, diagnostics: diag, steps })
}

/// Runs two heat solutions in lockstep and returns `‖u_t − ū_t‖_{L²(m)}` after every step.
pub fn heat_contraction(h: &ChartHamiltonian, a: &GridField, b: &GridField, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if a.grid != b.grid || a.varsigma != b.varsigma {
        return Err(Error::ShapeMismatch);
    }
    check_dim(h, a)?;
    let steps = step_count(t_end, dt)?;
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    for f in [a, b] {
        let bound = stability_bound(h, f)?;
        if dt > bound {
            return Err(Error::TimeStepTooLarge { bound });
        }
    }
    let st = Stencil::new(a);
    let (mut u, mut w) = (a.values.clone(), b.values.clone());
    let dist = |u: &[f64], w: &[f64]| {
        let d: Vec<f64> = u.iter().zip(w).map(|(x, y)| x - y).collect();
        l2(&d, &st.masses)
    };
    let mut out = vec![dist(&u, &w)];
    for _ in 0..steps {
        let lu = st.laplacian(h, &u)?;
        let lw = st.laplacian(h, &w)?;
        u.iter_mut().zip(&lu).for_each(|(x, l)| *x += dt * l);
        w.iter_mut().zip(&lw).for_each(|(x, l)| *x += dt * l);
        out.push(dist(&u, &w));
    }
    Ok(out)
}

/// Smooth convex objective over the free cells, solved by [`newton_cg`].
trait Objective {
    fn value(&self, v: &[f64]) -> Result<f64>;
    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn hessian_cache(&self, v: &[f64]) -> Result<Vec<DMatrix<f64>>>;
    fn hess_vec(&self, cache: &[DMatrix<f64>], p: &[f64]) -> Vec<f64>;
    fn hess_diag(&self, cache: &[DMatrix<f64>]) -> Vec<f64>;
    /// Residual `max_c |g_c| / m_c` over free cells.
    fn residual(&self, g: &[f64]) -> f64;
    fn free(&self) -> &[bool];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn newton_cg<O: Objective>(obj: &O, mut v: Vec<f64>, tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let free = obj.free().to_vec();
    let mask = |x: &mut [f64]| {
        x.iter_mut().zip(&free).for_each(|(a, f)| {
            if !f {
                *a = 0.0
            }
        })
    };
    let mut f = obj.value(&v)?;
    let mut g = obj.gradient(&v)?;
    mask(&mut g);
    let mut res = obj.residual(&g);
    let mut stall = 0;
    for it in 0..200 {
        if res <= tol {
            return Ok((v, SolveStats { iterations: it, residual: res }));
        }
        let cache = obj.hessian_cache(&v)?;
        let mut diag = obj.hess_diag(&cache);
        diag.iter_mut().zip(&free).for_each(|(d, fr)| {
            if !fr || !(*d > 0.0) {
                *d = 1.0
            }
        });
        // preconditioned CG on H p = −g
        let n = v.len();
        let mut p = vec![0.0; n];
        let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut s = z.clone();
        let mut rz = dot(&r, &z);
        let rnorm0 = dot(&r, &r).sqrt();
        let forcing = (0.1 * rnorm0.sqrt()).min(0.1) * rnorm0;
        for _ in 0..(4 * n).max(50) {
            let mut hs = obj.hess_vec(&cache, &s);
            mask(&mut hs);
            let curv = dot(&s, &hs);
            if !(curv > 0.0) {
                if p.iter().all(|x| *x == 0.0) {
                    p = z.clone();
                }
                break;
            }
            let alpha = rz / curv;
            p.iter_mut().zip(&s).for_each(|(a, b)| *a += alpha * b);
            r.iter_mut().zip(&hs).for_each(|(a, b)| *a -= alpha * b);
            if dot(&r, &r).sqrt() <= forcing {
                break;
            }
            z = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            s = z.iter().zip(&s).map(|(a, b)| a + beta * b).collect();
        }
        let slope = dot(&g, &p);
        if !(slope < 0.0) {
            p = g.iter().zip(&diag).map(|(a, d)| -a / d).collect();
        }
        let slope = dot(&g, &p);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            if let Ok(ft) = obj.value(&trial) {
                let mut gt = obj.gradient(&trial)?;
                mask(&mut gt);
                let rt = obj.residual(&gt);
                let armijo = ft <= f + 1e-4 * step * slope;
                let flat = (ft - f).abs() <= 1e-13 * (1.0 + f.abs()) && rt < res;
                if armijo || flat {
                    stall = if rt < 0.5 * res { 0 } else { stall + 1 };
                    v = trial;
                    f = ft;
                    g = gt;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted || stall > 20 {
            return Err(Error::InnerSolveFailed { residual: res });
        }
    }
    if res <= tol {
        Ok((v, SolveStats { iterations: 200, residual: res }))
    } else {
        Err(Error::InnerSolveFailed { residual: res })
    }
}

struct Movement<'a> {
    h: &'a ChartHamiltonian,
    st: Stencil,
    u0: &'a [f64],
    delta: f64,
    free: Vec<bool>,
}

impl Objective for Movement<'_> {
    fn value(&self, v: &[f64]) -> Result<f64> {
        let e = self.st.energy(self.h, v)?;
        let q: f64 = v.iter().zip(self.u0).zip(&self.st.masses).map(|((a, b), m)| m * (a - b) * (a - b)).sum();
        Ok(e + q / (2.0 * self.delta))
    }
    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.st.energy_gradient(self.h, v)?;
        for c in 0..g.len() {
            g[c] += self.st.masses[c] * (v[c] - self.u0[c]) / self.delta;
        }
        Ok(g)
    }
    fn hessian_cache(&self, v: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.st.fibre_hessians(self.h, v)
    }
    fn hess_vec(&self, cache: &[DMatrix<f64>], p: &[f64]) -> Vec<f64> {
        let mut out = self.st.hess_vec(cache, p);
        for c in 0..out.len() {
            out[c] += self.st.masses[c] * p[c] / self.delta;
        }
        out
    }
    fn hess_diag(&self, cache: &[DMatrix<f64>]) -> Vec<f64> {
        let mut d = self.st.hess_diag(cache, self.u0.len());
        d.iter_mut().zip(&self.st.masses).for_each(|(x, m)| *x += m / self.delta);
        d
    }
    fn residual(&self, g: &[f64]) -> f64 {
        // L²(m) norm of the Riesz representative
        g.iter().zip(&self.st.masses).map(|(a, m)| a * a / m).sum::<f64>().sqrt()
    }
    fn free(&self) -> &[bool] {
        &self.free
    }
}

/// Minimizer of `v ↦ E(v) + ‖v − u0‖²_{L²(m)} / (2δ)`.
pub fn minimizing_movement_step(h: &ChartHamiltonian, field0: &GridField, delta: f64) -> Result<(GridField, SolveStats)> {
    check_dim(h, field0)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("δ must be positive"));
    }
    let obj = Movement { h, st: Stencil::new(field0), u0: &field0.values, delta, free: vec![true; field0.grid.len()] };
    let (v, stats) = newton_cg(&obj, field0.values.clone(), 1e-10)?;
    Ok((field0.with_values(v), stats))
}

/// `(U_{t/k})^k (u0)`.
pub fn minimizing_movement(h: &ChartHamiltonian, field0: &GridField, t: f64, k: usize) -> Result<GridField> {
    let mut f = field0.clone();
    for _ in 0..k.max(1) {
        f = minimizing_movement_step(h, &f, t / k.max(1) as f64)?.0;
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeReport {
    /// `‖Δ^H_m u‖_{L²(m)}`.
    pub laplacian_norm: f64,
    /// Extrapolated `lim ‖u_{t+δ} − u_t‖ / δ`.
    pub metric_slope: f64,
    /// Extrapolated `lim (E(u_t) − E(u_{t+δ})) / δ`.
    pub energy_rate: f64,
    /// `|metric_slope − ‖Δu‖| / ‖Δu‖`, zero when both vanish.
    pub slope_gap: f64,
    /// `|energy_rate − ‖Δu‖²| / ‖Δu‖²`, zero when both vanish.
    pub energy_gap: f64,
}

/// Compares the metric slope and energy dissipation rate at `field` with `‖Δ^H_m u‖`.
///
/// `deltas` must be a geometric sequence with ratio ½ (at least two entries); the quotients are
/// Richardson-extrapolated to `δ → 0` assuming first-order behavior. Each sub-flow uses `substeps`
/// explicit steps.
pub fn slope_and_identity_check(h: &ChartHamiltonian, field: &GridField, deltas: &[f64], substeps: usize) -> Result<SlopeReport> {
    check_dim(h, field)?;
    if deltas.len() < 2 {
        return Err(Error::InvalidArgument("need at least two δ values"));
    }
    let st = Stencil::new(field);
    let lap = st.laplacian(h, &field.values)?;
    let lnorm = l2(&lap, &st.masses);
    let e0 = st.energy(h, &field.values)?;
    let mut slopes = Vec::with_capacity(deltas.len());
    let mut rates = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let run = heat_solve_explicit(h, field, d, d / substeps.max(1) as f64)?;
        let diff: Vec<f64> = run.field.values.iter().zip(&field.values).map(|(a, b)| a - b).collect();
        slopes.push(l2(&diff, &st.masses) / d);
        rates.push((e0 - st.energy(h, &run.field.values)?) / d);
    }
    let extrapolate = |q: &[f64]| {
        let mut level = q.to_vec();
        let mut factor = 2.0;
        while level.len() > 1 {
            level = level.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect();
            factor *= 2.0;
        }
        level[0]
    };
    let metric_slope = extrapolate(&slopes);
    let energy_rate = extrapolate(&rates);
    let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() };
    Ok(SlopeReport {
        laplacian_norm: lnorm,
        metric_slope,
        energy_rate,
        slope_gap: rel(metric_slope, lnorm),
        energy_gap: rel(energy_rate, lnorm * lnorm),
    })
}

fn log_mean(a: f64, b: f64) -> f64 {
    let r = b / a - 1.0;
    if r.abs() < 1e-4 {
        // (b − a)/(ln b − ln a) = a r / ln(1 + r)
        a * (1.0 + r / 2.0 - r * r / 12.0 + r * r * r / 24.0)
    } else {
        (b - a) / (b.ln() - a.ln())
    }
}

/// Right-hand side of `∂_t ρ = −div_m(ρ ∇[−log ρ])` with logarithmic-mean densities per difference.
fn entropy_rhs(h: &ChartHamiltonian, st: &Stencil, rho: &[f64]) -> Result<Vec<f64>> {
    let logs: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let mut out = vec![0.0; rho.len()];
    for t in &st.terms {
        let beta: Vec<f64> = st.diff(t, &logs).iter().map(|v| -v).collect();
        let (_, ha) = h.gradient(&t.x, &beta)?;
        let q: Vec<f64> = (0..st.d).map(|a| -log_mean(rho[t.cell], rho[t.nbrs[a]]) * ha[a]).collect();
        st.scatter(t, &q, &mut out);
    }
    Ok(out.iter().zip(&st.masses).map(|(g, m)| -g / m).collect())
}

/// `∫ {H(−d log ρ) + L(∇[−log ρ])} dμ` by cellwise quadrature with centered differences.
pub fn entropy_dissipation(h: &ChartHamiltonian, field: &GridField) -> Result<f64> {
    check_dim(h, field)?;
    let g = &field.grid;
    let masses = field.masses();
    let mut total = 0.0;
    for c in 0..g.len() {
        let x = g.coords(c);
        let mut beta = vec![0.0; g.dim()];
        for (a, b) in beta.iter_mut().enumerate() {
            let (Some(p), Some(m)) = (g.neighbor(c, a, 1), g.neighbor(c, a, -1)) else {
                return Err(Error::InvalidArgument("dissipation needs a periodic grid"));
            };
            *b = -(field.values[p].ln() - field.values[m].ln()) / (2.0 * g.spacing);
        }
        let hv = h.value(&x, &beta);
        let l = if beta.iter().all(|b| *b == 0.0) {
            0.0
        } else {
            let (_, v) = h.gradient(&x, &beta)?;
            lagrangian(h, &x, &v)?
        };
        total += masses[c] * field.values[c] * (hv + l);
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct EntropyRun {
    pub field: GridField,
    pub diagnostics: FlowDiagnostics,
    /// Worst `|dEnt/dt + dissipation| / dissipation` over the recorded checkpoints.
    pub dissipation_gap: f64,
}

/// Explicit Euler for the entropy gradient flow; `checks` evenly spaced checkpoints compare the
/// measured entropy rate with the dissipation integral.
pub fn entropy_flow_solve(h: &ChartHamiltonian, rho0: &GridField, t_end: f64, dt: f64, rho_min: f64, checks: usize) -> Result<EntropyRun> {
    check_dim(h, rho0)?;
    if rho0.values.iter().any(|r| !(*r > rho_min)) {
        return Err(Error::PositivityLost { min: rho0.values.iter().copied().fold(f64::INFINITY, f64::min), time: 0.0 });
    }
    let steps = step_count(t_end, dt)?;
    let dt = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let st = Stencil::new(rho0);
    let logs: Vec<f64> = rho0.values.iter().map(|r| -r.ln()).collect();
    let cache = st.fibre_hessians(h, &logs)?;
    let lam = st.stiffness(&cache);
    if lam > 0.0 {
        let bound = st.h * st.h / (2.0 * st.d as f64 * lam);
        if dt > bound {
            return Err(Error::TimeStepTooLarge { bound });
        }
    }
    let every = if checks == 0 { usize::MAX } else { (steps / (checks + 1)).max(1) };
    let mut field = rho0.clone();
    let mut diag = FlowDiagnostics::default();
    let mut rhs = entropy_rhs(h, &st, &field.values)?;
    diag.record(0.0, &field, st.energy(h, &field.values)?, &rhs, &st.masses);
    let mut gap: f64 = 0.0;
    for k in 0..steps {
        let check_here = k > 0 && k % every == 0;
        let dissipation = if check_here { Some(entropy_dissipation(h, &field)?) } else { None };
        for (u, r) in field.values.iter_mut().zip(&rhs) {
            *u += dt * r;
        }
        let t = (k + 1) as f64 * dt;
        let min = field.values.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > rho_min) {
            return Err(Error::PositivityLost { min, time: t });
        }
        if let Some(dis) = dissipation {
            // centered rate around t_k
            let ent = field.entropy().ok_or(Error::PositivityLost { min, time: t })?;
            let back = diag.entropy[k - 1].unwrap_or(f64::NAN);
            let rate = (ent - back) / (2.0 * dt);
            if dis > 0.0 {
                gap = gap.max((rate + dis).abs() / dis);
            }
        }
        rhs = entropy_rhs(h, &st, &field.values)?;
        diag.record(t, &field, st.energy(h, &field.values)?, &rhs, &st.masses);
    }
    Ok(EntropyRun { field, diagnostics: diag, dissipation_gap: gap })
}

struct Dirichlet<'a> {
    h: &'a ChartHamiltonian,
    st: Stencil,
    free: Vec<bool>,
}

impl Objective for Dirichlet<'_> {
    fn value(&self, v: &[f64]) -> Result<f64> {
        self.st.energy(self.h, v)
    }
    fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.st.energy_gradient(self.h, v)
    }
    fn hessian_cache(&self, v: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.st.fibre_hessians(self.h, v)
    }
    fn hess_vec(&self, cache: &[DMatrix<f64>], p: &[f64]) -> Vec<f64> {
        self.st.hess_vec(cache, p)
    }
    fn hess_diag(&self, cache: &[DMatrix<f64>]) -> Vec<f64> {
        self.st.hess_diag(cache, self.free.len())
    }
    fn residual(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.st.masses).zip(&self.free).filter(|(_, f)| **f).map(|((a, m), _)| (a / m).abs()).fold(0.0, f64::max)
    }
    fn free(&self) -> &[bool] {
        &self.free
    }
}

#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub field: GridField,
    /// `max |Δ^H_m u|` over interior cells.
    pub residual: f64,
    pub stats: SolveStats,
}

/// Minimizes `E` over the cells outside `boundary`, keeping boundary values from `init`.
pub fn dirichlet_harmonic(h: &ChartHamiltonian, init: &GridField, boundary: &[bool]) -> Result<HarmonicSolution> {
    check_dim(h, init)?;
    if boundary.len() != init.grid.len() {
        return Err(Error::ShapeMismatch);
    }
    if !boundary.iter().any(|b| *b) {
        return Err(Error::InvalidArgument("boundary mask is empty"));
    }
    let free: Vec<bool> = boundary.iter().map(|b| !b).collect();
    let obj = Dirichlet { h, st: Stencil::new(init), free };
    let (v, stats) = newton_cg(&obj, init.values.clone(), 1e-10)?;
    let g = obj.gradient(&v)?;
    let residual = obj.residual(&g);
    Ok(HarmonicSolution { field: init.with_values(v), residual, stats })
}
