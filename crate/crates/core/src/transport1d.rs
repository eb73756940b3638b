//! Optimal transport on the line by monotone rearrangement, displacement interpolation and the
//! entropy inequalities that live on it.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::hamiltonians::{lagrangian, legendre_inverse, ChartHamiltonian};
use crate::jets::ScalarField;

/// Interval weights of the six-point rule `∫_{x_i}^{x_{i+1}}` over nodes `i−2..=i+3`.
const CUMULATIVE6: [f64; 6] = [11.0 / 1440.0, -93.0 / 1440.0, 802.0 / 1440.0, 802.0 / 1440.0, -93.0 / 1440.0, 11.0 / 1440.0];

/// CDF values outside `[ε, 1 − ε]` are treated as unresolved tails.
const TAIL: f64 = 1e-12;

/// Uniform nodes `lo + i (hi − lo)/(nodes − 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

impl Line {
    pub fn new(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if !(hi > lo) || nodes < 16 {
            return Err(Error::InvalidArgument("line needs hi > lo and at least 16 nodes"));
        }
        Ok(Line { lo, hi, nodes })
    }
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.nodes - 1) as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }
    pub fn points(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// Trapezoid rule; spectrally accurate for data decaying at both ends.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let s: f64 = f.iter().sum();
        self.step() * (s - 0.5 * (f[0] + f[f.len() - 1]))
    }

    /// Six-point Lagrange interpolation of nodal data at `y`; zero outside the line.
    pub fn interpolate(&self, f: &[f64], y: f64) -> f64 {
        if y < self.lo || y > self.hi {
            return 0.0;
        }
        let s = (y - self.lo) / self.step();
        let i = (s.floor() as isize).clamp(0, self.nodes as isize - 2);
        let lo = (i - 2).clamp(0, self.nodes as isize - 6) as usize;
        let mut out = 0.0;
        for j in lo..lo + 6 {
            let mut w = 1.0;
            for l in lo..lo + 6 {
                if l != j {
                    w *= (s - l as f64) / (j as f64 - l as f64);
                }
            }
            out += w * f[j];
        }
        out
    }

    /// `∫_{lo}^{x_i} f` at every node from the six-point cumulative rule with zero padding.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let n = self.nodes;
        let at = |k: isize| if (0..n as isize).contains(&k) { f[k as usize] } else { 0.0 };
        let mut out = vec![0.0; n];
        for i in 0..n - 1 {
            let piece: f64 = (0..6).map(|j| CUMULATIVE6[j] * at(i as isize - 2 + j as isize)).sum();
            out[i + 1] = out[i] + self.step() * piece;
        }
        out
    }

    /// Central sixth-order derivative of nodal data, one-sided near the ends.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let n = self.nodes;
        let h = self.step();
        (0..n)
            .map(|i| {
                let lo = (i as isize - 3).clamp(0, n as isize - 7) as usize;
                let s = i as f64;
                let mut d = 0.0;
                for j in lo..lo + 7 {
                    let mut denom = 1.0;
                    for l in lo..lo + 7 {
                        if l != j {
                            denom *= j as f64 - l as f64;
                        }
                    }
                    let mut num = 0.0;
                    for skip in lo..lo + 7 {
                        if skip == j {
                            continue;
                        }
                        let mut prod = 1.0;
                        for l in lo..lo + 7 {
                            if l != j && l != skip {
                                prod *= s - l as f64;
                            }
                        }
                        num += prod;
                    }
                    d += f[j] * num / denom;
                }
                d / h
            })
            .collect()
    }
}

/// Reference measure `m = e^{−ψ} dx`.
#[derive(Clone, Debug)]
pub struct Reference {
    pub psi: ScalarField,
}

impl Reference {
    pub fn lebesgue() -> Self {
        Reference { psi: ScalarField::constant(1, 0.0) }
    }
    /// Standard Gaussian probability measure.
    pub fn gaussian() -> Self {
        let c = 0.5 * (2.0 * core::f64::consts::PI).ln();
        Reference { psi: ScalarField::new(1, move |x| &x[0] * &x[0] * 0.5 + c) }
    }
    pub fn psi(&self, x: f64) -> f64 {
        self.psi.value(&[x])
    }
    pub fn psi_prime(&self, x: f64) -> Result<f64> {
        Ok(self.psi.jet(&[x], 1)?.d1(0))
    }
}

/// `μ = ρ m` sampled on a line.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub line: Line,
    pub reference: Reference,
    /// `ρ` at the nodes.
    pub rho: Vec<f64>,
    /// `e^{−ψ}` at the nodes.
    pub weight: Vec<f64>,
    /// `μ[lo, x_i]`.
    pub cdf: Vec<f64>,
}

impl DensityProfile {
    /// Normalizes `ρ` so that `∫ ρ dm = 1`.
    pub fn new(line: Line, reference: Reference, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != line.nodes {
            return Err(Error::ShapeMismatch);
        }
        if rho.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("density must be finite and nonnegative"));
        }
        let weight: Vec<f64> = line.points().iter().map(|x| (-reference.psi(*x)).exp()).collect();
        let dens: Vec<f64> = rho.iter().zip(&weight).map(|(r, w)| r * w).collect();
        let total = line.integrate(&dens);
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("density has no mass"));
        }
        let rho: Vec<f64> = rho.iter().map(|r| r / total).collect();
        let mut p = DensityProfile { line, reference, rho, weight, cdf: Vec::new() };
        let cdf = line.cumulative(&p.lebesgue_density());
        let last = cdf[cdf.len() - 1];
        p.cdf = cdf.iter().map(|c| (c / last).clamp(0.0, 1.0)).collect();
        Ok(p)
    }

    /// From a Lebesgue density `f` of `μ`, so that `ρ = f e^{ψ}`.
    pub fn from_lebesgue_density<F: Fn(f64) -> f64>(line: Line, reference: Reference, f: F) -> Result<Self> {
        let rho = line.points().iter().map(|x| f(*x) * reference.psi(*x).exp()).collect();
        DensityProfile::new(line, reference, rho)
    }

    /// `ρ e^{−ψ}` at the nodes.
    pub fn lebesgue_density(&self) -> Vec<f64> {
        self.rho.iter().zip(&self.weight).map(|(r, w)| r * w).collect()
    }

    /// `∫ ρ dm`.
    pub fn mass(&self) -> f64 {
        self.line.integrate(&self.lebesgue_density())
    }

    /// `∫ f(x) dμ`.
    pub fn expect(&self, f: &[f64]) -> f64 {
        let d: Vec<f64> = self.lebesgue_density().iter().zip(f).map(|(a, b)| a * b).collect();
        self.line.integrate(&d)
    }

    /// Total reference mass `m[lo, hi]`.
    pub fn reference_mass(&self) -> f64 {
        self.line.integrate(&self.weight)
    }

    /// CDF at an arbitrary point from the six-point interpolant of the density.
    fn cdf_at(&self, y: f64, dens: &[f64], last: f64) -> f64 {
        let line = &self.line;
        if y <= line.lo {
            return 0.0;
        }
        if y >= line.hi {
            return 1.0;
        }
        let i = (((y - line.lo) / line.step()).floor() as usize).min(line.nodes - 2);
        let a = line.x(i);
        // three-point Gauss–Legendre on [a, y], exact for the quintic interpolant
        let half = 0.5 * (y - a);
        let mid = a + half;
        let r = (0.6f64).sqrt();
        let q = half
            * (5.0 * line.interpolate(dens, mid - r * half)
                + 8.0 * line.interpolate(dens, mid)
                + 5.0 * line.interpolate(dens, mid + r * half))
            / 9.0;
        (self.cdf[i] + q / last).clamp(0.0, 1.0)
    }
}

fn require_translation_invariant(h: &ChartHamiltonian) -> Result<()> {
    if h.dim() != 1 || !h.is_x_independent() {
        return Err(Error::NotTranslationInvariant);
    }
    Ok(())
}

/// `c^L_T(x, y) = T L((y − x)/T)` for `L` dual to an `x`-independent `H` on the line.
pub fn cost_ct(h: &ChartHamiltonian, x: f64, y: f64, horizon: f64) -> Result<f64> {
    require_translation_invariant(h)?;
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive"));
    }
    let v = (y - x) / horizon;
    if v == 0.0 {
        return Ok(0.0);
    }
    Ok(horizon * lagrangian(h, &[0.0], &[v])?)
}

#[derive(Clone, Debug)]
pub struct TransportPlan1D {
    pub source: DensityProfile,
    pub target: DensityProfile,
    /// `T(x_i)`.
    pub map: Vec<f64>,
    /// `T'(x_i) = f(x_i)/g(T(x_i))`.
    pub map_derivative: Vec<f64>,
    pub horizon: f64,
    /// Nodes where the CDF is resolved; the map is continued by constant displacement outside.
    pub resolved: (usize, usize),
}

impl TransportPlan1D {
    /// `(T(x) − x)/T`, the velocity `η̇(0) = τ*(dφ_x)`.
    pub fn velocity(&self) -> Vec<f64> {
        self.map.iter().zip(self.source.line.points()).map(|(t, x)| (t - x) / self.horizon).collect()
    }
}

/// `T = G⁻¹ ∘ F` for the CDFs `F` of `μ` and `G` of `ν`.
pub fn monotone_transport(mu: &DensityProfile, nu: &DensityProfile, h: &ChartHamiltonian, horizon: f64) -> Result<TransportPlan1D> {
    require_translation_invariant(h)?;
    if mu.line != nu.line {
        return Err(Error::ShapeMismatch);
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive"));
    }
    let line = mu.line;
    let dx = line.step();
    let f = mu.lebesgue_density();
    let g = nu.lebesgue_density();
    let g_total = line.cumulative(&g);
    let g_last = g_total[g_total.len() - 1];
    if g.iter().any(|v| v * dx / g_last > 0.25) {
        return Err(Error::CdfIllPosed);
    }
    let n = line.nodes;
    let f_total = line.cumulative(&f);
    let f_last = f_total[n - 1];
    let mut map = vec![f64::NAN; n];
    let mut deriv = vec![1.0; n];
    let resolved: Vec<usize> = (0..n).filter(|&i| mu.cdf[i] >= TAIL && mu.cdf[i] <= 1.0 - TAIL).collect();
    let (first, last) = match (resolved.first(), resolved.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::CdfIllPosed),
    };
    for i in first..=last {
        let target = mu.cdf[i];
        let j = nu.cdf.partition_point(|c| *c < target).clamp(1, n - 1);
        let (mut a, mut b) = (line.x(j - 1), line.x(j));
        let mut y = if nu.cdf[j] > nu.cdf[j - 1] { a + (target - nu.cdf[j - 1]) / (nu.cdf[j] - nu.cdf[j - 1]) * dx } else { 0.5 * (a + b) };
        for _ in 0..50 {
            let r = nu.cdf_at(y, &g, g_last) - target;
            if r > 0.0 {
                b = y;
            } else {
                a = y;
            }
            let slope = line.interpolate(&g, y) / g_last;
            let mut next = if slope > 0.0 { y - r / slope } else { 0.5 * (a + b) };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
                y = next;
                break;
            }
            y = next;
        }
        map[i] = y;
        let gy = line.interpolate(&g, y) / g_last;
        if !(gy > 0.0) {
            return Err(Error::CdfIllPosed);
        }
        deriv[i] = f[i] / f_last / gy;
    }
    for i in 0..first {
        map[i] = line.x(i) + (map[first] - line.x(first));
    }
    for i in last + 1..n {
        map[i] = line.x(i) + (map[last] - line.x(last));
    }
    if map.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::CdfIllPosed);
    }
    Ok(TransportPlan1D { source: mu.clone(), target: nu.clone(), map, map_derivative: deriv, horizon, resolved: (first, last) })
}

/// `(C^L_T, C^H_T) = (∫ c^L_T(x, T(x)) dμ, T ∫ H(dφ) dμ)`.
pub fn transport_costs(h: &ChartHamiltonian, plan: &TransportPlan1D) -> Result<(f64, f64)> {
    require_translation_invariant(h)?;
    let vel = plan.velocity();
    let mut cl = Vec::with_capacity(vel.len());
    let mut ch = Vec::with_capacity(vel.len());
    for v in &vel {
        if *v == 0.0 {
            cl.push(0.0);
            ch.push(0.0);
            continue;
        }
        cl.push(plan.horizon * lagrangian(h, &[0.0], &[*v])?);
        let a = legendre_inverse(h, &[0.0], &[*v])?.alpha;
        ch.push(plan.horizon * h.value(&[0.0], &a));
    }
    Ok((plan.source.expect(&cl), plan.source.expect(&ch)))
}

/// Cost of the product coupling `μ ⊗ ν`.
pub fn independent_coupling_cost(h: &ChartHamiltonian, mu: &DensityProfile, nu: &DensityProfile, horizon: f64) -> Result<f64> {
    require_translation_invariant(h)?;
    if mu.line != nu.line {
        return Err(Error::ShapeMismatch);
    }
    let line = mu.line;
    let n = line.nodes;
    let dx = line.step();
    // c depends on (j − i) only
    let mut table = vec![0.0; 2 * n - 1];
    for (k, slot) in table.iter_mut().enumerate() {
        let d = (k as f64 - (n - 1) as f64) * dx;
        *slot = cost_ct(h, 0.0, d, horizon)?;
    }
    let f = mu.lebesgue_density();
    let g = nu.lebesgue_density();
    let inner: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = (0..n).map(|j| table[j + n - 1 - i] * g[j]).collect();
            line.integrate(&row)
        })
        .collect();
    let outer: Vec<f64> = inner.iter().zip(&f).map(|(a, b)| a * b).collect();
    Ok(line.integrate(&outer))
}

/// `T_t(x) = x + (t/T)(T(x) − x)` and its derivative at the nodes.
fn interpolated_map(plan: &TransportPlan1D, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=plan.horizon).contains(&t) {
        return Err(Error::InvalidArgument("t outside [0, T]"));
    }
    let s = t / plan.horizon;
    let xs = plan.source.line.points();
    let map: Vec<f64> = xs.iter().zip(&plan.map).map(|(x, m)| x + s * (m - x)).collect();
    let der: Vec<f64> = plan.map_derivative.iter().map(|d| 1.0 - s + s * d).collect();
    if der.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InjectivityLost);
    }
    Ok((map, der))
}

/// `D_m[T_t](x_i) = e^{ψ(x) − ψ(T_t x)} T_t'(x)`.
pub fn weighted_jacobian(plan: &TransportPlan1D, t: f64) -> Result<Vec<f64>> {
    let (map, der) = interpolated_map(plan, t)?;
    let r = &plan.source.reference;
    Ok(plan.source.line.points().iter().zip(&map).zip(&der).map(|((x, y), d)| (r.psi(*x) - r.psi(*y)).exp() * d).collect())
}

/// `μ_t = (T_t)_# μ` resampled on the source line.
pub fn displacement_interpolation(plan: &TransportPlan1D, t: f64) -> Result<DensityProfile> {
    let (map, der) = interpolated_map(plan, t)?;
    let src = &plan.source;
    let line = src.line;
    let f = src.lebesgue_density();
    // Lebesgue density of μ_t at the moved points
    let moved: Vec<f64> = f.iter().zip(&der).map(|(a, d)| a / d).collect();
    let n = line.nodes;
    let mut dens = vec![0.0; n];
    for (i, slot) in dens.iter_mut().enumerate() {
        let y = line.x(i);
        if y < map[0] || y > map[n - 1] {
            continue;
        }
        let j = map.partition_point(|m| *m < y).clamp(1, n - 1);
        let lo = (j as isize - 3).clamp(0, n as isize - 6) as usize;
        let mut v = 0.0;
        for a in lo..lo + 6 {
            let mut w = 1.0;
            for b in lo..lo + 6 {
                if a != b {
                    w *= (y - map[b]) / (map[a] - map[b]);
                }
            }
            v += w * moved[a];
        }
        *slot = v.max(0.0);
    }
    let rho: Vec<f64> = dens.iter().zip(&src.weight).map(|(d, w)| if *w > 0.0 { d / w } else { 0.0 }).collect();
    let raw_mass = line.integrate(&dens);
    let out = DensityProfile::new(line, src.reference.clone(), rho)?;
    if (raw_mass - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("displacement interpolation lost mass"));
    }
    Ok(out)
}

/// Both sides of `∫ f(ρ_t) dm = ∫ f(ρ₀/D_m[T_t]) D_m[T_t] dm` for `f` with `f(0) = 0`.
pub fn change_of_variables<F: Fn(f64) -> f64>(plan: &TransportPlan1D, t: f64, f: F) -> Result<(f64, f64)> {
    let mt = displacement_interpolation(plan, t)?;
    let line = mt.line;
    let lhs_int: Vec<f64> = mt.rho.iter().zip(&mt.weight).map(|(r, w)| f(*r) * w).collect();
    let d = weighted_jacobian(plan, t)?;
    let src = &plan.source;
    let rhs_int: Vec<f64> = src.rho.iter().zip(&d).zip(&src.weight).map(|((r, dd), w)| f(r / dd) * dd * w).collect();
    Ok((line.integrate(&lhs_int), line.integrate(&rhs_int)))
}

pub fn s_log_s(s: f64) -> f64 {
    if s > 0.0 {
        s * s.ln()
    } else {
        0.0
    }
}

/// `Ent_m(μ) = ∫ ρ log ρ dm`.
pub fn entropy(mu: &DensityProfile) -> f64 {
    let v: Vec<f64> = mu.rho.iter().zip(&mu.weight).map(|(r, w)| s_log_s(*r) * w).collect();
    mu.line.integrate(&v)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherInformation {
    pub value: f64,
    /// False when `ρ` vanishes inside the support so that `d log ρ` is not resolved.
    pub reliable: bool,
}

/// `I_m(μ) = ∫ H(−d log ρ) dμ`.
pub fn fisher_information(h: &ChartHamiltonian, mu: &DensityProfile) -> Result<FisherInformation> {
    require_translation_invariant(h)?;
    let line = mu.line;
    let dens = mu.lebesgue_density();
    let scale = dens.iter().copied().fold(0.0, f64::max);
    let logs: Vec<f64> = mu.rho.iter().map(|r| if *r > 0.0 { r.ln() } else { f64::NAN }).collect();
    let dlog = line.derivative(&logs);
    let mut reliable = true;
    let mut integrand = vec![0.0; line.nodes];
    for i in 0..line.nodes {
        if dens[i] <= 1e-250 * scale.max(1e-300) {
            continue;
        }
        let lo = i.saturating_sub(3).min(line.nodes - 7);
        if !(lo..lo + 7).all(|j| logs[j].is_finite()) || !dlog[i].is_finite() {
            reliable = false;
            continue;
        }
        integrand[i] = h.value(&[line.x(i)], &[-dlog[i]]) * dens[i];
    }
    Ok(FisherInformation { value: line.integrate(&integrand), reliable })
}

/// `max` over the `(a, b, t)` grid of
/// `Ent(μ_{(1−t)a+tb}) − (1−t)Ent(μ_a) − t Ent(μ_b) + (K/2)(1−t)t(b−a)² ∫H(dφ)dμ₀`.
pub fn k_convexity_check(h: &ChartHamiltonian, plan: &TransportPlan1D, k: f64, samples: usize) -> Result<f64> {
    require_translation_invariant(h)?;
    let big_t = plan.horizon;
    let (_, ch) = transport_costs(h, plan)?;
    let h_int = ch / big_t;
    let m = samples.max(2);
    let times: Vec<f64> = (0..=m).map(|i| big_t * i as f64 / m as f64).collect();
    let ents: Vec<f64> = times.iter().map(|t| Ok(entropy(&displacement_interpolation(plan, *t)?))).collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    for ia in 0..=m {
        for ib in ia + 1..=m {
            for it in ia + 1..ib {
                // interior node of [a, b]
                let (a, b, c) = (times[ia], times[ib], times[it]);
                let s = (c - a) / (b - a);
                let rhs = (1.0 - s) * ents[ia] + s * ents[ib] - 0.5 * k * (1.0 - s) * s * (b - a).powi(2) * h_int;
                worst = worst.max(ents[it] - rhs);
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyDerivative {
    /// One-sided slope of `t ↦ Ent(μ_t)` at `0⁺`.
    pub lhs: f64,
    /// `∫ (dρ/ρ)(∇φ) dμ`.
    pub rhs: f64,
    /// `max |(D_m[T_t] − 1)/t − Δ_m φ|` at `t = delta` over nodes carrying the bulk of `μ`.
    pub jacobian_defect: f64,
}

/// Directional derivative of the entropy at `μ₀` along the plan, from `t ∈ {δ, 2δ}`.
pub fn entropy_derivative_check(plan: &TransportPlan1D, delta: f64) -> Result<EntropyDerivative> {
    let src = &plan.source;
    let line = src.line;
    let e0 = entropy(src);
    let e1 = entropy(&displacement_interpolation(plan, delta)?);
    let e2 = entropy(&displacement_interpolation(plan, 2.0 * delta)?);
    let lhs = (-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * delta);
    let vel = plan.velocity();
    let drho = line.derivative(&src.rho);
    let integrand: Vec<f64> = (0..line.nodes).map(|i| if src.rho[i] > 0.0 { drho[i] / src.rho[i] * vel[i] } else { 0.0 }).collect();
    let rhs = src.expect(&integrand);
    let dvel = line.derivative(&vel);
    let d = weighted_jacobian(plan, delta)?;
    let dens = src.lebesgue_density();
    let bulk = 1e-6 * dens.iter().copied().fold(0.0, f64::max);
    let (first, last) = plan.resolved;
    let mut jacobian_defect: f64 = 0.0;
    for i in first + 3..last.saturating_sub(3) {
        if dens[i] < bulk {
            continue;
        }
        let x = line.x(i);
        let lap = dvel[i] - vel[i] * src.reference.psi_prime(x)?;
        jacobian_defect = jacobian_defect.max(((d[i] - 1.0) / delta - lap).abs());
    }
    Ok(EntropyDerivative { lhs, rhs, jacobian_defect })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TalagrandHwi {
    pub entropy: f64,
    pub fisher: f64,
    /// `C^H_T(μ, m)`.
    pub cost_h: f64,
    /// `T ∫ L(∇φ) dμ`.
    pub action: f64,
    /// `(2/KT) Ent(μ) − C^H_T`.
    pub talagrand_slack: f64,
    /// `T I_m(μ) + T∫L(∇φ)dμ − (KT/2) C^H_T − Ent(μ)`.
    pub hwi_slack: f64,
}

/// Talagrand and HWI inequalities for `μ` against its own probability reference `m`.
pub fn talagrand_hwi_check(h: &ChartHamiltonian, mu: &DensityProfile, horizon: f64, k: f64) -> Result<TalagrandHwi> {
    let mass = mu.reference_mass();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("reference measure must be a probability measure on the line"));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidArgument("K must be positive"));
    }
    let m = DensityProfile::new(mu.line, mu.reference.clone(), vec![1.0; mu.line.nodes])?;
    let plan = monotone_transport(mu, &m, h, horizon)?;
    let (cl, ch) = transport_costs(h, &plan)?;
    let ent = entropy(mu);
    let fisher = fisher_information(h, mu)?.value;
    let talagrand_slack = 2.0 / (k * horizon) * ent - ch;
    let hwi_slack = horizon * fisher + cl - 0.5 * k * horizon * ch - ent;
    Ok(TalagrandHwi { entropy: ent, fisher, cost_h: ch, action: cl, talagrand_slack, hwi_slack })
}

/// Cost of pairing sorted atoms in order (uniform weights).
pub fn monotone_coupling_cost<C: Fn(f64, f64) -> f64>(xs: &[f64], ys: &[f64], cost: C) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::ShapeMismatch);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(a.iter().zip(&b).map(|(x, y)| cost(*x, *y)).sum::<f64>() / xs.len() as f64)
}

/// Minimum over all permutation couplings (uniform weights) by dynamic programming over subsets.
pub fn assignment_optimum<C: Fn(f64, f64) -> f64>(xs: &[f64], ys: &[f64], cost: C) -> Result<f64> {
    let n = xs.len();
    if ys.len() != n || n == 0 {
        return Err(Error::ShapeMismatch);
    }
    if n > 16 {
        return Err(Error::InvalidArgument("assignment oracle limited to 16 atoms"));
    }
    let mut best = vec![f64::INFINITY; 1 << n];
    best[0] = 0.0;
    for mask in 0usize..(1 << n) {
        let i = mask.count_ones() as usize;
        if i >= n || !best[mask].is_finite() {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let v = best[mask] + cost(xs[i], ys[j]);
                if v < best[next] {
                    best[next] = v;
                }
            }
        }
    }
    Ok(best[(1 << n) - 1] / n as f64)
}
