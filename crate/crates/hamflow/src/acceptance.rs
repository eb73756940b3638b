//! The acceptance suite: thirteen criteria, each a list of measured checks.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::sync::Arc;
use std::time::Instant;

use hamflow_core::comparison::{
    bochner_residual, laplacian_comparison_check, mcp_ratio_check, riccati_residual, ComparisonReport, ComparisonSetup, CurvatureCurve,
};
use hamflow_core::flow::{variational_flow, FlowOptions};
use hamflow_core::frames::{
    canonical_frame, curvature_at, curvature_coordinate_formula, fconv_scaling_check, gauge_drift, ricci, time_shift_defect, Gauge,
};
use hamflow_core::hamiltonians::{
    euclidean, hyperbolic_disk, mechanical, p_homogeneous, randers, sphere_chart, ChartHamiltonian, CoMetric, CotangentState, Potential,
    Profile, WeightField,
};
use hamflow_core::heatgrid::{
    dirichlet_harmonic, discrete_energy, entropy_flow_solve, heat_contraction, heat_solve_explicit, l2_distance, minimizing_movement,
    slope_and_identity_check, stability_bound, Grid, GridField,
};
use hamflow_core::jets::{sum, ScalarField};
use hamflow_core::transport1d::{
    assignment_optimum, change_of_variables, cost_ct, entropy_derivative_check, k_convexity_check, monotone_coupling_cost,
    monotone_transport, s_log_s, talagrand_hwi_check, DensityProfile, Line, Reference,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::Check;

type Measure = fn() -> hamflow_core::Result<Vec<Check>>;

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub title: &'static str,
    /// Wall-clock budget in seconds.
    pub budget_s: f64,
    measure: Measure,
}

pub const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "flat-curvature", title: "flat curvature vanishes", budget_s: 1.0, measure: flat_curvature },
    Criterion {
        id: 2,
        name: "mechanical",
        title: "mechanical curvature is the potential Hessian",
        budget_s: 5.0,
        measure: mechanical_curvature,
    },
    Criterion { id: 3, name: "constant-curvature", title: "sphere Ricci on unit covectors", budget_s: 10.0, measure: constant_curvature },
    Criterion { id: 4, name: "deformation", title: "deformation scaling of Ricci", budget_s: 20.0, measure: deformation_scaling },
    Criterion { id: 5, name: "frames", title: "canonical frame properties", budget_s: 20.0, measure: frame_lemmas },
    Criterion { id: 6, name: "riccati", title: "matrix and trace Riccati residuals", budget_s: 20.0, measure: riccati_criterion },
    Criterion { id: 7, name: "bochner", title: "Bochner identity and dimensional slack", budget_s: 10.0, measure: bochner_criterion },
    Criterion { id: 8, name: "comparison", title: "Laplacian comparison", budget_s: 10.0, measure: comparison_criterion },
    Criterion { id: 9, name: "mcp", title: "measure contraction ratio", budget_s: 5.0, measure: mcp_criterion },
    Criterion { id: 10, name: "heat", title: "heat flow", budget_s: 60.0, measure: heat_criterion },
    Criterion { id: 11, name: "entropy-flow", title: "entropy gradient flow", budget_s: 60.0, measure: entropy_criterion },
    Criterion { id: 12, name: "transport", title: "1D transport inequalities", budget_s: 30.0, measure: transport_criterion },
    Criterion { id: 13, name: "harmonic", title: "discrete harmonicity", budget_s: 10.0, measure: harmonic_criterion },
];

pub fn names() -> Vec<String> {
    CRITERIA.iter().map(|c| c.name.to_string()).collect()
}

/// Criteria matching `filter` (names or numeric ids, comma separated) in id order; `None` selects all.
pub fn select(filter: Option<&str>) -> Result<Vec<&'static Criterion>> {
    let Some(f) = filter else {
        return Ok(CRITERIA.iter().collect());
    };
    let mut picked: Vec<&'static Criterion> = f
        .split(',')
        .map(|part| {
            let part = part.trim();
            CRITERIA
                .iter()
                .find(|c| c.name == part || part.parse::<usize>().ok() == Some(c.id))
                .ok_or_else(|| Error::UnknownCriterion { name: part.to_string(), available: names() })
        })
        .collect::<Result<_>>()?;
    picked.sort_by_key(|c| c.id);
    picked.dedup_by_key(|c| c.id);
    Ok(picked)
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub title: &'static str,
    pub pass: bool,
    pub seconds: f64,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CriterionOutcome {
    /// One line: status, id, name, and the tightest check.
    pub fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let detail = match (&self.error, self.worst()) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(c)) => c.line(),
            (None, None) => "no checks".to_string(),
        };
        format!("[{status}] {:>2} {:<18} {detail} ({:.1}s)", self.id, self.name, self.seconds)
    }

    /// First failing check, else the one closest to its threshold.
    pub fn worst(&self) -> Option<&Check> {
        if let Some(c) = self.checks.iter().find(|c| !c.pass) {
            return Some(c);
        }
        let margin = |c: &Check| {
            let span = c.threshold.abs().max(1e-300);
            match c.bound {
                crate::report::Bound::AtMost => (c.threshold - c.measured) / span,
                crate::report::Bound::AtLeast => (c.measured - c.threshold) / span,
            }
        };
        // flags and the runtime budget say little about numerical margin
        let numeric = |c: &&Check| !c.is_flag() && c.name != "runtime seconds";
        self.checks.iter().filter(numeric).min_by(|a, b| margin(a).total_cmp(&margin(b))).or(self.checks.first())
    }
}

pub fn run_criterion(c: &Criterion, tolerance_scale: f64) -> CriterionOutcome {
    let start = Instant::now();
    let (mut checks, error) = match (c.measure)() {
        Ok(checks) => (checks.into_iter().map(|k| k.scaled(tolerance_scale)).collect::<Vec<_>>(), None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let seconds = start.elapsed().as_secs_f64();
    let pass = error.is_none() && !checks.is_empty() && checks.iter().all(|k| k.pass) && seconds <= c.budget_s;
    checks.push(Check::at_most("runtime seconds", seconds, c.budget_s));
    CriterionOutcome { id: c.id, name: c.name, title: c.title, pass, seconds, checks, error }
}

/// Runs the selected criteria in parallel; results come back in id order.
pub fn run(selected: &[&Criterion], tolerance_scale: f64) -> Vec<CriterionOutcome> {
    selected.par_iter().map(|c| run_criterion(c, tolerance_scale)).collect()
}

fn worst<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

fn least<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::INFINITY, f64::min)
}

fn state(x: &[f64], a: &[f64]) -> CotangentState {
    CotangentState::new(x.to_vec(), a.to_vec())
}

fn mech() -> ChartHamiltonian {
    mechanical(CoMetric::euclidean(2), Potential::Quadratic(vec![1.0, 0.0])).expect("valid fixture")
}

fn p3_sphere() -> ChartHamiltonian {
    p_homogeneous(3.0, CoMetric::Sphere).expect("valid fixture")
}

fn p3_flat(n: usize) -> ChartHamiltonian {
    p_homogeneous(3.0, CoMetric::euclidean(n)).expect("valid fixture")
}

fn wavy_mechanical() -> ChartHamiltonian {
    let z = ScalarField::new(2, |x| &x[0].sin() * 0.3 + &(&x[1] * &x[1]) * 0.2);
    mechanical(CoMetric::euclidean(2), Potential::Field(z)).expect("valid fixture")
}

/// Unit covector for a conformal co-metric `F* = λ|α|`.
fn conformal_unit(x: [f64; 2], lambda: f64, dir: [f64; 2]) -> CotangentState {
    let n = dir[0].hypot(dir[1]);
    state(&x, &[dir[0] / (n * lambda), dir[1] / (n * lambda)])
}

fn sphere_unit(x: [f64; 2], dir: [f64; 2]) -> CotangentState {
    conformal_unit(x, 0.5 * (1.0 + x[0] * x[0] + x[1] * x[1]), dir)
}

fn hyperbolic_unit(x: [f64; 2], dir: [f64; 2]) -> CotangentState {
    conformal_unit(x, 0.5 * (1.0 - x[0] * x[0] - x[1] * x[1]), dir)
}

fn flat_curvature() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let mut out = Vec::new();
    for (h, s) in [(euclidean(2), state(&[0.3, -0.2], &[0.6, 0.8])), (euclidean(3), state(&[0.0, 1.0, -1.0], &[0.2, -1.1, 0.4]))] {
        let rep = curvature_at(&h, &s, &opts)?;
        out.push(Check::at_most(format!("|R| euclidean({})", h.dim()), rep.r.amax(), 1e-7));
        out.push(Check::at_most(format!("|Ric| euclidean({})", h.dim()), rep.ric.abs(), 1e-7));
    }
    Ok(out)
}

fn mechanical_curvature() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
    let mut frame_err = Vec::new();
    let mut coord_err = Vec::new();
    let mut agree = Vec::new();
    for s in [state(&[0.3, -0.2], &[0.6, 0.8]), state(&[-1.0, 0.5], &[0.1, -2.0]), state(&[0.0, 0.0], &[1.0, 0.0])] {
        let frame = curvature_at(&mech(), &s, &opts)?;
        let coord = curvature_coordinate_formula(&mech(), &s, &opts)?;
        frame_err.push((&frame.r - &expected).norm());
        coord_err.push((&coord.r - &expected).norm());
        agree.push((&frame.r - &coord.r).norm());
    }
    Ok(vec![
        Check::at_most("frame route |R - Hess Z|", worst(frame_err), 1e-5),
        Check::at_most("coordinate route |R - Hess Z|", worst(coord_err), 1e-5),
        Check::at_most("route agreement", worst(agree), 1e-5),
    ])
}

fn constant_curvature() -> hamflow_core::Result<Vec<Check>> {
    let h = sphere_chart();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut points = vec![([0.0, 0.0], [1.0, 0.0]), ([0.4, 0.1], [0.6, 0.8]), ([-0.7, 0.9], [-0.2, 1.0])];
    for _ in 0..5 {
        let th: f64 = rng.random_range(0.0..TAU);
        points.push(([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], [th.cos(), th.sin()]));
    }
    let devs = points.iter().map(|(x, d)| Ok((ricci(&h, &sphere_unit(*x, *d))? - 1.0).abs())).collect::<hamflow_core::Result<Vec<_>>>()?;
    Ok(vec![Check::at_most("|Ric - 1| sphere unit covectors", worst(devs), 1e-4)])
}

fn deformation_scaling() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let profiles =
        [("t^2/2", Profile::Quadratic { a: 1.0 }), ("(2t)^2/2", Profile::Quadratic { a: 2.0 }), ("t^3/3", Profile::Power { p: 3.0 })];
    let fixtures = [
        ("sphere", CoMetric::Sphere, state(&[0.3, 0.1], &[0.9, -0.5])),
        ("hyperbolic", CoMetric::Hyperbolic, state(&[0.2, -0.3], &[1.4, 0.6])),
    ];
    let mut out = Vec::new();
    for (label, metric, s) in &fixtures {
        for (pl, prof) in &profiles {
            let c = fconv_scaling_check(metric, prof, s, None, &opts)?;
            out.push(Check::at_most(format!("relative defect {label} h={pl}"), c.defect / c.rhs.abs().max(1e-12), 1e-4));
        }
    }
    Ok(out)
}

fn rotating_gauge(theta0: f64, rate: f64) -> Gauge {
    Arc::new(move |t: f64| {
        let th = theta0 + rate * t;
        let q = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let dq = DMatrix::from_row_slice(2, 2, &[-th.sin(), -th.cos(), th.cos(), -th.sin()]) * rate;
        (q, dq)
    })
}

fn frame_lemmas() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let fixtures = [
        (mech(), state(&[0.3, -0.2], &[0.6, 0.8])),
        (wavy_mechanical(), state(&[0.2, 0.1], &[0.6, 0.8])),
        (sphere_chart(), sphere_unit([0.2, 0.1], [1.0, 0.4])),
        (p3_sphere(), state(&[0.2, 0.1], &[0.9, 0.4])),
        (randers(DMatrix::identity(2, 2), vec![0.3, 0.0]).expect("valid fixture"), state(&[0.0, 0.0], &[0.2, 1.0])),
    ];
    let (mut sym, mut gauge, mut lag, mut curv_sym, mut shift) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (h, s) in &fixtures {
        let traj = variational_flow(h, s, 1.0, &opts)?;
        sym.push(traj.symplectic_defect().unwrap_or(f64::INFINITY));
        for (theta0, rate) in [(0.7, 0.0), (-1.1, 0.8), (2.0, -1.5)] {
            gauge.push(gauge_drift(h, &traj, rotating_gauge(theta0, rate))?);
        }
        let fb = canonical_frame(h, &traj)?;
        lag.push(fb.defects().lagrangian);
        curv_sym.push(curvature_at(h, s, &opts)?.symmetry_defect());
        for t in [0.3, 0.7] {
            shift.push(time_shift_defect(h, s, t, &opts)?);
        }
    }
    Ok(vec![
        Check::at_most("symplectic defect on [0,1]", worst(sym), 1e-8),
        Check::at_most("gauge drift", worst(gauge), 1e-7),
        Check::at_most("omega(e_i, e_j) defect", worst(lag), 1e-8),
        Check::at_most("R symmetry defect", worst(curv_sym), 1e-6),
        Check::at_most("time-shift defect", worst(shift), 1e-5),
    ])
}

fn wavy() -> ScalarField {
    ScalarField::new(2, |x| (&x[0] * 1.3).sin() + &x[0] * &x[1] * 0.4 + (&x[1] * 0.7).cos())
}

fn bumpy_weight() -> WeightField {
    WeightField::new(ScalarField::new(2, |x| (&x[0] * 0.8).cos() * 0.3 + &x[1] * &x[1] * 0.2))
}

fn half_square() -> ScalarField {
    ScalarField::new(2, |x| sum(x.iter().map(|v| v * v).collect::<Vec<_>>().iter()) * 0.5)
}

fn riccati_criterion() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let cases = [
        ("euclidean", euclidean(2), WeightField::gaussian(2), [0.3, -0.2]),
        ("mechanical", mech(), WeightField::gaussian(2), [0.3, -0.2]),
        ("p3 flat", p3_flat(2), bumpy_weight(), [0.2, 0.4]),
        ("p3 sphere", p3_sphere(), WeightField::gaussian(2), [0.2, 0.4]),
    ];
    let mut out = Vec::new();
    for (label, h, w, x) in &cases {
        let r = riccati_residual(h, w, &wavy(), x, 0.4, 8, &opts)?;
        out.push(Check::at_most(format!("matrix residual {label}"), r.matrix, 1e-4));
        out.push(Check::at_most(format!("trace residual {label}"), r.trace, 1e-4));
    }
    Ok(out)
}

fn bochner_criterion() -> hamflow_core::Result<Vec<Check>> {
    let opts = FlowOptions::default();
    let cases = [
        ("euclidean", euclidean(2), WeightField::lebesgue(2), half_square(), [0.5, 0.1]),
        ("mechanical", mech(), WeightField::gaussian(2), wavy(), [0.3, -0.2]),
        ("sphere", sphere_chart(), bumpy_weight(), wavy(), [0.2, 0.4]),
        ("p3 sphere", p3_sphere(), WeightField::gaussian(2), wavy(), [0.2, 0.4]),
    ];
    let mut out = Vec::new();
    for (label, h, w, u, x) in &cases {
        let n = h.dim() as f64;
        let rep = bochner_residual(h, w, u, x, &[n, 2.0 * n, 1e6], &opts)?;
        out.push(Check::at_most(format!("identity defect {label}"), rep.defect, 1e-5));
        out.push(Check::at_least(format!("slack N in {{n, 2n, 1e6}} {label}"), least(rep.slack.iter().map(|p| p.1)), -1e-8));
    }
    Ok(out)
}

/// Comparison runs shared by the comparison and MCP criteria.
fn comparison_fixtures() -> hamflow_core::Result<Vec<(String, f64, f64, ComparisonReport)>> {
    let mut out = Vec::new();
    for (k, n) in [(1.0, 2usize), (0.0, 2), (-1.0, 3)] {
        let big_n = n as f64;
        let c = k / big_n;
        let t_end = if k > 0.0 { 0.9 * PI / c.sqrt() } else { 3.0 };
        let setup = ComparisonSetup::new(n, k, big_n, t_end);
        let rep = laplacian_comparison_check(&setup, |_| DMatrix::identity(n, n) * c, |_| (0.0, 0.0))?;
        out.push((format!("model K={k} N={n}"), k, big_n, rep));
    }
    let mut setup = ComparisonSetup::new(3, 0.0, 3.0, 2.0);
    setup.seed_rank = 2;
    out.push(("flat radial n=3".to_string(), 0.0, 3.0, laplacian_comparison_check(&setup, |_| DMatrix::zeros(3, 3), |_| (0.0, 0.0))?));

    let opts = FlowOptions::default();
    let t_end = 0.9 * PI * SQRT_2;
    let s = CotangentState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
    let curve = CurvatureCurve::along(&sphere_chart(), &WeightField::lebesgue(2), &s, t_end, &opts)?;
    let setup = ComparisonSetup::new(2, 1.0, 2.0, t_end);
    out.push(("sphere K=1 N=2".to_string(), 1.0, 2.0, laplacian_comparison_check(&setup, |t| curve.r_at(t), |t| curve.psi_at(t))?));

    // Riemannian volume, so that ψ vanishes and N = n is admissible
    let volume = WeightField::new(ScalarField::new(2, |x| ((-(&x[0] * &x[0]) - &x[1] * &x[1] + 1.0) * 0.5).ln() * 2.0));
    let s = hyperbolic_unit([0.0, 0.0], [1.0, 0.0]);
    let curve = CurvatureCurve::along(&hyperbolic_disk(), &volume, &s, 3.0, &opts)?;
    let setup = ComparisonSetup::new(2, -1.0, 2.0, 3.0);
    out.push(("hyperbolic K=-1 N=2".to_string(), -1.0, 2.0, laplacian_comparison_check(&setup, |t| curve.r_at(t), |t| curve.psi_at(t))?));
    Ok(out)
}

fn comparison_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (label, _, _, rep) in comparison_fixtures()? {
        if label.starts_with("model") {
            out.push(Check::at_most(format!("|Laplacian - N s'/s| {label}"), rep.max_abs_gap, 1e-6));
        } else if label.starts_with("flat") {
            let dev = worst(rep.times.iter().zip(&rep.laplacian).map(|(t, l)| (l - 2.0 / t).abs() / (1.0 + 2.0 / t)));
            out.push(Check::at_most("flat radial Laplacian vs (n-1)/t", dev, 1e-9));
            out.push(Check::at_most("flat radial (n-1)/t - n/t", rep.worst_violation, 0.0));
        } else {
            out.push(Check::at_least(format!("curvature hypothesis {label}"), rep.hypothesis_min, -1e-4));
            out.push(Check::at_most(format!("bound violation {label}"), rep.worst_violation, 1e-5));
        }
    }
    Ok(out)
}

fn mcp_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    for (label, k, big_n, rep) in comparison_fixtures()? {
        let m = mcp_ratio_check(&rep.varsigma, Some(&rep.laplacian), k, big_n, &rep.times)?;
        out.push(Check::at_most(format!("ratio increase {label}"), m.worst_increase, 1e-8));
        out.push(Check::holds(format!("equivalent to trace bound {label}"), m.equivalent && m.non_increasing == m.derivative_bound_holds));
    }
    Ok(out)
}

fn torus1(cells: usize, f: impl Fn(f64) -> f64) -> hamflow_core::Result<GridField> {
    let g = Grid::unit_torus(1, cells)?;
    let v = g.sample(|x| f(x[0]));
    GridField::lebesgue(g, v)
}

fn torus2(cells: usize, f: impl Fn(f64, f64) -> f64) -> hamflow_core::Result<GridField> {
    let g = Grid::unit_torus(2, cells)?;
    let v = g.sample(|x| f(x[0], x[1]));
    GridField::lebesgue(g, v)
}

fn spectral_error(cells: usize, t: f64) -> hamflow_core::Result<f64> {
    let f = torus1(cells, |x| (TAU * x).sin())?;
    let h = 1.0 / cells as f64;
    let run = heat_solve_explicit(&euclidean(1), &f, t, 0.25 * h * h)?;
    let decay = (-TAU * TAU * t).exp();
    let exact = f.with_values(f.values.iter().map(|v| v * decay).collect());
    l2_distance(&run.field, &exact)
}

fn heat_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    let p3 = p3_flat(2);
    let f = torus2(24, |x, y| (TAU * x).sin() + 0.5 * (TAU * y).cos() * (TAU * x).cos())?;
    let other = torus2(24, |x, y| 0.3 * (TAU * y).sin() - 0.6 * (TAU * (x + y)).cos())?;
    let dt = 0.5 * stability_bound(&p3, &f)?.min(stability_bound(&p3, &other)?);
    let run = heat_solve_explicit(&p3, &f, 0.02, dt)?;
    out.push(Check::at_most("mass drift p3", run.diagnostics.mass_drift(), 1e-12));
    out.push(Check::at_most("energy increase p3", run.diagnostics.max_energy_increase(), 0.0));
    let dist = heat_contraction(&p3, &f, &other, 0.02, dt)?;
    out.push(Check::at_most("L2 distance increase p3", worst(dist.windows(2).map(|w| w[1] - w[0])), 0.0));

    let fine = spectral_error(256, 0.1)?;
    let coarse = spectral_error(128, 0.1)?;
    out.push(Check::at_most("spectral error 256 cells", fine, 1e-4));
    out.push(Check::at_least("h-refinement order", (coarse / fine).log2(), 1.8));

    // minimizing movements against the exact discrete semigroup on one Fourier mode
    let f1 = torus1(32, |x| (TAU * x).sin())?;
    let h = 1.0 / 32.0;
    let lam = 4.0 / (h * h) * (PI * h).sin().powi(2);
    let t = 0.1;
    let exact = f1.with_values(f1.values.iter().map(|v| v * (-lam * t).exp()).collect());
    let errs = [8usize, 16, 32, 64]
        .iter()
        .map(|&k| l2_distance(&minimizing_movement(&euclidean(1), &f1, t, k)?, &exact))
        .collect::<hamflow_core::Result<Vec<_>>>()?;
    out.push(Check::at_least("minimizing-movement order", least(errs.windows(2).map(|w| (w[0] / w[1]).log2())), 1.0));

    for hh in [euclidean(2), p3_flat(2)] {
        let f = torus2(16, |x, y| (TAU * x).sin() + 0.4 * (TAU * y).cos())?;
        let d0 = 2.0 * stability_bound(&hh, &f)?;
        let rep = slope_and_identity_check(&hh, &f, &[d0, d0 / 2.0, d0 / 4.0], 64)?;
        out.push(Check::at_most(format!("slope identity {}", hh.name()), rep.slope_gap, 0.02));
    }
    Ok(out)
}

fn bump(amp: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| 1.0 + amp * (TAU * x).sin() * (0.5 + 0.5 * (TAU * y).cos())
}

fn entropy_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    let f = torus2(32, bump(0.5))?;
    let dt = 0.25 / (32.0 * 32.0 * 4.0);
    let ent = entropy_flow_solve(&euclidean(2), &f, 0.01, dt, 0.0, 4)?;
    let heat = heat_solve_explicit(&euclidean(2), &f, 0.01, dt)?;
    out.push(Check::at_most("mass drift quadratic", ent.diagnostics.mass_drift(), 1e-12));
    out.push(Check::at_most("entropy increase quadratic", ent.diagnostics.max_entropy_increase().unwrap_or(f64::INFINITY), 0.0));
    out.push(Check::at_most("dissipation identity quadratic", ent.dissipation_gap, 0.02));
    out.push(Check::at_most("gap to heat flow quadratic", l2_distance(&ent.field, &heat.field)?, 1e-6));

    let p3 = p3_flat(1);
    let f = torus1(64, |x| bump(0.8)(x, 0.0))?;
    let neg_log = f.with_values(f.values.iter().map(|r| -r.ln()).collect());
    let dt = 0.5 * stability_bound(&p3, &neg_log)?;
    let ent = entropy_flow_solve(&p3, &f, 0.01, dt, 0.0, 8)?;
    let heat = heat_solve_explicit(&p3, &f, 0.01, dt)?;
    out.push(Check::at_most("mass drift p3", ent.diagnostics.mass_drift(), 1e-12));
    out.push(Check::at_most("entropy increase p3", ent.diagnostics.max_entropy_increase().unwrap_or(f64::INFINITY), 0.0));
    out.push(Check::at_most("dissipation identity p3", ent.dissipation_gap, 0.02));
    out.push(Check::at_least("gap to heat flow p3", l2_distance(&ent.field, &heat.field)?, 1e-3));
    Ok(out)
}

fn normal(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
}

fn profile(reference: Reference, f: impl Fn(f64) -> f64) -> hamflow_core::Result<DensityProfile> {
    DensityProfile::from_lebesgue_density(Line::new(-12.0, 12.0, 1025)?, reference, f)
}

fn transport_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    let quad = euclidean(1);
    let p = |q: f64| p_homogeneous(q, CoMetric::euclidean(1)).expect("valid fixture");

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut assign: f64 = 0.0;
    for h in [quad.clone(), p(1.5), p(3.0)].iter() {
        for n in 1..=12 {
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let cost = |x: f64, y: f64| cost_ct(h, x, y, 1.0).unwrap_or(f64::NAN);
            let mono = monotone_coupling_cost(&xs, &ys, cost)?;
            let best = assignment_optimum(&xs, &ys, cost)?;
            assign = assign.max((mono - best).abs() / (1.0 + best.abs()));
        }
    }
    out.push(Check::at_most("monotone vs brute-force assignment", assign, 1e-8));

    let mut cov: f64 = 0.0;
    for (r, a, b) in
        [(Reference::lebesgue(), normal(0.0, 1.0), normal(1.0, 1.5)), (Reference::gaussian(), normal(0.3, 0.9), normal(-0.5, 1.1))]
    {
        let plan = monotone_transport(&profile(r.clone(), a)?, &profile(r, b)?, &quad, 1.0)?;
        for t in [0.3, 0.7] {
            let (l, rr) = change_of_variables(&plan, t, s_log_s)?;
            cov = cov.max((l - rr).abs());
            let (l, rr) = change_of_variables(&plan, t, |s| s * s)?;
            cov = cov.max((l - rr).abs());
        }
    }
    out.push(Check::at_most("change of variables", cov, 1e-8));

    let mu = profile(Reference::gaussian(), normal(1.0, 1.0))?;
    let two = talagrand_hwi_check(&quad, &mu, 1.0, 2.0)?;
    out.push(Check::at_most("Talagrand equality, Gaussian shift", two.talagrand_slack.abs(), 1e-6));
    out.push(Check::at_most("HWI equality, Gaussian shift", two.hwi_slack.abs(), 1e-6));
    let one = talagrand_hwi_check(&quad, &mu, 1.0, 1.0)?;
    out.push(Check::at_most("Talagrand closed-form slack at K=1", (one.talagrand_slack - 0.5).abs(), 1e-6));
    out.push(Check::at_most("HWI closed-form slack at K=1", (one.hwi_slack - 0.25).abs(), 1e-6));

    let g = Reference::gaussian;
    let plan = monotone_transport(&profile(g(), normal(0.0, 1.0))?, &profile(g(), normal(1.0, 1.0))?, &quad, 1.0)?;
    out.push(Check::at_most("K-convexity Gaussian K=1", k_convexity_check(&quad, &plan, 1.0, 8)?, 1e-6));
    out.push(Check::at_most("K-convexity Gaussian K=2", k_convexity_check(&quad, &plan, 2.0, 8)?, 1e-6));
    let l = Reference::lebesgue;
    for (label, h) in [("quadratic", quad.clone()), ("p=3", p(3.0))] {
        let plan = monotone_transport(&profile(l(), normal(0.0, 1.0))?, &profile(l(), normal(1.0, 1.5))?, &h, 1.0)?;
        out.push(Check::at_most(format!("K-convexity Lebesgue K=0 {label}"), k_convexity_check(&h, &plan, 0.0, 8)?, 1e-6));
    }

    let mut slack = f64::INFINITY;
    for (r, a, b) in
        [(Reference::gaussian(), normal(0.0, 1.0), normal(1.0, 1.0)), (Reference::lebesgue(), normal(0.0, 1.0), normal(0.5, 1.6))]
    {
        let plan = monotone_transport(&profile(r.clone(), a)?, &profile(r, b)?, &quad, 1.0)?;
        let d = entropy_derivative_check(&plan, 5e-4)?;
        slack = slack.min(d.lhs - d.rhs);
    }
    out.push(Check::at_least("entropy derivative slack", slack, 0.0));
    Ok(out)
}

fn harmonic_criterion() -> hamflow_core::Result<Vec<Check>> {
    let mut out = Vec::new();
    let g = Grid::new(vec![12, 12], 1.0 / 11.0, false)?;
    let mask: Vec<bool> = (0..g.len())
        .map(|c| {
            let (i, j) = (c / 12, c % 12);
            i == 0 || j == 0 || i == 11 || j == 11
        })
        .collect();
    let field = GridField::lebesgue(g.clone(), g.sample(|x| (3.0 * x[0]).sin() + x[1] * x[1]))?;
    for h in [euclidean(2), p3_flat(2)] {
        let sol = dirichlet_harmonic(&h, &field, &mask)?;
        out.push(Check::at_most(format!("interior residual {}", h.name()), sol.residual, 1e-8));
        // the minimizer must beat its initial guess
        out.push(Check::at_most(
            format!("energy decrease {}", h.name()),
            discrete_energy(&h, &sol.field)? - discrete_energy(&h, &field)?,
            0.0,
        ));
    }
    for q in [1.5, 3.0, 4.0] {
        let h = p_homogeneous(q, CoMetric::euclidean(1))?;
        let g = Grid::new(vec![21], 0.05, false)?;
        let init = g.sample(|x| if x[0] > 0.99 { 2.0 } else { 0.3 * (7.0 * x[0]).sin() });
        let mut mask = vec![false; 21];
        mask[0] = true;
        mask[20] = true;
        let sol = dirichlet_harmonic(&h, &GridField::lebesgue(g.clone(), init)?, &mask)?;
        let affine = g.sample(|x| 2.0 * x[0]);
        let err = worst(sol.field.values.iter().zip(&affine).map(|(a, b)| (a - b).abs()));
        out.push(Check::at_most(format!("1D p-harmonic affine p={q}"), err, 1e-8));
    }
    Ok(out)
}
