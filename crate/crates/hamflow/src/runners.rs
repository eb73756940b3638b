//! One function per experiment kind; each returns an in-memory result.

use hamflow_core::comparison::{
    bochner_residual, hj_transport, laplacian_comparison_check, mcp_ratio_check, riccati_residual, s_kn, ComparisonReport, ComparisonSetup,
    CurvatureCurve,
};
use hamflow_core::flow::FlowOptions;
use hamflow_core::frames::{curvature_coordinate_formula, weighted_curvature, CurvatureReport};
use hamflow_core::hamiltonians::{ChartHamiltonian, WeightField};
use hamflow_core::heatgrid::{
    dirichlet_harmonic, entropy_flow_solve, heat_contraction, heat_solve_explicit, l2_distance, minimizing_movement, stability_bound,
    FlowDiagnostics, Grid, GridField,
};
use hamflow_core::transport1d::{
    assignment_optimum, change_of_variables, cost_ct, entropy_derivative_check, independent_coupling_cost, k_convexity_check,
    monotone_coupling_cost, monotone_transport, s_log_s, talagrand_hwi_check, transport_costs, DensityProfile, Line,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{CurvatureOracle, CurvatureRouteSpec, ExperimentConfig, ExperimentKind, LineSpec, Tolerances};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fixtures;
use crate::report::{Cell, Check, ExperimentResult, Table};

/// Runs one configured experiment; checks are scaled by `tolerance_scale`.
pub fn run_experiment(cfg: &ExperimentConfig, tolerance_scale: f64) -> Result<ExperimentResult> {
    let h = fixtures::hamiltonian(&cfg.hamiltonian)?;
    let wrap = |e: Error| match e {
        Error::Core(source) => Error::Experiment { experiment: cfg.name.clone(), source },
        other => other,
    };
    let mut res = dispatch(cfg, &h).map_err(wrap)?;
    res.checks = res.checks.into_iter().map(|c| c.scaled(tolerance_scale)).collect();
    res.note("hamiltonian", h.name());
    res.note("seed", cfg.seed);
    Ok(res)
}

fn dispatch(cfg: &ExperimentConfig, h: &ChartHamiltonian) -> Result<ExperimentResult> {
    let tol = &cfg.tolerances;
    let n = h.dim();
    let name = cfg.name.as_str();
    match &cfg.experiment {
        ExperimentKind::Curvature { states, ns, route } => {
            let w = fixtures::weight(&cfg.weight, n)?;
            let states = states.iter().map(|s| fixtures::state(s, n)).collect::<Result<Vec<_>>>()?;
            curvature(name, h, &w, &states, ns, *route, tol)
        }
        ExperimentKind::Riccati { u, x0, t_end, samples } => {
            let w = fixtures::weight(&cfg.weight, n)?;
            riccati(name, h, &w, &Expr::parse(u, n)?, point(x0, n)?, *t_end, *samples, tol)
        }
        ExperimentKind::Bochner { u, points, ns } => {
            let w = fixtures::weight(&cfg.weight, n)?;
            let pts = points.iter().map(|p| point(p, n)).collect::<Result<Vec<_>>>()?;
            bochner(name, h, &w, &Expr::parse(u, n)?, &pts, ns, tol)
        }
        ExperimentKind::Compare { k, big_n, t_end, oracle } => {
            let w = fixtures::weight(&cfg.weight, n)?;
            compare(name, h, &w, *k, *big_n, *t_end, oracle, tol)
        }
        ExperimentKind::Mcp { k, big_n, t_end, oracle } => {
            let w = fixtures::weight(&cfg.weight, n)?;
            mcp(name, h, &w, *k, *big_n, *t_end, oracle, tol)
        }
        ExperimentKind::Heat { cells, initial, t_end, dt, second } => {
            let f = torus_field(cfg, n, *cells, initial)?;
            let g = second.as_ref().map(|s| torus_field(cfg, n, *cells, s)).transpose()?;
            heat(name, h, &f, g.as_ref(), *t_end, *dt, tol, cfg)
        }
        ExperimentKind::Mms { cells, initial, t, ks } => mms(name, h, &torus_field(cfg, n, *cells, initial)?, *t, ks, tol),
        ExperimentKind::Entropyflow { cells, initial, t_end, dt, rho_min, checks } => {
            entropyflow(name, h, &torus_field(cfg, n, *cells, initial)?, *t_end, *dt, *rho_min, *checks, tol)
        }
        ExperimentKind::Harmonic { shape, spacing, initial } => {
            if shape.len() != n {
                return Err(Error::config(format!("grid shape must have {n} axes")));
            }
            let grid = Grid::new(shape.clone(), *spacing, false).map_err(|e| Error::config(e.to_string()))?;
            let init = Expr::parse(initial, n)?;
            let vs = fixtures::varsigma(&cfg.weight, n)?;
            let field = GridField::new(grid.clone(), grid.sample(|x| init.eval(x)), grid.sample(|x| vs.value(x)))?;
            harmonic(name, h, &field, tol)
        }
        ExperimentKind::Transport { line, source, target, horizon, k, samples, assignment_atoms } => {
            if n != 1 {
                return Err(Error::config("transport needs a one-dimensional Hamiltonian"));
            }
            let reference = fixtures::reference(&cfg.weight)?;
            let line = line_of(line)?;
            let density = |src: &str| -> Result<DensityProfile> {
                let e = Expr::parse(src, 1)?;
                Ok(DensityProfile::from_lebesgue_density(line, reference.clone(), |x| e.eval(&[x]))?)
            };
            let (mu, nu) = (density(source)?, density(target)?);
            transport(name, h, &mu, &nu, *horizon, *k, *samples, *assignment_atoms, cfg.seed, tol)
        }
    }
}

fn point(p: &[f64], n: usize) -> Result<&[f64]> {
    if p.len() != n {
        return Err(Error::config(format!("point must have {n} coordinates")));
    }
    Ok(p)
}

fn line_of(spec: &LineSpec) -> Result<Line> {
    Line::new(spec.lo, spec.hi, spec.nodes).map_err(|e| Error::config(e.to_string()))
}

fn torus_field(cfg: &ExperimentConfig, n: usize, cells: usize, initial: &str) -> Result<GridField> {
    let grid = Grid::unit_torus(n, cells).map_err(|e| Error::config(e.to_string()))?;
    let init = Expr::parse(initial, n)?;
    let vs = fixtures::varsigma(&cfg.weight, n)?;
    Ok(GridField::new(grid.clone(), grid.sample(|x| init.eval(x)), grid.sample(|x| vs.value(x)))?)
}

fn n_label(n: f64) -> String {
    if n.is_infinite() {
        "ric_N_inf".to_string()
    } else {
        format!("ric_N_{n}")
    }
}

fn curvature(
    name: &str,
    h: &ChartHamiltonian,
    w: &WeightField,
    states: &[hamflow_core::hamiltonians::CotangentState],
    ns: &[f64],
    route: CurvatureRouteSpec,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let opts = FlowOptions::default();
    let n = h.dim();
    let mut cols = vec!["state".to_string(), "route".to_string()];
    cols.extend((0..n).map(|i| format!("x{i}")));
    cols.extend((0..n).map(|i| format!("alpha{i}")));
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("R_{i}{j}"));
        }
    }
    cols.extend(["ric".to_string(), "symmetry_defect".to_string()]);
    cols.extend(ns.iter().map(|v| n_label(*v)));
    let mut table = Table::new(cols);
    let mut checks = Vec::new();
    let mut worst_sym: f64 = 0.0;
    let mut worst_agree: f64 = 0.0;
    let row = |idx: usize, label: &str, s: &hamflow_core::hamiltonians::CotangentState, rep: &CurvatureReport, weighted: bool| {
        let mut r: Vec<Cell> = vec![idx.into(), label.into()];
        r.extend(s.x.iter().map(|v| Cell::Num(*v)));
        r.extend(s.alpha.iter().map(|v| Cell::Num(*v)));
        for i in 0..n {
            for j in 0..n {
                r.push(rep.r[(i, j)].into());
            }
        }
        r.push(rep.ric.into());
        r.push(rep.symmetry_defect().into());
        for k in 0..ns.len() {
            r.push(if weighted { rep.ric_n.get(k).map(|p| p.1).into() } else { Cell::Empty });
        }
        r
    };
    for (idx, s) in states.iter().enumerate() {
        let frame = if route != CurvatureRouteSpec::Coordinate { Some(weighted_curvature(h, w, s, ns, &opts)?) } else { None };
        let coord = if route != CurvatureRouteSpec::Frame { Some(curvature_coordinate_formula(h, s, &opts)?) } else { None };
        if let Some(rep) = &frame {
            worst_sym = worst_sym.max(rep.symmetry_defect());
            table.push(row(idx, "frame", s, rep, true));
        }
        if let Some(rep) = &coord {
            worst_sym = worst_sym.max(rep.symmetry_defect());
            table.push(row(idx, "coordinate", s, rep, false));
        }
        if let (Some(a), Some(b)) = (&frame, &coord) {
            worst_agree = worst_agree.max((&a.r - &b.r).norm());
        }
    }
    checks.push(Check::at_most("symmetry_defect", worst_sym, tol.residual));
    if route == CurvatureRouteSpec::Both {
        checks.push(Check::at_most("route_agreement", worst_agree, tol.residual));
    }
    let mut res = ExperimentResult::new(name, "curvature", table);
    res.plot = Some(("state".into(), "ric".into()));
    res.checks = checks;
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn riccati(
    name: &str,
    h: &ChartHamiltonian,
    w: &WeightField,
    u: &Expr,
    x0: &[f64],
    t_end: f64,
    samples: usize,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let opts = FlowOptions::default();
    let field = u.to_field();
    let n = h.dim();
    let tr = hj_transport(h, w, &field, x0, t_end, &opts)?;
    let mut cols = vec!["t".to_string(), "laplacian".to_string()];
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("hess_{i}{j}"));
        }
    }
    let mut table = Table::new(cols);
    let stride = ((tr.states.len() - 1) / 256).max(1);
    for (k, s) in tr.states.iter().enumerate() {
        if k % stride != 0 && k + 1 != tr.states.len() {
            continue;
        }
        let mut r: Vec<Cell> = vec![s.t.into(), s.trace_lap.into()];
        r.extend(s.hess.iter().map(|v| Cell::Num(*v)));
        table.push(r);
    }
    let resid = riccati_residual(h, w, &field, x0, t_end, samples, &opts)?;
    let mut res = ExperimentResult::new(name, "riccati", table);
    res.plot = Some(("t".into(), "laplacian".into()));
    res.note("riccati_matrix_residual", resid.matrix);
    res.note("riccati_trace_residual", resid.trace);
    res.note("evolution_gap", resid.evolution_gap);
    res.checks = vec![
        Check::at_most("riccati_matrix_residual", resid.matrix, tol.residual),
        Check::at_most("riccati_trace_residual", resid.trace, tol.residual),
    ];
    Ok(res)
}

fn bochner(
    name: &str,
    h: &ChartHamiltonian,
    w: &WeightField,
    u: &Expr,
    points: &[&[f64]],
    ns: &[f64],
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let opts = FlowOptions::default();
    let field = u.to_field();
    let n = h.dim();
    let mut cols: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    cols.extend(["bochner_lhs", "bochner_rhs", "bochner_defect", "ric_inf", "hess_hs2", "laplacian"].map(String::from));
    cols.extend(ns.iter().map(|v| if v.is_infinite() { "slack_N_inf".to_string() } else { format!("slack_N_{v}") }));
    let mut table = Table::new(cols);
    let (mut defect, mut slack): (f64, f64) = (0.0, f64::INFINITY);
    for x in points {
        let rep = bochner_residual(h, w, &field, x, ns, &opts)?;
        defect = defect.max(rep.defect);
        let mut r: Vec<Cell> = x.iter().map(|v| Cell::Num(*v)).collect();
        r.extend([rep.lhs, rep.rhs, rep.defect, rep.ric_inf, rep.hess_hs2, rep.laplacian].map(Cell::Num));
        // the first entry is always N = ∞
        for (_, s) in rep.slack.iter().skip(1) {
            slack = slack.min(*s);
            r.push((*s).into());
        }
        table.push(r);
    }
    let mut res = ExperimentResult::new(name, "bochner", table);
    res.plot = Some(("x0".into(), "bochner_defect".into()));
    res.checks = vec![Check::at_most("bochner_defect", defect, tol.residual)];
    if !ns.is_empty() {
        res.checks.push(Check::at_least("dimensional_slack", slack, -tol.slack));
    }
    Ok(res)
}

fn comparison_run(
    h: &ChartHamiltonian,
    w: &WeightField,
    k: f64,
    big_n: f64,
    t_end: f64,
    oracle: &CurvatureOracle,
) -> Result<ComparisonReport> {
    let n = h.dim();
    let mut setup = ComparisonSetup::new(n, k, big_n, t_end);
    Ok(match oracle {
        CurvatureOracle::Model => {
            let c = k / big_n;
            laplacian_comparison_check(&setup, |_| DMatrix::identity(n, n) * c, |_| (0.0, 0.0))?
        }
        CurvatureOracle::FlatRadial => {
            setup.seed_rank = n.saturating_sub(1).max(1);
            laplacian_comparison_check(&setup, |_| DMatrix::zeros(n, n), |_| (0.0, 0.0))?
        }
        CurvatureOracle::Trajectory { state } => {
            let s = fixtures::state(state, n)?;
            let curve = CurvatureCurve::along(h, w, &s, t_end, &FlowOptions::default())?;
            laplacian_comparison_check(&setup, |t| curve.r_at(t), |t| curve.psi_at(t))?
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn compare(
    name: &str,
    h: &ChartHamiltonian,
    w: &WeightField,
    k: f64,
    big_n: f64,
    t_end: f64,
    oracle: &CurvatureOracle,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let rep = comparison_run(h, w, k, big_n, t_end, oracle)?;
    let mut table = Table::new(["t", "laplacian", "s_KN_bound", "bound_gap"]);
    let stride = (rep.times.len() / 512).max(1);
    for (i, ((t, l), b)) in rep.times.iter().zip(&rep.laplacian).zip(&rep.bound).enumerate() {
        if i % stride == 0 || i + 1 == rep.times.len() {
            table.push(vec![(*t).into(), (*l).into(), (*b).into(), (b - l).into()]);
        }
    }
    let mut res = ExperimentResult::new(name, "compare", table);
    res.plot = Some(("t".into(), "laplacian".into()));
    res.note("worst_violation", rep.worst_violation);
    res.note("max_abs_gap", rep.max_abs_gap);
    res.note("hypothesis_min", rep.hypothesis_min);
    res.note("focal_time", rep.focal_time);
    res.checks = vec![Check::at_most("worst_violation", rep.worst_violation, tol.residual)];
    if matches!(oracle, CurvatureOracle::Model) {
        res.checks.push(Check::at_most("model_gap", rep.max_abs_gap, tol.residual));
    }
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn mcp(
    name: &str,
    h: &ChartHamiltonian,
    w: &WeightField,
    k: f64,
    big_n: f64,
    t_end: f64,
    oracle: &CurvatureOracle,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    let rep = comparison_run(h, w, k, big_n, t_end, oracle)?;
    let m = mcp_ratio_check(&rep.varsigma, Some(&rep.laplacian), k, big_n, &rep.times)?;
    let mut table = Table::new(["t", "varsigma", "s_KN", "log_ratio"]);
    let stride = (rep.times.len() / 512).max(1);
    for (i, (t, v)) in rep.times.iter().zip(&rep.varsigma).enumerate() {
        if i % stride == 0 || i + 1 == rep.times.len() {
            let s = s_kn(k, big_n, *t).ok();
            table.push(vec![(*t).into(), (*v).into(), s.into(), s.map(|s| v - big_n * s.ln()).into()]);
        }
    }
    let mut res = ExperimentResult::new(name, "mcp", table);
    res.plot = Some(("t".into(), "log_ratio".into()));
    res.note("worst_increase", m.worst_increase);
    res.note("worst_derivative_excess", m.worst_derivative_excess);
    res.checks =
        vec![Check::at_most("ratio_increase", m.worst_increase, tol.slack), Check::holds("equivalent_to_trace_bound", m.equivalent)];
    Ok(res)
}

fn diagnostics_table(d: &FlowDiagnostics, contraction: Option<&[f64]>) -> Table {
    let mut cols = vec!["t", "mass", "energy", "entropy", "slope", "d_mass", "d_energy"];
    if contraction.is_some() {
        cols.push("l2_distance");
    }
    let mut table = Table::new(cols);
    let stride = (d.times.len() / 1024).max(1);
    for i in 0..d.times.len() {
        if i % stride != 0 && i + 1 != d.times.len() {
            continue;
        }
        let mut r: Vec<Cell> = vec![
            d.times[i].into(),
            d.mass[i].into(),
            d.energy[i].into(),
            d.entropy[i].into(),
            d.slope[i].into(),
            (d.mass[i] - d.mass[0]).into(),
            (d.energy[i] - d.energy[0]).into(),
        ];
        if let Some(c) = contraction {
            r.push(c.get(i).copied().into());
        }
        table.push(r);
    }
    table
}

fn field_meta(f: &GridField, t: f64, cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "shape": f.grid.shape,
        "spacing": f.grid.spacing,
        "periodic": f.grid.periodic,
        "time": t,
        "weight": cfg.weight,
        "dtype": "f64",
        "endianness": "little",
        "order": "row-major",
    })
}

#[allow(clippy::too_many_arguments)]
fn heat(
    name: &str,
    h: &ChartHamiltonian,
    f: &GridField,
    second: Option<&GridField>,
    t_end: f64,
    dt: Option<f64>,
    tol: &Tolerances,
    cfg: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let mut bound = stability_bound(h, f)?;
    if let Some(g) = second {
        bound = bound.min(stability_bound(h, g)?);
    }
    let dt = dt.unwrap_or(if bound.is_finite() { 0.5 * bound } else { t_end.max(1e-3) });
    let run = heat_solve_explicit(h, f, t_end, dt)?;
    let contraction = second.map(|g| heat_contraction(h, f, g, t_end, dt)).transpose()?;
    let d = &run.diagnostics;
    let mut res = ExperimentResult::new(name, "heat", diagnostics_table(d, contraction.as_deref()));
    res.plot = Some(("t".into(), "energy".into()));
    res.note("steps", run.steps);
    res.note("dt", if run.steps == 0 { 0.0 } else { t_end / run.steps as f64 });
    res.note("mass_drift", d.mass_drift());
    res.note("max_energy_increase", d.max_energy_increase());
    res.checks = vec![Check::at_most("mass_drift", d.mass_drift(), tol.residual)];
    if d.energy.len() > 1 {
        res.checks.push(Check::at_most("energy_increase", d.max_energy_increase(), tol.slack));
    }
    if let Some(c) = &contraction {
        let inc = c.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        res.note("max_distance_increase", inc);
        if c.len() > 1 {
            res.checks.push(Check::at_most("contraction_increase", inc, tol.slack));
        }
    }
    res.field = Some((run.field.values.clone(), field_meta(&run.field, t_end, cfg)));
    Ok(res)
}

fn mms(name: &str, h: &ChartHamiltonian, f: &GridField, t: f64, ks: &[usize], tol: &Tolerances) -> Result<ExperimentResult> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::config("ks must be a non-empty list of positive step counts"));
    }
    let bound = stability_bound(h, f)?;
    let dt = if bound.is_finite() { 0.05 * bound } else { t.max(1e-3) };
    let reference = heat_solve_explicit(h, f, t, dt)?.field;
    let mut table = Table::new(["k", "delta", "l2_error", "observed_order"]);
    let mut errs: Vec<f64> = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let e = l2_distance(&minimizing_movement(h, f, t, k)?, &reference)?;
        let order = (i > 0).then(|| (errs[i - 1] / e).ln() / (k as f64 / ks[i - 1] as f64).ln());
        errs.push(e);
        table.push(vec![k.into(), (t / k as f64).into(), e.into(), order.into()]);
    }
    let mut res = ExperimentResult::new(name, "mms", table);
    res.plot = Some(("delta".into(), "l2_error".into()));
    res.note("reference_dt", dt);
    let worst_ratio = errs.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    if errs.len() > 1 {
        res.checks.push(Check::at_most("error_ratio", worst_ratio, 1.0));
    }
    res.checks.push(Check::at_most("finest_error", *errs.last().expect("non-empty"), tol.relative * f.l2_norm().max(1e-300)));
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn entropyflow(
    name: &str,
    h: &ChartHamiltonian,
    f: &GridField,
    t_end: f64,
    dt: Option<f64>,
    rho_min: f64,
    checks: usize,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    if f.values.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::config("entropy flow needs a positive initial density"));
    }
    let dt = match dt {
        Some(v) => v,
        None => {
            let neg_log = f.with_values(f.values.iter().map(|r| -r.ln()).collect());
            let b = stability_bound(h, &neg_log)?.min(stability_bound(h, f)?);
            if b.is_finite() {
                0.5 * b
            } else {
                t_end.max(1e-3)
            }
        }
    };
    let run = entropy_flow_solve(h, f, t_end, dt, rho_min, checks)?;
    let heat_gap = heat_solve_explicit(h, f, t_end, dt).and_then(|r| l2_distance(&run.field, &r.field)).ok();
    let d = &run.diagnostics;
    let mut res = ExperimentResult::new(name, "entropyflow", diagnostics_table(d, None));
    res.plot = Some(("t".into(), "entropy".into()));
    res.note("mass_drift", d.mass_drift());
    res.note("max_entropy_increase", d.max_entropy_increase());
    res.note("dissipation_gap", run.dissipation_gap);
    res.note("heat_flow_gap", heat_gap);
    res.checks = vec![Check::at_most("mass_drift", d.mass_drift(), tol.residual)];
    if let Some(inc) = d.max_entropy_increase().filter(|_| d.times.len() > 1) {
        res.checks.push(Check::at_most("entropy_increase", inc, tol.slack));
    }
    if checks > 0 {
        res.checks.push(Check::at_most("dissipation_gap", run.dissipation_gap, tol.relative));
    }
    Ok(res)
}

fn harmonic(name: &str, h: &ChartHamiltonian, field: &GridField, tol: &Tolerances) -> Result<ExperimentResult> {
    let g = &field.grid;
    let mask: Vec<bool> = (0..g.len())
        .map(|c| {
            let coords = g.coords(c);
            coords.iter().zip(&g.shape).any(|(x, s)| {
                let i = (x / g.spacing).round() as usize;
                i == 0 || i + 1 == *s
            })
        })
        .collect();
    let sol = dirichlet_harmonic(h, field, &mask)?;
    let d = g.dim();
    let mut cols: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    cols.extend(["u".to_string(), "boundary".to_string()]);
    let mut table = Table::new(cols);
    for c in 0..g.len() {
        let mut r: Vec<Cell> = g.coords(c).into_iter().map(Cell::Num).collect();
        r.push(sol.field.values[c].into());
        r.push(if mask[c] { "1" } else { "0" }.into());
        table.push(r);
    }
    let mut res = ExperimentResult::new(name, "harmonic", table);
    if d == 1 {
        res.plot = Some(("x0".into(), "u".into()));
    }
    res.note("laplacian_residual", sol.residual);
    res.note("iterations", sol.stats.iterations);
    res.checks = vec![Check::at_most("laplacian_residual", sol.residual, tol.residual)];
    Ok(res)
}

#[allow(clippy::too_many_arguments)]
fn transport(
    name: &str,
    h: &ChartHamiltonian,
    mu: &DensityProfile,
    nu: &DensityProfile,
    horizon: f64,
    k: f64,
    samples: usize,
    atoms: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ExperimentResult> {
    if atoms > 12 {
        return Err(Error::config("assignment_atoms must be at most 12"));
    }
    let plan = monotone_transport(mu, nu, h, horizon)?;
    let mut table = Table::new(["fixture", "inequality", "lhs", "rhs", "slack"]);
    let mut checks = Vec::new();
    let mut row = |ineq: &str, lhs: f64, rhs: f64, slack: f64, threshold: f64, checks: &mut Vec<Check>| {
        table.push(vec![name.into(), ineq.into(), lhs.into(), rhs.into(), slack.into()]);
        checks.push(Check::at_least(ineq, slack, -threshold));
    };

    let (cl, ch) = transport_costs(h, &plan)?;
    let ind = independent_coupling_cost(h, mu, nu, horizon)?;
    row("cost_vs_independent", cl, ind, ind - cl, tol.slack, &mut checks);
    for t in [0.25, 0.5, 0.75].map(|s| s * horizon) {
        let (l, r) = change_of_variables(&plan, t, s_log_s)?;
        row(&format!("change_of_variables_t{t}"), l, r, -(l - r).abs(), tol.residual, &mut checks);
    }
    let kc = k_convexity_check(h, &plan, k, samples)?;
    row("k_convexity", kc, 0.0, -kc, tol.residual, &mut checks);
    let de = entropy_derivative_check(&plan, 5e-4 * horizon)?;
    row("entropy_derivative", de.lhs, de.rhs, de.lhs - de.rhs, tol.slack, &mut checks);
    let mut skipped = Vec::new();
    match talagrand_hwi_check(h, mu, horizon, k) {
        Ok(th) => {
            let kt = k * horizon;
            row("talagrand", th.cost_h, 2.0 / kt * th.entropy, th.talagrand_slack, tol.slack, &mut checks);
            row("hwi", th.entropy + 0.5 * kt * th.cost_h, horizon * th.fisher + th.action, th.hwi_slack, tol.slack, &mut checks);
        }
        Err(e) => skipped.push(format!("talagrand/hwi: {e}")),
    }
    if atoms > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (mu.line.lo, mu.line.hi);
        let span = 0.25 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let xs: Vec<f64> = (0..atoms).map(|_| rng.random_range(mid - span..mid + span)).collect();
        let ys: Vec<f64> = (0..atoms).map(|_| rng.random_range(mid - span..mid + span)).collect();
        let cost = |x: f64, y: f64| cost_ct(h, x, y, horizon).unwrap_or(f64::NAN);
        let mono = monotone_coupling_cost(&xs, &ys, cost)?;
        let best = assignment_optimum(&xs, &ys, cost)?;
        row("assignment_optimum", mono, best, -(mono - best).abs(), tol.residual * (1.0 + best.abs()), &mut checks);
    }
    let mut res = ExperimentResult::new(name, "transport", table);
    res.note("action_cost", cl);
    res.note("hamiltonian_cost", ch);
    res.note("jacobian_defect", de.jacobian_defect);
    res.note("skipped", skipped);
    res.checks = checks;
    Ok(res)
}
