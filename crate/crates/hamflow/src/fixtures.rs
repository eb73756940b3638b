//! Turns configuration specs into core objects.

use hamflow_core::hamiltonians::{self as hm, ChartHamiltonian, CoMetric, CotangentState, Potential, Profile, WeightField};
use hamflow_core::jets::ScalarField;
use hamflow_core::transport1d::Reference;
use nalgebra::DMatrix;

use crate::config::{HamiltonianSpec, MetricSpec, PotentialSpec, ProfileSpec, StateSpec, WeightSpec};
use crate::error::{Error, Result};
use crate::expr::Expr;

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config("g_inv must be a non-empty square matrix"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn metric(spec: &MetricSpec) -> Result<CoMetric> {
    Ok(match spec {
        MetricSpec::Euclidean { dim } => {
            if *dim == 0 {
                return Err(Error::config("dimension must be positive"));
            }
            CoMetric::euclidean(*dim)
        }
        MetricSpec::Constant { g_inv } => CoMetric::Constant(matrix(g_inv)?),
        MetricSpec::Sphere => CoMetric::Sphere,
        MetricSpec::Hyperbolic => CoMetric::Hyperbolic,
        MetricSpec::Randers { g_inv, b } => CoMetric::Randers { g: matrix(g_inv)?, b: b.clone() },
    })
}

pub fn profile(spec: &ProfileSpec) -> Profile {
    match spec {
        ProfileSpec::Quadratic { a } => Profile::Quadratic { a: *a },
        ProfileSpec::Power { p } => Profile::Power { p: *p },
        ProfileSpec::Polynomial { coeffs } => Profile::Polynomial { coeffs: coeffs.clone() },
    }
}

fn metric_dim(m: &CoMetric) -> usize {
    match m {
        CoMetric::Constant(g) | CoMetric::Randers { g, .. } => g.nrows(),
        CoMetric::Sphere | CoMetric::Hyperbolic => 2,
    }
}

/// Parameter errors from the core constructors are configuration errors here.
fn param(e: hamflow_core::Error) -> Error {
    Error::config(e.to_string())
}

pub fn hamiltonian(spec: &HamiltonianSpec) -> Result<ChartHamiltonian> {
    Ok(match spec {
        HamiltonianSpec::Euclidean { dim } => {
            if *dim == 0 {
                return Err(Error::config("dimension must be positive"));
            }
            hm::euclidean(*dim)
        }
        HamiltonianSpec::Riemannian { g_inv } => hm::riemannian(matrix(g_inv)?).map_err(param)?,
        HamiltonianSpec::SphereChart => hm::sphere_chart(),
        HamiltonianSpec::HyperbolicDisk => hm::hyperbolic_disk(),
        HamiltonianSpec::Mechanical { metric: m, potential } => {
            let m = metric(m)?;
            let n = metric_dim(&m);
            let pot = match potential {
                PotentialSpec::Quadratic(k) => Potential::Quadratic(k.clone()),
                PotentialSpec::Expression(src) => Potential::Field(Expr::parse(src, n)?.to_field()),
            };
            hm::mechanical(m, pot).map_err(param)?
        }
        HamiltonianSpec::HarmonicOscillator { dim } => {
            if *dim == 0 {
                return Err(Error::config("dimension must be positive"));
            }
            hm::harmonic_oscillator(*dim)
        }
        HamiltonianSpec::Randers { g_inv, b } => hm::randers(matrix(g_inv)?, b.clone()).map_err(param)?,
        HamiltonianSpec::PHomogeneous { p, metric: m } => hm::p_homogeneous(*p, metric(m)?).map_err(param)?,
        HamiltonianSpec::Deformation { profile: p, metric: m } => hm::deformation(profile(p), metric(m)?).map_err(param)?,
    })
}

pub fn varsigma(spec: &WeightSpec, dim: usize) -> Result<ScalarField> {
    Ok(match spec {
        WeightSpec::Constant(c) => ScalarField::constant(dim, *c),
        WeightSpec::Expression(src) => Expr::parse(src, dim)?.to_field(),
    })
}

pub fn weight(spec: &WeightSpec, dim: usize) -> Result<WeightField> {
    Ok(WeightField::new(varsigma(spec, dim)?))
}

pub fn reference(spec: &WeightSpec) -> Result<Reference> {
    Ok(Reference { psi: varsigma(spec, 1)? })
}

pub fn state(spec: &StateSpec, dim: usize) -> Result<CotangentState> {
    if spec.x.len() != dim || spec.alpha.len() != dim {
        return Err(Error::config(format!("state must have {dim} coordinates and {dim} covector components")));
    }
    Ok(CotangentState::new(spec.x.clone(), spec.alpha.clone()))
}
