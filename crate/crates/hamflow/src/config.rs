//! Batch configuration. Every struct rejects unknown keys; the JSON schema in
//! `schema/config.schema.json` is generated from these types.

use std::path::PathBuf;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// File stem for all artifacts; letters, digits, `-` and `_`.
    pub name: String,
    pub hamiltonian: HamiltonianSpec,
    /// `ς` in `m = e^{-ς} dx`: a constant or an expression in `x0, x1, …`.
    #[serde(default)]
    pub weight: WeightSpec,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Subdirectory of the output root (or an absolute path).
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for randomized samples; outputs are a pure function of the config.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(untagged)]
pub enum WeightSpec {
    Constant(f64),
    Expression(String),
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant(0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Absolute bound on identity residuals.
    #[serde(default = "default_residual")]
    pub residual: f64,
    /// Allowed negative slack of inequalities.
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Relative bound on extrapolated identities.
    #[serde(default = "default_relative")]
    pub relative: f64,
}

fn default_residual() -> f64 {
    1e-4
}
fn default_slack() -> f64 {
    1e-8
}
fn default_relative() -> f64 {
    0.02
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { residual: default_residual(), slack: default_slack(), relative: default_relative() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    Euclidean { dim: usize },
    Riemannian { g_inv: Vec<Vec<f64>> },
    SphereChart,
    HyperbolicDisk,
    Mechanical { metric: MetricSpec, potential: PotentialSpec },
    HarmonicOscillator { dim: usize },
    Randers { g_inv: Vec<Vec<f64>>, b: Vec<f64> },
    PHomogeneous { p: f64, metric: MetricSpec },
    Deformation { profile: ProfileSpec, metric: MetricSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean { dim: usize },
    Constant { g_inv: Vec<Vec<f64>> },
    Sphere,
    Hyperbolic,
    Randers { g_inv: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `Z = Σ k_i x_i² / 2`.
    Quadratic(Vec<f64>),
    Expression(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `h(t) = (a t)² / 2`.
    Quadratic { a: f64 },
    /// `h(t) = t^p / p`.
    Power { p: f64 },
    /// `h(t) = Σ c_k t^k`.
    Polynomial { coeffs: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub x: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, JsonSchema, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureRouteSpec {
    #[default]
    Frame,
    Coordinate,
    Both,
}

/// Source of the curvature along the comparison geodesic.
#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureOracle {
    /// `R = (K/N) I`, the model space.
    Model,
    /// Flat space seeded from a point: `R = 0` with a rank `n − 1` cone.
    FlatRadial,
    /// Curvature operator of the configured Hamiltonian along the trajectory of `state`.
    Trajectory { state: StateSpec },
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, JsonSchema, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ExperimentKind {
    Curvature {
        states: Vec<StateSpec>,
        /// Values of `N` for `Ric_N`; empty skips the weighted columns.
        #[serde(default)]
        ns: Vec<f64>,
        #[serde(default)]
        route: CurvatureRouteSpec,
    },
    Riccati {
        /// Initial potential `u`.
        u: String,
        x0: Vec<f64>,
        t_end: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    Bochner {
        u: String,
        points: Vec<Vec<f64>>,
        ns: Vec<f64>,
    },
    Compare {
        k: f64,
        big_n: f64,
        t_end: f64,
        oracle: CurvatureOracle,
    },
    Mcp {
        k: f64,
        big_n: f64,
        t_end: f64,
        oracle: CurvatureOracle,
    },
    Heat {
        cells: usize,
        initial: String,
        t_end: f64,
        /// Defaults to half the stability bound.
        #[serde(default)]
        dt: Option<f64>,
        /// Second initial datum for the contraction column.
        #[serde(default)]
        second: Option<String>,
    },
    Mms {
        cells: usize,
        initial: String,
        t: f64,
        ks: Vec<usize>,
    },
    Entropyflow {
        cells: usize,
        initial: String,
        t_end: f64,
        #[serde(default)]
        dt: Option<f64>,
        #[serde(default)]
        rho_min: f64,
        #[serde(default = "default_checks")]
        checks: usize,
    },
    Harmonic {
        shape: Vec<usize>,
        spacing: f64,
        /// Boundary data and initial guess.
        initial: String,
    },
    Transport {
        line: LineSpec,
        /// Lebesgue densities in `x`, normalized on the line.
        source: String,
        target: String,
        #[serde(default = "default_horizon")]
        horizon: f64,
        k: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        /// Random atoms per assignment instance (at most 12); 0 skips the check.
        #[serde(default)]
        assignment_atoms: usize,
    },
}

fn default_samples() -> usize {
    8
}
fn default_checks() -> usize {
    8
}
fn default_horizon() -> f64 {
    1.0
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Curvature { .. } => "curvature",
            ExperimentKind::Riccati { .. } => "riccati",
            ExperimentKind::Bochner { .. } => "bochner",
            ExperimentKind::Compare { .. } => "compare",
            ExperimentKind::Mcp { .. } => "mcp",
            ExperimentKind::Heat { .. } => "heat",
            ExperimentKind::Mms { .. } => "mms",
            ExperimentKind::Entropyflow { .. } => "entropyflow",
            ExperimentKind::Harmonic { .. } => "harmonic",
            ExperimentKind::Transport { .. } => "transport",
        }
    }
}

impl BatchConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: BatchConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiments.is_empty() {
            return Err(Error::config("no experiments"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.experiments {
            if e.name.is_empty() || !e.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::config(format!("experiment name {:?} must be letters, digits, '-' or '_'", e.name)));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::config(format!("duplicate experiment name {:?}", e.name)));
            }
            let t = &e.tolerances;
            if !(t.residual > 0.0 && t.slack >= 0.0 && t.relative > 0.0) {
                return Err(Error::config(format!("{}: tolerances must be positive", e.name)));
            }
        }
        Ok(())
    }
}

/// The published schema, as pretty JSON.
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(BatchConfig);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}
