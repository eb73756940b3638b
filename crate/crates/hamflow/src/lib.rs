//! Batch experiment runner, configuration and file formats for [`hamflow_core`].
//!
//! A batch is a JSON file listing experiments (see [`config::BatchConfig`]); each experiment
//! writes a CSV table, a JSON summary and, where meaningful, a two-column plot file.
//! Without a configuration the binary runs the acceptance suite ([`acceptance`]).

pub mod acceptance;
pub mod config;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod report;
pub mod runners;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use error::{Error, Result};
pub use hamflow_core;

use config::BatchConfig;
use report::ExperimentResult;

/// Outcome of one experiment in a batch.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub name: String,
    pub result: Result<ExperimentResult>,
    pub files: Vec<PathBuf>,
}

impl ExperimentOutcome {
    pub fn passed(&self) -> bool {
        self.result.as_ref().is_ok_and(ExperimentResult::passed)
    }
}

/// Runs every experiment (in parallel) and writes artifacts in config order.
///
/// Configuration errors found while setting up any experiment abort the batch before anything
/// is written; numerical failures are recorded per experiment.
pub fn run_batch(cfg: &BatchConfig, out: &Path, tolerance_scale: f64) -> Result<Vec<ExperimentOutcome>> {
    let mut results: Vec<Result<ExperimentResult>> =
        cfg.experiments.par_iter().map(|e| runners::run_experiment(e, tolerance_scale)).collect();
    if let Some(i) = results.iter().position(|r| matches!(r, Err(e) if e.exit_code() == 2)) {
        return results.swap_remove(i).map(|_| Vec::new());
    }
    let mut outcomes = Vec::with_capacity(results.len());
    for (exp, result) in cfg.experiments.iter().zip(results) {
        let dir = match &exp.output {
            Some(p) => out.join(p),
            None => out.to_path_buf(),
        };
        let files = match &result {
            Ok(r) => r.write(&dir)?,
            Err(e) => {
                std::fs::create_dir_all(&dir).map_err(|err| Error::io(&dir, err))?;
                let p = dir.join(format!("{}.error.json", exp.name));
                std::fs::write(&p, serde_json::to_string_pretty(&e.report())? + "\n").map_err(|err| Error::io(&p, err))?;
                vec![p]
            }
        };
        outcomes.push(ExperimentOutcome { name: exp.name.clone(), result, files });
    }
    Ok(outcomes)
}
