use std::path::Path;
use std::time::Duration;

use ce_core::solvers::Outcome;
use ce_core::RunTrace;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

/// PSNR in dB against the clean image; `null` in JSON when infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsnrReport {
    pub noisy: Option<f64>,
    /// One per denoiser, in strength order.
    pub single: Vec<Option<f64>>,
    pub baseline: Option<f64>,
    pub ce: Option<f64>,
}

/// One solver run. Every field is always present so a batch is rectangular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub seed: Option<u64>,
    pub solver: String,
    pub outcome: String,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub iterations: usize,
    pub map_evals: u64,
    /// RMS distance to the reference solution at the last iterate.
    pub final_rmse: Option<f64>,
    /// Spectral radius of the linearized iteration, where it is defined.
    pub predicted_modulus: Option<f64>,
    pub psnr: Option<PsnrReport>,
    /// Excluded from JSON so outputs stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

pub fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Converged => "converged",
        Outcome::MaxIterations => "max-iterations",
        Outcome::Diverged => "diverged",
        Outcome::NonFinite => "non-finite",
    }
}

pub(crate) fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ExperimentSummary {
    pub fn from_trace(experiment: &str, seed: Option<u64>, trace: &RunTrace, wall_time: Duration) -> Self {
        ExperimentSummary {
            experiment: experiment.to_string(),
            seed,
            solver: trace.label.clone(),
            outcome: outcome_name(trace.outcome).to_string(),
            converged: trace.converged(),
            final_residual: trace.final_residual().and_then(finite),
            iterations: trace.iterations(),
            map_evals: trace.total_map_evals(),
            final_rmse: trace.rmse_error.last().copied().flatten().and_then(finite),
            predicted_modulus: None,
            psnr: None,
            wall_time,
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_summaries(out_dir: &Path, summaries: &[ExperimentSummary]) -> Result<()> {
    write_json(&out_dir.join("summary.json"), summaries)
}

pub fn read_summaries(path: &Path) -> Result<Vec<ExperimentSummary>> {
    let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))
}
