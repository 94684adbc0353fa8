use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RuntimeStats {
    /// Seconds.
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub total: f64,
    pub n: usize,
}

/// Population statistics of per-step wall times in seconds.
pub fn runtime_report(samples: &[f64]) -> Result<RuntimeStats> {
    if samples.is_empty() {
        return Err(Error::Empty("runtime samples"));
    }
    let (mean, std) = mean_std(samples);
    Ok(RuntimeStats {
        min: samples.iter().copied().fold(f64::INFINITY, f64::min),
        mean,
        std,
        max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        total: samples.iter().sum(),
        n: samples.len(),
    })
}

/// Mean and population standard deviation; `(NaN, NaN)` when empty.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Outcome of one evaluation rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Sum of per-step environment rewards; shield costs excluded.
    pub objective: f64,
    pub objective_per_step: f64,
    pub tolerance: f64,
    /// EUR
    pub energy_cost: f64,
    /// MWh of absolute thermal imbalance.
    pub comfort_loss: f64,
    pub n_steps: usize,
    pub n_fallbacks: usize,
    pub n_retries: usize,
    /// Executed actions the safety layer rejects on re-check.
    pub n_violations: usize,
    pub step_runtime: RuntimeStats,
}
