use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::prob::SimRng;

/// Per-trial records of a batch plus the mean and sample standard deviation
/// of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo<T> {
    pub base_seed: u64,
    pub records: Vec<T>,
    pub mean: f64,
    pub stddev: f64,
}

/// Runs `trials` independent trials, trial `i` on stream `i` of
/// `base_seed`. Trials may run concurrently; records come back in trial
/// order, so the result does not depend on scheduling.
pub fn monte_carlo<T, F, M>(trials: u64, base_seed: u64, run: F, metric: M) -> Result<MonteCarlo<T>>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> Result<T> + Sync,
    M: Fn(&T) -> f64,
{
    ensure!(trials >= 1, Argument, "need at least one trial");
    let records = (0..trials)
        .into_par_iter()
        .map(|t| run(t, &mut SimRng::new(base_seed, t)))
        .collect::<Result<Vec<T>>>()?;
    let values: Vec<f64> = records.iter().map(metric).collect();
    let (mean, stddev) = mean_stddev(&values);
    Ok(MonteCarlo {
        base_seed,
        records,
        mean,
        stddev,
    })
}

/// Mean and sample (n − 1) standard deviation; one value has stddev 0.
pub fn mean_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}
