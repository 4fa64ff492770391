//! Bootstrap distribution of the fitted estimator.
//!
//! Replicate `b` draws from its own ChaCha8 stream (`seed`, stream `b`), so a
//! replicate's sample does not depend on how replicates are scheduled.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::kernels::KernelSpec;
use crate::losses::PairwiseLoss;
use crate::risk::Dataset;
use crate::solver::{fit, SolverOptions};

use super::measure::DiscreteMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    WithReplacement,
    /// Every replicate is the original sample in order.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub seed: u64,
    pub resampling: Resampling,
    /// Draws per replicate; the number of atoms when `None`.
    pub sample_size: Option<usize>,
}

impl BootstrapOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapOptions { replicates, seed, resampling: Resampling::WithReplacement, sample_size: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub seed: u64,
    pub used: usize,
    pub unconverged: usize,
    pub h_norm: Option<Summary>,
    /// One summary per probe point.
    pub predictions: Vec<Option<Summary>>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary { mean, std, q05: quantile(&sorted, 0.05), q95: quantile(&sorted, 0.95) })
}

/// Resamples from the empirical measure of `data`.
pub fn bootstrap_distribution(
    data: &Dataset,
    loss: &PairwiseLoss,
    kernel: &KernelSpec,
    lambda: f64,
    probes: &[Vec<f64>],
    boot: &BootstrapOptions,
    opts: &SolverOptions,
) -> Result<BootstrapReport> {
    bootstrap_measure(&DiscreteMeasure::empirical(data), loss, kernel, lambda, probes, boot, opts)
}

/// Resamples from an arbitrary discrete measure, drawing atoms in proportion
/// to their weights.
pub fn bootstrap_measure(
    measure: &DiscreteMeasure,
    loss: &PairwiseLoss,
    kernel: &KernelSpec,
    lambda: f64,
    probes: &[Vec<f64>],
    boot: &BootstrapOptions,
    opts: &SolverOptions,
) -> Result<BootstrapReport> {
    if boot.replicates == 0 {
        return input_err("bootstrap needs at least one replicate");
    }
    let atoms = measure.atoms();
    let m = boot.sample_size.unwrap_or(atoms.len());
    if m == 0 {
        return input_err("bootstrap sample size must be positive");
    }
    if boot.resampling == Resampling::Identity && m != atoms.len() {
        return input_err("identity resampling uses every atom once");
    }
    let picker = WeightedIndex::new(measure.weights()).map_err(|e| crate::Error::Input(e.to_string()))?;
    let outcomes: Vec<Option<(f64, Vec<f64>)>> = (0..boot.replicates)
        .into_par_iter()
        .map(|b| -> Result<Option<(f64, Vec<f64>)>> {
            let indices: Vec<usize> = match boot.resampling {
                Resampling::Identity => (0..m).collect(),
                Resampling::WithReplacement => {
                    let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
                    rng.set_stream(b as u64);
                    (0..m).map(|_| picker.sample(&mut rng)).collect()
                }
            };
            let sample = atoms.select(&indices)?;
            let model = match fit(loss, &sample, kernel, lambda, opts) {
                Ok(model) if model.diagnostics.converged => model,
                Ok(_) => return Ok(None),
                Err(e) => {
                    log::warn!("bootstrap replicate {b} failed: {e}");
                    return Ok(None);
                }
            };
            Ok(Some((model.function.norm_sq()?.sqrt(), model.predict(probes)?)))
        })
        .collect::<Result<_>>()?;
    let ok: Vec<&(f64, Vec<f64>)> = outcomes.iter().flatten().collect();
    let norms: Vec<f64> = ok.iter().map(|o| o.0).collect();
    let predictions = (0..probes.len())
        .map(|k| summarize(&ok.iter().map(|o| o.1[k]).collect::<Vec<_>>()))
        .collect();
    Ok(BootstrapReport {
        replicates: boot.replicates,
        seed: boot.seed,
        used: ok.len(),
        unconverged: boot.replicates - ok.len(),
        h_norm: summarize(&norms),
        predictions,
    })
}
