use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::risk::Dataset;

/// Finitely supported probability measure on `X × Y`.
///
/// Atoms are not merged on construction; repeated atoms simply add weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

const WEIGHT_TOL: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        // reuses the dataset checks for shapes and finiteness
        Dataset::new(xs.clone(), ys.clone())?;
        if weights.len() != ys.len() {
            return input_err(format!("{} weights for {} atoms", weights.len(), ys.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return input_err("measure weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return input_err(format!("measure weights sum to {total}, expected 1"));
        }
        Ok(DiscreteMeasure { xs, ys, weights })
    }

    /// Uniform weights on the observations of `data`.
    pub fn empirical(data: &Dataset) -> Self {
        let n = data.len();
        DiscreteMeasure { xs: data.xs().to_vec(), ys: data.ys().to_vec(), weights: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(x: Vec<f64>, y: f64) -> Result<Self> {
        DiscreteMeasure::new(vec![x], vec![y], vec![1.0])
    }

    /// `(1 − ε)·self + ε·other`, atoms concatenated.
    pub fn mixture(&self, other: &DiscreteMeasure, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return input_err(format!("mixture weight must lie in [0, 1], got {eps}"));
        }
        let mut xs = self.xs.clone();
        let mut ys = self.ys.clone();
        let mut weights: Vec<f64> = self.weights.iter().map(|w| (1.0 - eps) * w).collect();
        xs.extend(other.xs.iter().cloned());
        ys.extend(other.ys.iter().copied());
        weights.extend(other.weights.iter().map(|w| eps * w));
        DiscreteMeasure::new(xs, ys, weights)
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atoms as a dataset (weights dropped).
    pub fn atoms(&self) -> Dataset {
        Dataset::new(self.xs.clone(), self.ys.clone()).expect("validated on construction")
    }

    /// Weight per distinct atom, keyed by coordinate bit patterns.
    fn merged(&self) -> HashMap<Vec<u64>, f64> {
        let mut out = HashMap::new();
        for ((x, y), w) in self.xs.iter().zip(&self.ys).zip(&self.weights) {
            let mut key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            key.push(y.to_bits());
            *out.entry(key).or_insert(0.0) += w;
        }
        out
    }
}

/// `d_TV(P, Q) = ½ Σ_z |P({z}) − Q({z})|` over the union of the supports.
pub fn total_variation(p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
    let pm = p.merged();
    let qm = q.merged();
    let mut keys: Vec<&Vec<u64>> = pm.keys().chain(qm.keys()).collect();
    keys.sort();
    keys.dedup();
    let sum: f64 = keys
        .into_iter()
        .map(|k| (pm.get(k).copied().unwrap_or(0.0) - qm.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    (0.5 * sum).min(1.0)
}
