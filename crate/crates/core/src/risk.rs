//! Empirical pairwise risks as degree-2 V-statistics.
//!
//! All sums run over every ordered pair `(i, j)`, diagonal included, in a
//! fixed `i`-outer/`j`-inner order. Weighted measures use product weights
//! `w_i·w_j`; the uniform case divides the plain double sum by `n²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::kernels::{GramMatrix, RkhsFunction};
use crate::losses::PairwiseLoss;

/// Observations `(x_i, y_i)`, `i = 1..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return input_err("dataset must contain at least one observation");
        }
        if xs.len() != ys.len() {
            return input_err(format!("{} inputs but {} responses", xs.len(), ys.len()));
        }
        let d = xs[0].len();
        for (i, x) in xs.iter().enumerate() {
            if x.len() != d {
                return input_err(format!("row {i} has dimension {}, expected {d}", x.len()));
            }
            if x.iter().any(|v| !v.is_finite()) || !ys[i].is_finite() {
                return input_err(format!("row {i} contains NaN or infinite values"));
            }
        }
        Ok(Dataset { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs[0].len()
    }

    pub fn xs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Dataset with rows taken at `indices` (repetitions allowed).
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(bad) = indices.iter().find(|&&i| i >= self.len()) {
            return input_err(format!("row index {bad} out of range"));
        }
        Dataset::new(
            indices.iter().map(|&i| self.xs[i].clone()).collect(),
            indices.iter().map(|&i| self.ys[i]).collect(),
        )
    }

    /// Appends one observation.
    pub fn with_point(&self, x: Vec<f64>, y: f64) -> Result<Dataset> {
        let mut xs = self.xs.clone();
        let mut ys = self.ys.clone();
        xs.push(x);
        ys.push(y);
        Dataset::new(xs, ys)
    }
}

/// Point weights of the measure a risk is taken under.
#[derive(Debug, Clone, Copy)]
pub enum Weights<'a> {
    /// Empirical measure, weight `1/n` each.
    Uniform,
    /// Arbitrary probability weights.
    Explicit(&'a [f64]),
}

impl Weights<'_> {
    fn check(&self, n: usize) -> Result<()> {
        if let Weights::Explicit(w) = self {
            if w.len() != n {
                return input_err(format!("{} weights for {n} points", w.len()));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return input_err("weights must be finite and nonnegative");
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return input_err(format!("weights sum to {total}, expected 1"));
            }
        }
        Ok(())
    }
}

/// How the `O(n²)` pair sums are evaluated.
///
/// `Rows(k)` splits the outer index into `k` contiguous blocks, sums each
/// block on its own thread and adds the block totals in block order, so the
/// result depends on `k` but not on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    Rows(usize),
}

fn pair_sum<F>(n: usize, weights: Weights<'_>, par: Parallelism, term: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let row = |i: usize| -> f64 {
        match weights {
            Weights::Uniform => (0..n).map(|j| term(i, j)).sum::<f64>(),
            Weights::Explicit(w) => w[i] * (0..n).map(|j| w[j] * term(i, j)).sum::<f64>(),
        }
    };
    let total = match par {
        Parallelism::Rows(k) if k > 1 && n > 1 => {
            let chunk = n.div_ceil(k);
            let partials: Vec<f64> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..n)
                    .step_by(chunk)
                    .map(|start| {
                        let row = &row;
                        scope.spawn(move || (start..(start + chunk).min(n)).map(row).sum::<f64>())
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("risk worker panicked")).collect()
            });
            partials.into_iter().sum()
        }
        _ => (0..n).map(row).sum(),
    };
    match weights {
        Weights::Uniform => total / (n as f64 * n as f64),
        Weights::Explicit(_) => total,
    }
}

fn check_lengths(n: usize, fvals: &[f64]) -> Result<()> {
    if fvals.len() != n {
        return input_err(format!("{} function values for {n} observations", fvals.len()));
    }
    if fvals.iter().any(|v| !v.is_finite()) {
        return input_err("function values must be finite");
    }
    Ok(())
}

/// Risk of `fvals` under the measure with responses `ys` and `weights`.
pub fn weighted_risk(
    loss: &PairwiseLoss,
    ys: &[f64],
    weights: Weights<'_>,
    fvals: &[f64],
    shifted: bool,
    par: Parallelism,
) -> Result<f64> {
    loss.validate()?;
    check_lengths(ys.len(), fvals)?;
    weights.check(ys.len())?;
    let n = ys.len();
    Ok(if shifted {
        pair_sum(n, weights, par, |i, j| loss.shifted_value(ys[i], ys[j], fvals[i], fvals[j]))
    } else {
        pair_sum(n, weights, par, |i, j| loss.value(ys[i], ys[j], fvals[i], fvals[j]))
    })
}

/// `(1/n²) Σ_i Σ_j L(x_i, y_i, x_j, y_j, f(x_i), f(x_j))`.
pub fn empirical_risk(loss: &PairwiseLoss, data: &Dataset, fvals: &[f64]) -> Result<f64> {
    weighted_risk(loss, data.ys(), Weights::Uniform, fvals, false, Parallelism::Sequential)
}

/// Same sum, split over `threads` row blocks.
pub fn empirical_risk_parallel(loss: &PairwiseLoss, data: &Dataset, fvals: &[f64], threads: usize) -> Result<f64> {
    weighted_risk(loss, data.ys(), Weights::Uniform, fvals, false, Parallelism::Rows(threads))
}

/// Empirical risk of the shifted loss `L⋆`.
pub fn empirical_shifted_risk(loss: &PairwiseLoss, data: &Dataset, fvals: &[f64]) -> Result<f64> {
    weighted_risk(loss, data.ys(), Weights::Uniform, fvals, true, Parallelism::Sequential)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub risk: f64,
    pub regularized_risk: f64,
    pub norm_sq: f64,
    pub shifted: bool,
    pub pair_count: usize,
}

/// Risk of `model` on `data` plus `λ‖f‖²_H`.
pub fn regularized_risk(
    loss: &PairwiseLoss,
    data: &Dataset,
    model: &RkhsFunction,
    lambda: f64,
    shifted: bool,
) -> Result<RiskReport> {
    check_lambda(lambda)?;
    let fvals = model.evaluate(data.xs())?;
    let risk = weighted_risk(loss, data.ys(), Weights::Uniform, &fvals, shifted, Parallelism::Sequential)?;
    let norm_sq = model.norm_sq()?;
    Ok(RiskReport {
        risk,
        regularized_risk: risk + lambda * norm_sq,
        norm_sq,
        shifted,
        pair_count: data.len() * data.len(),
    })
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return input_err(format!("regularization parameter lambda must be positive, got {lambda}"));
    }
    Ok(())
}

/// Coefficient-space gradient of the regularized risk at `α`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskGradient {
    /// `g_m = ∂R/∂f(x_m)`, the averaged partial derivatives.
    pub g: Vec<f64>,
    /// `g + 2λα`: coefficients of the H-gradient of the regularized risk.
    pub residual_dir: Vec<f64>,
}

/// Partial derivatives of the risk with respect to the function values,
/// `g_m = Σ_j w_m w_j D₅L(z_m, z_j) + Σ_i w_i w_m D₆L(z_i, z_m)`.
pub fn weighted_value_gradient(loss: &PairwiseLoss, ys: &[f64], weights: Weights<'_>, fvals: &[f64]) -> Vec<f64> {
    let n = ys.len();
    let mut g = vec![0.0; n];
    let uniform = 1.0 / (n as f64 * n as f64);
    for i in 0..n {
        for j in 0..n {
            let w = match weights {
                Weights::Uniform => uniform,
                Weights::Explicit(w) => w[i] * w[j],
            };
            if w == 0.0 {
                continue;
            }
            let (d5, d6) = loss.grad(ys[i], ys[j], fvals[i], fvals[j]);
            g[i] += w * d5;
            g[j] += w * d6;
        }
    }
    g
}

/// Second derivative of the risk with respect to the function values:
/// the symmetric matrix `A` with
/// `A_ii += w·D₅D₅`, `A_ij, A_ji += w·D₅D₆`, `A_jj += w·D₆D₆` per pair.
pub fn weighted_value_hessian(
    loss: &PairwiseLoss,
    ys: &[f64],
    weights: Weights<'_>,
    fvals: &[f64],
) -> Result<DMatrix<f64>> {
    loss.hessian(0.0, 0.0, 0.0, 0.0)?;
    let n = ys.len();
    let mut a = DMatrix::zeros(n, n);
    let uniform = 1.0 / (n as f64 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                // [[h, −h], [−h, h]] collapses to zero on the diagonal
                continue;
            }
            let w = match weights {
                Weights::Uniform => uniform,
                Weights::Explicit(w) => w[i] * w[j],
            };
            let h = w * loss.hessian_scale(ys[i], ys[j], fvals[i], fvals[j]).unwrap_or(0.0);
            a[(i, i)] += h;
            a[(j, j)] += h;
            a[(i, j)] -= h;
            a[(j, i)] -= h;
        }
    }
    Ok(a)
}

/// Gradient of `R(Gα) + λαᵀGα` in representer form.
///
/// Stationarity holds iff `residual_dir` lies in the null space of `G`;
/// away from that null space the fixed point is `α = −g/(2λ)`.
pub fn risk_gradient_coeffs(
    loss: &PairwiseLoss,
    data: &Dataset,
    gram: &GramMatrix,
    alpha: &[f64],
    lambda: f64,
) -> Result<RiskGradient> {
    check_lambda(lambda)?;
    if gram.len() != data.len() || alpha.len() != data.len() {
        return input_err(format!(
            "size mismatch: {} observations, gram {}, {} coefficients",
            data.len(),
            gram.len(),
            alpha.len()
        ));
    }
    let fvals = gram.apply(alpha);
    let g = weighted_value_gradient(loss, data.ys(), Weights::Uniform, &fvals);
    let residual_dir = g.iter().zip(alpha).map(|(gi, ai)| gi + 2.0 * lambda * ai).collect();
    Ok(RiskGradient { g, residual_dir })
}
