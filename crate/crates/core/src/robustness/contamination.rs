//! Risk-level robustness for bounded losses: maxbias over point
//! contaminations, the sensitivity curve and the total-variation risk gap,
//! plus the norm stability bound for Lipschitz losses.
//!
//! Regularized risks `R^reg(μ) = inf_f R_{L,μ}(f) + λ‖f‖²_H` are estimated
//! from fitted minimizers. Since the solver only reaches stationary points
//! for non-convex losses, a comparison between two measures takes the
//! infimum over the same candidate set (both fitted functions) under each
//! measure. The risk bounds hold for every function, so they also hold for
//! these estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::kernels::{distance, KernelSpec, RkhsFunction};
use crate::losses::PairwiseLoss;
use crate::risk::{check_lambda, weighted_risk, Dataset, Parallelism, Weights};
use crate::solver::{fit, fit_weighted, FittedModel, SolverOptions};

use super::measure::{total_variation, DiscreteMeasure};

const SLACK: f64 = 1e-8;

/// `R_{L,μ}(f) + λ‖f‖²_H` with `μ = Σ w_i δ_{(x_i, y_i)}`.
pub fn regularized_objective(
    loss: &PairwiseLoss,
    f: &RkhsFunction,
    lambda: f64,
    atoms: &Dataset,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let fvals = f.evaluate(atoms.xs())?;
    let w = weights.map_or(Weights::Uniform, Weights::Explicit);
    let risk = weighted_risk(loss, atoms.ys(), w, &fvals, false, Parallelism::Sequential)?;
    Ok(risk + lambda * f.norm_sq()?)
}

/// Estimates of `R^reg(μ)` and `R^reg(ν)` over the candidates `{f_μ, f_ν}`.
fn cross_evaluated(
    loss: &PairwiseLoss,
    lambda: f64,
    candidates: [&RkhsFunction; 2],
    mu: (&Dataset, Option<&[f64]>),
    nu: (&Dataset, Option<&[f64]>),
) -> Result<(f64, f64)> {
    let eval = |(atoms, w): (&Dataset, Option<&[f64]>)| -> Result<f64> {
        let a = regularized_objective(loss, candidates[0], lambda, atoms, w)?;
        let b = regularized_objective(loss, candidates[1], lambda, atoms, w)?;
        Ok(a.min(b))
    };
    Ok((eval(mu)?, eval(nu)?))
}

fn warm_start(base: &FittedModel, extra: usize) -> Vec<f64> {
    let mut alpha = base.alpha().to_vec();
    alpha.extend(std::iter::repeat(0.0).take(extra));
    alpha
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxbiasReport {
    pub epsilon: f64,
    /// Largest `|R^reg(P_ε) − R^reg(P)|` over the probed contaminations.
    pub worst_delta: f64,
    /// `2cε(1 + ε)`
    pub bound: f64,
    /// Contaminating atom `(x, y)` attaining `worst_delta`.
    pub contamination_argmax: Option<(Vec<f64>, f64)>,
    pub holds: bool,
    pub grid_size: usize,
    /// Contaminated fits that stopped before reaching the solver tolerance.
    pub unconverged: usize,
}

/// Corners and center of the input bounding box, scaled by 1, 3 and 10
/// about the center, crossed with the responses `min y`, `max y`,
/// `min y − 10·range` and `max y + 10·range`. Above eight input dimensions
/// the corners are replaced by the `2d` axis extremes.
pub fn default_contamination_grid(data: &Dataset) -> Vec<(Vec<f64>, f64)> {
    let d = data.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for x in data.xs() {
        for k in 0..d {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let extremes: Vec<Vec<f64>> = if d <= 8 {
        (0..1usize << d)
            .map(|mask| (0..d).map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] }).collect())
            .collect()
    } else {
        (0..2 * d)
            .map(|m| {
                let mut p = center.clone();
                p[m / 2] = if m % 2 == 0 { lo[m / 2] } else { hi[m / 2] };
                p
            })
            .collect()
    };
    let mut xs = vec![center.clone()];
    for scale in [1.0, 3.0, 10.0] {
        for e in &extremes {
            xs.push(center.iter().zip(e).map(|(c, v)| c + scale * (v - c)).collect());
        }
    }
    let ymin = data.ys().iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = data.ys().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = ymax - ymin;
    let ys = [ymin, ymax, ymin - 10.0 * range, ymax + 10.0 * range];
    xs.iter().flat_map(|x| ys.iter().map(move |&y| (x.clone(), y))).collect()
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return input_err(format!("contamination fraction must lie in [0, 1), got {eps}"));
    }
    Ok(())
}

/// Maxbias probe around the fit on the empirical measure of `data`.
///
/// Fits `P` first; see [`maxbias_probe_from`].
#[allow(clippy::too_many_arguments)]
pub fn maxbias_probe(
    loss: &PairwiseLoss,
    data: &Dataset,
    kernel: &KernelSpec,
    lambda: f64,
    eps: f64,
    grid: Option<&[(Vec<f64>, f64)]>,
    opts: &SolverOptions,
) -> Result<MaxbiasReport> {
    loss.require_bounded()?;
    check_epsilon(eps)?;
    let base = fit(loss, data, kernel, lambda, opts)?;
    maxbias_probe_from(&base, data, eps, grid, opts)
}

/// For each grid atom `z`, fits `P_ε = (1 − ε)P + εδ_z` from the base
/// coefficients and records `|R^reg(P_ε) − R^reg(P)|`.
pub fn maxbias_probe_from(
    base: &FittedModel,
    data: &Dataset,
    eps: f64,
    grid: Option<&[(Vec<f64>, f64)]>,
    opts: &SolverOptions,
) -> Result<MaxbiasReport> {
    let c = base.loss.require_bounded()?;
    check_epsilon(eps)?;
    if base.anchors() != data.xs() {
        return input_err("base model anchors must be the dataset inputs");
    }
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = default_contamination_grid(data);
            &default_grid
        }
    };
    let bound = 2.0 * c * eps * (1.0 + eps);
    if eps == 0.0 || grid.is_empty() {
        return Ok(MaxbiasReport {
            epsilon: eps,
            worst_delta: 0.0,
            bound,
            contamination_argmax: None,
            holds: true,
            grid_size: grid.len(),
            unconverged: 0,
        });
    }
    for (x, y) in grid {
        if x.len() != data.dim() || !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return input_err("contamination grid atoms must be finite and match the data dimension");
        }
    }
    let p = DiscreteMeasure::empirical(data);
    let results: Vec<(f64, bool)> = grid
        .par_iter()
        .map(|(x, y)| -> Result<(f64, bool)> {
            let pe = p.mixture(&DiscreteMeasure::point_mass(x.clone(), *y)?, eps)?;
            let atoms = pe.atoms();
            let fe = fit_weighted(
                &base.loss,
                &atoms,
                Some(pe.weights()),
                base.kernel(),
                base.lambda,
                opts,
                Some(warm_start(base, 1)),
            )?;
            let (r_e, r_p) = cross_evaluated(
                &base.loss,
                base.lambda,
                [&base.function, &fe.function],
                (&atoms, Some(pe.weights())),
                (data, None),
            )?;
            Ok(((r_e - r_p).abs(), fe.diagnostics.converged))
        })
        .collect::<Result<_>>()?;
    let mut worst = 0.0;
    let mut argmax = None;
    for (i, (delta, _)) in results.iter().enumerate() {
        if argmax.is_none() || *delta > worst {
            worst = *delta;
            argmax = Some(i);
        }
    }
    Ok(MaxbiasReport {
        epsilon: eps,
        worst_delta: worst,
        bound,
        contamination_argmax: argmax.map(|i| grid[i].clone()),
        holds: worst <= bound + SLACK,
        grid_size: grid.len(),
        unconverged: results.iter().filter(|(_, ok)| !ok).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGapReport {
    pub risk_p: f64,
    pub risk_q: f64,
    pub delta: f64,
    pub total_variation: f64,
    /// `2c·d_TV(Q, P)`
    pub bound: f64,
    pub holds: bool,
}

/// `|R^reg(Q) − R^reg(P)|` against `2c·d_TV(Q, P)` for two discrete measures.
pub fn risk_gap(
    loss: &PairwiseLoss,
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    kernel: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<RiskGapReport> {
    let c = loss.require_bounded()?;
    check_lambda(lambda)?;
    let (pa, qa) = (p.atoms(), q.atoms());
    let fp = fit_weighted(loss, &pa, Some(p.weights()), kernel, lambda, opts, None)?;
    let fq = fit_weighted(loss, &qa, Some(q.weights()), kernel, lambda, opts, None)?;
    let (risk_p, risk_q) = cross_evaluated(
        loss,
        lambda,
        [&fp.function, &fq.function],
        (&pa, Some(p.weights())),
        (&qa, Some(q.weights())),
    )?;
    let tv = total_variation(p, q);
    let delta = (risk_q - risk_p).abs();
    let bound = 2.0 * c * tv;
    Ok(RiskGapReport { risk_p, risk_q, delta, total_variation: tv, bound, holds: delta <= bound + SLACK })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScTarget {
    /// `n·(R^reg(P_ε) − R^reg(P))`
    Risk,
    /// `n·‖f_{P_ε} − f_P‖_H`
    Estimator,
}

pub const SC_CONVENTION: &str = "reference P is the empirical measure of the n-1 given points; \
P_eps = (1 - 1/n) P + (1/n) delta_z0 is the empirical measure of the n points after appending z0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub target: ScTarget,
    /// Size of the augmented sample.
    pub n: usize,
    pub value: f64,
    pub reference_risk: f64,
    pub augmented_risk: f64,
    /// `2c(1 + 1/n)` for the risk target with a bounded loss.
    pub bound: Option<f64>,
    pub holds: Option<bool>,
    pub reference_converged: bool,
    pub augmented_converged: bool,
    pub convention: String,
}

/// Sensitivity curve at `z0 = (x0, y0)` for the `n − 1` points in `data`.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_curve(
    data: &Dataset,
    x0: &[f64],
    y0: f64,
    loss: &PairwiseLoss,
    kernel: &KernelSpec,
    lambda: f64,
    target: ScTarget,
    opts: &SolverOptions,
) -> Result<SensitivityReport> {
    let c = match target {
        ScTarget::Risk => Some(loss.require_bounded()?),
        ScTarget::Estimator => loss.require_bounded().ok(),
    };
    let augmented = data.with_point(x0.to_vec(), y0)?;
    let n = augmented.len();
    let nf = n as f64;
    let reference = fit(loss, data, kernel, lambda, opts)?;
    let fitted = fit_weighted(loss, &augmented, None, kernel, lambda, opts, Some(warm_start(&reference, 1)))?;
    let (augmented_risk, reference_risk) = cross_evaluated(
        loss,
        lambda,
        [&reference.function, &fitted.function],
        (&augmented, None),
        (data, None),
    )?;
    let (value, bound) = match target {
        ScTarget::Risk => (nf * (augmented_risk - reference_risk), c.map(|c| 2.0 * c * (1.0 + 1.0 / nf))),
        ScTarget::Estimator => (nf * distance(&fitted.function, &reference.function)?, None),
    };
    Ok(SensitivityReport {
        target,
        n,
        value,
        reference_risk,
        augmented_risk,
        bound,
        holds: bound.map(|b| value.abs() <= b + SLACK),
        reference_converged: reference.diagnostics.converged,
        augmented_converged: fitted.diagnostics.converged,
        convention: SC_CONVENTION.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    /// `‖f_P − f_Q‖_H`
    pub lhs: f64,
    /// `4 c_{L,1} ‖k‖²_∞ / λ`
    pub rhs: f64,
    pub holds: bool,
}

/// Norm stability of two fits with the same loss, kernel and `λ`.
pub fn stability_bound_check(model_p: &FittedModel, model_q: &FittedModel) -> Result<StabilityCheck> {
    if model_p.loss != model_q.loss {
        return input_err("models use different losses");
    }
    if model_p.kernel() != model_q.kernel() {
        return input_err("models use different kernels");
    }
    if model_p.lambda != model_q.lambda {
        return input_err("models use different regularization parameters");
    }
    model_p.loss.require_smooth_lipschitz()?;
    if !model_p.kernel().is_bounded() {
        return Err(Error::Unsupported("stability bound requires a bounded kernel".into()));
    }
    if !(model_p.diagnostics.converged && model_q.diagnostics.converged) {
        return input_err("stability bound compares converged fits");
    }
    let k = model_p.kernel().sup_norm();
    let rhs = 4.0 * model_p.loss.constants().grad_bound * k * k / model_p.lambda;
    let lhs = distance(&model_p.function, &model_q.function)?;
    Ok(StabilityCheck { lhs, rhs, holds: lhs <= rhs + SLACK })
}
