//! Fitting the regularized pairwise estimator in representer form.
//!
//! The minimizer of `R_{L,D}(f) + λ‖f‖²_H` lies in the span of the training
//! feature maps, so everything is done on coefficients `α` with
//! `f = Σ α_m k(·, x_m)`. With `g = ∂R/∂f(x_·)` the H-gradient of the
//! objective has coefficients `g + 2λα`; its H-seminorm is the convergence
//! measure for every mode.
//!
//! Line searches compare objective values of the unshifted loss. The shifted
//! objective differs from it by the constant `R_{L,D}(0)`, so iterates are
//! identical for `L` and `L⋆`; only the reported objective changes.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::kernels::{clamped_quadratic_form, gram_matrix, GramMatrix, KernelSpec, RkhsFunction};
use crate::losses::PairwiseLoss;
use crate::risk::{check_lambda, weighted_risk, weighted_value_gradient, weighted_value_hessian, Dataset, Parallelism, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Newton for convex twice differentiable losses, gradient descent for
    /// MEE and the other smooth losses, subgradient steps for kinked losses.
    #[default]
    Auto,
    /// Damped iteration `α ← (1−d)α + d·(−g(α)/2λ)`.
    FixedPoint,
    /// Steepest descent in H with Armijo backtracking.
    GradientDescent,
    /// Newton steps in H with Armijo backtracking.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Threshold on the H-seminorm of the stationarity residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Fixed-point damping in (0, 1].
    pub damping: f64,
    /// Armijo backtracking for the gradient mode.
    pub line_search: bool,
    pub mode: SolverMode,
    pub warn_nonconvex: bool,
    /// Report objectives under the shifted loss `L⋆`.
    pub shifted: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 10_000,
            damping: 0.5,
            line_search: true,
            mode: SolverMode::Auto,
            warn_nonconvex: true,
            shifted: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return input_err(format!("solver tol must be positive, got {}", self.tol));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return input_err(format!("solver damping must lie in (0, 1], got {}", self.damping));
        }
        if self.max_iter == 0 {
            return input_err("solver max_iter must be positive");
        }
        Ok(())
    }
}

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;
const STALL_WINDOW: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub final_residual: f64,
    pub objective: f64,
    pub converged: bool,
    pub nonconvex_warning: bool,
    /// Set for kinked losses, where convergence means an objective stall.
    #[serde(default)]
    pub best_effort: bool,
    #[serde(default)]
    pub mode: String,
}

/// A fitted estimator `f = Σ α_m k(·, x_m)` over the training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub function: RkhsFunction,
    pub lambda: f64,
    pub loss: PairwiseLoss,
    pub diagnostics: Diagnostics,
}

impl FittedModel {
    pub fn alpha(&self) -> &[f64] {
        &self.function.coefficients
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.function.kernel
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.function.anchors
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        predict(self, xs)
    }
}

/// Objective and gradient of the regularized risk under a weighted measure
/// whose atoms are the anchors of `gram`.
struct Problem<'a> {
    loss: PairwiseLoss,
    ys: &'a [f64],
    weights: Weights<'a>,
    gram: &'a GramMatrix,
    lambda: f64,
}

struct State {
    alpha: Vec<f64>,
    objective: f64,
    residual_dir: Vec<f64>,
    residual: f64,
}

impl Problem<'_> {
    fn objective(&self, alpha: &[f64], shifted: bool) -> f64 {
        let f = self.gram.apply(alpha);
        let risk = weighted_risk(&self.loss, self.ys, self.weights, &f, shifted, Parallelism::Sequential)
            .expect("validated problem");
        risk + self.lambda * clamped_quadratic_form(self.gram, alpha)
    }

    fn state(&self, alpha: Vec<f64>) -> State {
        let f = self.gram.apply(&alpha);
        let risk = weighted_risk(&self.loss, self.ys, self.weights, &f, false, Parallelism::Sequential)
            .expect("validated problem");
        let objective = risk + self.lambda * clamped_quadratic_form(self.gram, &alpha);
        let g = weighted_value_gradient(&self.loss, self.ys, self.weights, &f);
        let residual_dir: Vec<f64> = g.iter().zip(&alpha).map(|(g, a)| g + 2.0 * self.lambda * a).collect();
        let residual = self.gram.seminorm(&residual_dir);
        State { alpha, objective, residual_dir, residual }
    }

    /// Backtracking along `dir` from `state`. Accepts the first step with
    /// sufficient decrease, allowing a few ulps of slack so that steps near
    /// the optimum are not rejected on round-off alone.
    fn armijo(&self, state: &State, dir: &[f64], slope: f64) -> Option<State> {
        let mut step = 1.0;
        let slack = 4.0 * f64::EPSILON * state.objective.abs().max(1.0);
        while step >= MIN_STEP {
            let trial: Vec<f64> = state.alpha.iter().zip(dir).map(|(a, d)| a + step * d).collect();
            let next = self.state(trial);
            if next.objective.is_finite() && next.objective <= state.objective + ARMIJO_C1 * step * slope + slack {
                return Some(next);
            }
            step *= BACKTRACK;
        }
        None
    }

    /// Newton direction `(A G + 2λI) δ = −(g + 2λα)`.
    fn newton_direction(&self, state: &State) -> Option<Vec<f64>> {
        let f = self.gram.apply(&state.alpha);
        let a = weighted_value_hessian(&self.loss, self.ys, self.weights, &f).ok()?;
        let n = state.alpha.len();
        let m = &a * self.gram.matrix() + DMatrix::identity(n, n) * (2.0 * self.lambda);
        let rhs = -DVector::from_column_slice(&state.residual_dir);
        let delta = m.lu().solve(&rhs)?;
        delta.iter().all(|v| v.is_finite()).then(|| delta.iter().copied().collect())
    }
}

fn resolve_mode(loss: &PairwiseLoss, requested: SolverMode) -> SolverMode {
    match requested {
        SolverMode::Auto => {
            let c = loss.constants();
            if c.convex && c.twice_differentiable {
                SolverMode::Newton
            } else {
                SolverMode::GradientDescent
            }
        }
        other => other,
    }
}

fn mode_name(mode: SolverMode, smooth: bool) -> &'static str {
    if !smooth {
        return "subgradient";
    }
    match mode {
        SolverMode::Auto | SolverMode::Newton => "newton",
        SolverMode::FixedPoint => "fixed_point",
        SolverMode::GradientDescent => "gradient_descent",
    }
}

fn run(problem: &Problem<'_>, alpha0: Vec<f64>, opts: &SolverOptions) -> (Vec<f64>, Diagnostics) {
    let constants = problem.loss.constants();
    let smooth = constants.differentiable;
    let mode = resolve_mode(&problem.loss, opts.mode);
    let nonconvex = !constants.convex;
    if nonconvex && opts.warn_nonconvex {
        warn!(
            "{} loss is not convex; the solver returns a stationary point reached from the initial coefficients",
            problem.loss.name()
        );
    }

    let mut state = problem.state(alpha0);
    let mut iterations = 0;
    let mut converged = state.residual <= opts.tol;

    if !smooth {
        return run_subgradient(problem, state, opts, nonconvex);
    }

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let next = match mode {
            SolverMode::FixedPoint => {
                let d = opts.damping;
                let alpha = state
                    .alpha
                    .iter()
                    .zip(&state.residual_dir)
                    .map(|(a, r)| {
                        let g = r - 2.0 * problem.lambda * a;
                        (1.0 - d) * a + d * (-g / (2.0 * problem.lambda))
                    })
                    .collect();
                Some(problem.state(alpha))
            }
            SolverMode::GradientDescent => {
                let dir: Vec<f64> = state.residual_dir.iter().map(|r| -r).collect();
                let slope = -state.residual * state.residual;
                if opts.line_search {
                    problem.armijo(&state, &dir, slope)
                } else {
                    let alpha = state.alpha.iter().zip(&dir).map(|(a, d)| a + d).collect();
                    Some(problem.state(alpha))
                }
            }
            SolverMode::Newton | SolverMode::Auto => {
                let newton = problem.newton_direction(&state).and_then(|dir| {
                    let slope = problem.gram.inner(&state.residual_dir, &dir);
                    (slope < 0.0).then_some((dir, slope))
                });
                let (dir, slope) = newton.unwrap_or_else(|| {
                    (state.residual_dir.iter().map(|r| -r).collect(), -state.residual * state.residual)
                });
                problem.armijo(&state, &dir, slope)
            }
        };
        match next {
            Some(next) if next.objective.is_finite() && next.alpha.iter().all(|a| a.is_finite()) => state = next,
            _ => {
                warn!("line search failed after {iterations} iterations (residual {:e})", state.residual);
                break;
            }
        }
        converged = state.residual <= opts.tol;
    }

    if !converged {
        warn!(
            "solver did not converge within {} iterations (residual {:e}, tol {:e})",
            opts.max_iter, state.residual, opts.tol
        );
    }
    let objective = if opts.shifted { problem.objective(&state.alpha, true) } else { state.objective };
    let diagnostics = Diagnostics {
        iterations,
        final_residual: state.residual,
        objective,
        converged,
        nonconvex_warning: nonconvex,
        best_effort: false,
        mode: mode_name(mode, true).into(),
    };
    (state.alpha, diagnostics)
}

/// Subgradient steps `η_t = η₀/√t` with best-iterate tracking. Converges
/// when the best objective improves by less than `tol` over
/// `STALL_WINDOW` iterations.
fn run_subgradient(problem: &Problem<'_>, start: State, opts: &SolverOptions, nonconvex: bool) -> (Vec<f64>, Diagnostics) {
    let eta0 = 1.0 / (2.0 * problem.lambda);
    let mut best = problem.state(start.alpha.clone());
    let mut current = start;
    let mut last_improvement_check = best.objective;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let eta = eta0 / (iterations as f64).sqrt();
        let alpha = current.alpha.iter().zip(&current.residual_dir).map(|(a, r)| a - eta * r).collect();
        current = problem.state(alpha);
        if current.objective < best.objective {
            best = problem.state(current.alpha.clone());
        }
        if iterations % STALL_WINDOW == 0 {
            if last_improvement_check - best.objective < opts.tol {
                converged = true;
                break;
            }
            last_improvement_check = best.objective;
        }
    }
    let objective = if opts.shifted { problem.objective(&best.alpha, true) } else { best.objective };
    let diagnostics = Diagnostics {
        iterations,
        final_residual: best.residual,
        objective,
        converged,
        nonconvex_warning: nonconvex,
        best_effort: true,
        mode: mode_name(SolverMode::GradientDescent, false).into(),
    };
    (best.alpha, diagnostics)
}

fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return input_err(format!("{} weights for {n} atoms", weights.len()));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return input_err("weights must be nonnegative and sum to one");
    }
    Ok(())
}

/// Fits on the weighted measure `Σ_i w_i δ_{(x_i, y_i)}`, starting from `alpha0`
/// (zero when `None`). Pair terms carry weight `w_i w_j`.
pub fn fit_weighted(
    loss: &PairwiseLoss,
    data: &Dataset,
    weights: Option<&[f64]>,
    kernel: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
    alpha0: Option<Vec<f64>>,
) -> Result<FittedModel> {
    check_lambda(lambda)?;
    loss.validate()?;
    opts.validate()?;
    let n = data.len();
    if let Some(w) = weights {
        check_weights(w, n)?;
    }
    let alpha0 = match alpha0 {
        Some(a) if a.len() != n => return input_err(format!("{} initial coefficients for {n} points", a.len())),
        Some(a) => a,
        None => vec![0.0; n],
    };
    if !kernel.is_bounded() {
        warn!("kernel is unbounded; a-priori sup-norm bounds do not apply");
    }
    let gram = gram_matrix(kernel, data.xs())?;
    let problem = Problem {
        loss: *loss,
        ys: data.ys(),
        weights: weights.map_or(Weights::Uniform, Weights::Explicit),
        gram: &gram,
        lambda,
    };
    let (alpha, diagnostics) = run(&problem, alpha0, opts);
    Ok(FittedModel {
        function: RkhsFunction { coefficients: alpha, anchors: data.xs().to_vec(), kernel: kernel.clone() },
        lambda,
        loss: *loss,
        diagnostics,
    })
}

/// Fits the regularized empirical pairwise risk from `α = 0`.
pub fn fit(loss: &PairwiseLoss, data: &Dataset, kernel: &KernelSpec, lambda: f64, opts: &SolverOptions) -> Result<FittedModel> {
    fit_weighted(loss, data, None, kernel, lambda, opts, None)
}

/// Same as [`fit`] but from explicit starting coefficients.
pub fn fit_from(
    loss: &PairwiseLoss,
    data: &Dataset,
    kernel: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
    alpha0: Vec<f64>,
) -> Result<FittedModel> {
    fit_weighted(loss, data, None, kernel, lambda, opts, Some(alpha0))
}

/// Exact minimizer for the squared pairwise loss: solves
/// `(I + c·C K) α = c·C y` with `c = 2/(nλ)` and centering `C = I − 11ᵀ/n`.
pub fn fit_ls_closed_form(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Result<FittedModel> {
    check_lambda(lambda)?;
    let n = data.len();
    let gram = gram_matrix(kernel, data.xs())?;
    let nf = n as f64;
    let c = 2.0 / (nf * lambda);
    let centering = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / nf);
    let ck = &centering * gram.matrix();
    let system = DMatrix::identity(n, n) + ck * c;
    let rhs = &centering * DVector::from_column_slice(data.ys()) * c;
    let alpha = match system.clone().lu().solve(&rhs) {
        Some(a) if a.iter().all(|v| v.is_finite()) => a,
        _ => {
            let jitter = 1e-10 * gram.matrix().trace() / nf;
            warn!("closed-form system is singular; solving in least squares with diagonal jitter {jitter:e}");
            let jittered = system + DMatrix::identity(n, n) * jitter;
            jittered
                .svd(true, true)
                .solve(&rhs, 1e-14)
                .map_err(|e| Error::Numeric(format!("closed-form solve failed: {e}")))?
        }
    };
    let alpha: Vec<f64> = alpha.iter().copied().collect();
    let loss = PairwiseLoss::Squared;
    let problem = Problem { loss, ys: data.ys(), weights: Weights::Uniform, gram: &gram, lambda };
    let state = problem.state(alpha);
    let diagnostics = Diagnostics {
        iterations: 0,
        final_residual: state.residual,
        objective: state.objective,
        converged: true,
        nonconvex_warning: false,
        best_effort: false,
        mode: "closed_form".into(),
    };
    Ok(FittedModel {
        function: RkhsFunction { coefficients: state.alpha, anchors: data.xs().to_vec(), kernel: kernel.clone() },
        lambda,
        loss,
        diagnostics,
    })
}

pub fn predict(model: &FittedModel, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.function.evaluate(xs)
}

/// Regularized objective of `model` on `data`, optionally under weights.
pub fn objective(model: &FittedModel, data: &Dataset, weights: Option<&[f64]>, shifted: bool) -> Result<f64> {
    let fvals = model.function.evaluate(data.xs())?;
    let w = weights.map_or(Weights::Uniform, Weights::Explicit);
    let risk = weighted_risk(&model.loss, data.ys(), w, &fvals, shifted, Parallelism::Sequential)?;
    Ok(risk + model.lambda * model.function.norm_sq()?)
}

/// H-seminorm `√(rᵀ G r)` of `r = g + 2λα`, for a model whose anchors are
/// the inputs of `data`.
pub fn stationarity_residual(model: &FittedModel, data: &Dataset) -> Result<f64> {
    stationarity_residual_weighted(model, data, None)
}

pub fn stationarity_residual_weighted(model: &FittedModel, data: &Dataset, weights: Option<&[f64]>) -> Result<f64> {
    if model.anchors() != data.xs() {
        return input_err("model anchors must be the dataset inputs");
    }
    if let Some(w) = weights {
        check_weights(w, data.len())?;
    }
    let gram = gram_matrix(model.kernel(), data.xs())?;
    let problem = Problem {
        loss: model.loss,
        ys: data.ys(),
        weights: weights.map_or(Weights::Uniform, Weights::Explicit),
        gram: &gram,
        lambda: model.lambda,
    };
    Ok(problem.state(model.alpha().to_vec()).residual)
}

/// A-priori norm bounds for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub h_norm: f64,
    /// `√(R_{L,D}(0)/λ)`
    pub h_norm_bound: f64,
    pub h_norm_ok: bool,
    /// `max_i |f(x_i)|` over the training inputs.
    pub sup_train: f64,
    /// `|L|₁‖k‖²_∞/λ`; `None` when the loss is not Lipschitz or the kernel is unbounded.
    pub sup_bound: Option<f64>,
    pub sup_ok: Option<bool>,
}

pub fn bound_checks(model: &FittedModel, data: &Dataset) -> Result<BoundChecks> {
    const SLACK: f64 = 1e-8;
    let h_norm = model.function.norm_sq()?.sqrt();
    let r0 = weighted_risk(&model.loss, data.ys(), Weights::Uniform, &vec![0.0; data.len()], false, Parallelism::Sequential)?;
    let h_norm_bound = (r0 / model.lambda).sqrt();
    let fvals = model.function.evaluate(data.xs())?;
    let sup_train = fvals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lip = model.loss.constants().lipschitz;
    let sup_bound = if lip.is_finite() && model.kernel().is_bounded() {
        let k = model.kernel().sup_norm();
        Some(lip * k * k / model.lambda)
    } else {
        log::debug!("sup-norm bound skipped: requires a Lipschitz loss and a bounded kernel");
        None
    };
    Ok(BoundChecks {
        h_norm,
        h_norm_bound,
        h_norm_ok: h_norm <= h_norm_bound + SLACK,
        sup_train,
        sup_bound,
        sup_ok: sup_bound.map(|b| sup_train <= b + SLACK),
    })
}

/// On-disk layout of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub kernel: KernelSpec,
    pub loss: PairwiseLoss,
    pub lambda: f64,
    pub alpha: Vec<f64>,
    pub anchors: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl From<&FittedModel> for ModelDocument {
    fn from(m: &FittedModel) -> Self {
        ModelDocument {
            kernel: m.function.kernel.clone(),
            loss: m.loss,
            lambda: m.lambda,
            alpha: m.function.coefficients.clone(),
            anchors: m.function.anchors.clone(),
            diagnostics: m.diagnostics.clone(),
        }
    }
}

impl TryFrom<ModelDocument> for FittedModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        check_lambda(doc.lambda)?;
        doc.loss.validate()?;
        doc.kernel.validate()?;
        Ok(FittedModel {
            function: RkhsFunction::new(doc.alpha, doc.anchors, doc.kernel)?,
            lambda: doc.lambda,
            loss: doc.loss,
            diagnostics: doc.diagnostics,
        })
    }
}
