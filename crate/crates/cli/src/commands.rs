use std::path::Path;

use pairwise_rkhs::kernels::gram_matrix;
use pairwise_rkhs::risk::{empirical_risk, risk_gradient_coeffs};
use pairwise_rkhs::robustness::{
    bootstrap_distribution, default_contamination_grid, influence_function, maxbias_probe_from, sensitivity_curve,
    BootstrapOptions, Resampling, ScTarget,
};
use pairwise_rkhs::solver::{bound_checks, fit_ls_closed_form, BoundChecks, Diagnostics, ModelDocument};
use pairwise_rkhs::{fit, Dataset, FittedModel, PairwiseLoss, SolverOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{input, CliError, CliResult};
use crate::io::{emit, parse_point, predictions_csv, read_table, to_json};

pub const EXIT_OK: u8 = 0;
pub const EXIT_UNCONVERGED: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

pub fn load_model(path: &Path) -> CliResult<FittedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: ModelDocument =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: invalid model: {e}", path.display())))?;
    Ok(FittedModel::try_from(doc)?)
}

pub fn model_json(model: &FittedModel) -> CliResult<String> {
    to_json(&ModelDocument::from(model))
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    loss: &'a PairwiseLoss,
    lambda: f64,
    n: usize,
    diagnostics: &'a Diagnostics,
    residual: f64,
    bounds: BoundChecks,
}

pub fn fit_model(config: &RunConfig, data: &Dataset, oracle: bool) -> CliResult<FittedModel> {
    if oracle {
        if config.loss != PairwiseLoss::Squared {
            return input(format!("--oracle needs the squared loss, config has {}", config.loss.name()));
        }
        return Ok(fit_ls_closed_form(data, &config.kernel, config.lambda)?);
    }
    Ok(fit(&config.loss, data, &config.kernel, config.lambda, &config.solver)?)
}

pub fn cmd_fit(config: &RunConfig, data: &Dataset, out: &Path, oracle: bool) -> CliResult<u8> {
    let model = fit_model(config, data, oracle)?;
    let report = FitReport {
        loss: &model.loss,
        lambda: model.lambda,
        n: data.len(),
        diagnostics: &model.diagnostics,
        residual: model.diagnostics.final_residual,
        bounds: bound_checks(&model, data)?,
    };
    emit(Some(out), "model.json", &model_json(&model)?)?;
    let report = to_json(&report)?;
    emit(Some(out), "fit_report.json", &report)?;
    emit(None, "", &report)?;
    if model.diagnostics.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("solver did not converge (residual {:e})", model.diagnostics.final_residual);
        Ok(EXIT_UNCONVERGED)
    }
}

pub fn cmd_predict(model: &FittedModel, inputs: &Path, out: Option<&Path>) -> CliResult<u8> {
    let table = read_table(inputs)?;
    let predictions = if table.xs.is_empty() {
        Vec::new()
    } else {
        let d = model.function.dim().unwrap_or(0);
        if table.xs[0].len() != d {
            return input(format!("inputs have {} columns, model expects {d}", table.xs[0].len()));
        }
        model.predict(&table.xs)?
    };
    emit(out, "predictions.csv", &predictions_csv(&predictions))?;
    Ok(EXIT_OK)
}

pub fn cmd_influence(model: &FittedModel, data: &Dataset, point: &str, out: Option<&Path>) -> CliResult<u8> {
    let (x0, y0) = parse_point(point)?;
    let result = influence_function(model, data, &x0, y0)?;
    emit(out, "influence.json", &to_json(&result)?)?;
    Ok(if result.bound_2lambda_check { EXIT_OK } else { EXIT_INVARIANT })
}

pub fn cmd_sc(config: &RunConfig, data: &Dataset, point: &str, target: ScTarget, out: Option<&Path>) -> CliResult<u8> {
    let (x0, y0) = parse_point(point)?;
    let report =
        sensitivity_curve(data, &x0, y0, &config.loss, &config.kernel, config.lambda, target, &config.solver)?;
    emit(out, "sc.json", &to_json(&report)?)?;
    Ok(if report.holds == Some(false) { EXIT_INVARIANT } else { EXIT_OK })
}

pub fn cmd_maxbias(
    config: &RunConfig,
    data: &Dataset,
    eps: &[f64],
    grid: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<u8> {
    config.loss.require_bounded()?;
    let grid = match grid {
        Some(path) => {
            let table = read_table(path)?;
            let Some(ys) = table.ys else {
                return input(format!("{}: contamination grid needs a y column", path.display()));
            };
            table.xs.into_iter().zip(ys).collect()
        }
        None => default_contamination_grid(data),
    };
    let base = fit(&config.loss, data, &config.kernel, config.lambda, &config.solver)?;
    let reports = eps
        .iter()
        .map(|&e| maxbias_probe_from(&base, data, e, Some(&grid), &config.solver))
        .collect::<Result<Vec<_>, _>>()?;
    emit(out, "maxbias.json", &to_json(&reports)?)?;
    match reports.iter().find(|r| !r.holds) {
        Some(r) => {
            eprintln!("maxbias bound violated at eps = {}: {} > {}", r.epsilon, r.worst_delta, r.bound);
            Ok(EXIT_INVARIANT)
        }
        None => Ok(EXIT_OK),
    }
}

pub fn cmd_bootstrap(
    config: &RunConfig,
    data: &Dataset,
    replicates: usize,
    probes: Option<&Path>,
    identity: bool,
    out: Option<&Path>,
) -> CliResult<u8> {
    let probes = match probes {
        Some(path) => read_table(path)?.xs,
        None => Vec::new(),
    };
    if let Some(p) = probes.first() {
        if p.len() != data.dim() {
            return input(format!("probes have {} columns, data has {}", p.len(), data.dim()));
        }
    }
    let mut boot = BootstrapOptions::new(replicates, config.seed);
    if identity {
        boot.resampling = Resampling::Identity;
    }
    let report = bootstrap_distribution(data, &config.loss, &config.kernel, config.lambda, &probes, &boot, &config.solver)?;
    emit(out, "bootstrap.json", &to_json(&report)?)?;
    Ok(if report.unconverged > 0 { EXIT_UNCONVERGED } else { EXIT_OK })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn outcome(name: &'static str, ok: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn skipped(name: &'static str, detail: &str) -> CheckOutcome {
    CheckOutcome { name, status: Status::Skipped, detail: detail.into() }
}

/// Faults the check suite can be asked to plant, to exercise failure reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Understates the loss's derivative bound a thousandfold.
    LossConstant,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "loss-constant" => Ok(Fault::LossConstant),
            other => Err(format!("unknown fault {other:?}")),
        }
    }
}

fn seeded_values(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn run_checks(config: &RunConfig, data: &Dataset, fault: Option<Fault>) -> CliResult<Vec<CheckOutcome>> {
    let loss = config.loss;
    let lambda = config.lambda;
    let n = data.len();
    let mut constants = loss.constants();
    if fault == Some(Fault::LossConstant) {
        constants.grad_bound *= 1e-3;
    }
    let mut out = Vec::new();

    let gram = gram_matrix(&config.kernel, data.xs())?;
    let symmetric = (0..n).all(|i| (0..n).all(|j| gram.get(i, j) == gram.get(j, i)));
    let min_eig = gram.min_eigenvalue();
    out.push(outcome(
        "gram_symmetric_psd",
        symmetric && min_eig >= -1e-8 * gram.max_abs().max(1.0),
        format!("symmetric: {symmetric}, min eigenvalue {min_eig:e}"),
    ));

    let alpha: Vec<f64> = seeded_values(config.seed, n).iter().map(|v| 0.5 * v).collect();
    if constants.differentiable {
        let objective = |a: &[f64]| -> CliResult<f64> {
            let f = gram.apply(a);
            Ok(empirical_risk(&loss, data, &f)? + lambda * gram.inner(a, a))
        };
        let grad = risk_gradient_coeffs(&loss, data, &gram, &alpha, lambda)?;
        let analytic = gram.apply(&grad.residual_dir);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for m in 0..n {
            let mut up = alpha.clone();
            let mut down = alpha.clone();
            up[m] += h;
            down[m] -= h;
            let numeric = (objective(&up)? - objective(&down)?) / (2.0 * h);
            worst = worst.max((numeric - analytic[m]).abs() / analytic[m].abs().max(1.0));
        }
        out.push(outcome("gradient_finite_difference", worst <= 1e-5, format!("max relative error {worst:e}")));
    } else {
        out.push(skipped("gradient_finite_difference", "loss is not differentiable"));
    }

    let model = fit(&loss, data, &config.kernel, lambda, &config.solver)?;
    let fvals = model.predict(data.xs())?;
    let ys = data.ys();

    if constants.twice_differentiable && constants.convex {
        let mut min_eig = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let m = loss.hessian(ys[i], ys[j], fvals[i], fvals[j])?;
                let tr = m[0][0] + m[1][1];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                min_eig = min_eig.min(0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()));
            }
        }
        out.push(outcome("hessian_psd", min_eig >= -1e-12, format!("min pair eigenvalue {min_eig:e}")));
    } else {
        out.push(skipped("hessian_psd", "loss is not convex and twice differentiable"));
    }

    if constants.grad_bound.is_finite() {
        let mut worst: f64 = 0.0;
        let spread = seeded_values(config.seed ^ 0x5eed, 2 * n);
        for i in 0..n {
            for j in 0..n {
                // at the fit and at points pushed far into the tails
                for (t, tt) in [(fvals[i], fvals[j]), (fvals[i] + 50.0 * spread[i], fvals[j] + 50.0 * spread[n + j])] {
                    let (d5, d6) = loss.grad(ys[i], ys[j], t, tt);
                    worst = worst.max(d5.abs()).max(d6.abs());
                }
            }
        }
        out.push(outcome(
            "derivative_bound",
            worst <= constants.grad_bound * (1.0 + 1e-12),
            format!("max |D5|, |D6| = {worst:e}, declared bound {:e}", constants.grad_bound),
        ));
    } else {
        out.push(skipped("derivative_bound", "loss is not Lipschitz"));
    }

    if model.diagnostics.best_effort {
        out.push(skipped("representer_residual", "subgradient fit; stationarity is not defined"));
    } else {
        out.push(outcome(
            "representer_residual",
            model.diagnostics.converged && model.diagnostics.final_residual <= config.solver.tol,
            format!("residual {:e} after {} iterations", model.diagnostics.final_residual, model.diagnostics.iterations),
        ));
    }

    let bounds = bound_checks(&model, data)?;
    out.push(outcome(
        "h_norm_bound",
        bounds.h_norm_ok,
        format!("{:e} <= {:e}", bounds.h_norm, bounds.h_norm_bound),
    ));
    match (bounds.sup_bound, bounds.sup_ok) {
        (Some(b), Some(ok)) => out.push(outcome("sup_norm_bound", ok, format!("{:e} <= {b:e}", bounds.sup_train))),
        _ => out.push(skipped("sup_norm_bound", "needs a Lipschitz loss and a bounded kernel")),
    }

    let shifted_opts = SolverOptions { shifted: true, ..config.solver.clone() };
    let shifted = fit(&loss, data, &config.kernel, lambda, &shifted_opts)?;
    let gap = model.alpha().iter().zip(shifted.alpha()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    out.push(outcome("shifted_loss_equivalence", gap <= 1e-12, format!("max coefficient gap {gap:e}")));
    Ok(out)
}

pub fn cmd_check(config: &RunConfig, data: &Dataset, fault: Option<Fault>, out: Option<&Path>) -> CliResult<u8> {
    let outcomes = run_checks(config, data, fault)?;
    emit(out, "check.json", &to_json(&outcomes)?)?;
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.status == Status::Fail).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failed invariants: {}", failed.join(", "));
        Ok(EXIT_INVARIANT)
    }
}
