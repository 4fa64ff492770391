//! Gâteaux derivatives of the estimator map `P ↦ f_{L⋆,P,λ}`.
//!
//! For an empirical `P` and a discrete direction `Q` everything lives in the
//! span of the feature maps of the merged atom set `{x_i} ∪ {atoms of Q}`.
//! Elements of that span are coefficient vectors `β`; `M(P)` acts on them as
//! the matrix `2λI + Ā G_E`, where `Ā` is the pair Hessian in function-value
//! space scattered onto the extended basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};
use crate::kernels::{gram_matrix, AnchorSet, GramMatrix, RkhsFunction};
use crate::risk::{weighted_value_hessian, Dataset, Weights};
use crate::solver::FittedModel;

use super::measure::DiscreteMeasure;

/// Relative tolerance on `‖M(IF) + T‖_H`.
pub const OPERATOR_TOL: f64 = 1e-6;
const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    /// `S′_G(P)(Q) = −M(P)⁻¹ T(Q; P)`.
    pub direction: RkhsFunction,
    pub h_norm: f64,
    /// `‖M(IF) + T‖_H`
    pub operator_residual: f64,
    /// `T(Q; P)` over the same anchors.
    pub t: RkhsFunction,
    pub t_norm: f64,
    /// `h_norm ≤ ‖T‖_H/(2λ)`
    pub bound_2lambda_check: bool,
}

/// `M(P)` on the extended span, in coefficient form.
#[derive(Debug, Clone)]
pub struct HessianOperator {
    anchors: Vec<Vec<f64>>,
    gram: GramMatrix,
    a_bar: DMatrix<f64>,
    lambda: f64,
}

impl HessianOperator {
    pub fn dim(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// `2λI + Ā G_E`
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        &self.a_bar * self.gram.matrix() + DMatrix::identity(n, n) * (2.0 * self.lambda)
    }

    /// Coefficients of `M h` for `h = Σ β_e Φ(x_e)`.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let hv = DVector::from_vec(self.gram.apply(beta));
        let ah = &self.a_bar * hv;
        beta.iter().zip(ah.iter()).map(|(b, a)| 2.0 * self.lambda * b + a).collect()
    }

    /// `⟨u, v⟩_H` for coefficient vectors on the extended anchors.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.gram.inner(u, v)
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.gram.seminorm(v)
    }
}

struct Atom {
    idx: usize,
    y: f64,
    f: f64,
    w: f64,
}

/// Extended basis with the atoms of `P` (uniform over `data`) and `Q`.
struct Extended {
    anchors: Vec<Vec<f64>>,
    p: Vec<Atom>,
    q: Vec<Atom>,
}

fn check_admissible(model: &FittedModel, data: &Dataset) -> Result<()> {
    model.loss.require_smooth_lipschitz()?;
    if !model.kernel().is_bounded() {
        return Err(Error::Unsupported("influence functions require a bounded kernel".into()));
    }
    if model.anchors() != data.xs() {
        return input_err("model anchors must be the dataset inputs");
    }
    if !model.diagnostics.converged {
        return input_err("model did not converge; its Gâteaux derivative is not defined");
    }
    Ok(())
}

fn extend(model: &FittedModel, data: &Dataset, q: &DiscreteMeasure) -> Result<Extended> {
    if q.xs()[0].len() != data.dim() {
        return input_err(format!("direction atoms have dimension {}, data has {}", q.xs()[0].len(), data.dim()));
    }
    let mut set = AnchorSet::new();
    let p_idx: Vec<usize> = data.xs().iter().map(|x| set.insert(x)).collect();
    let q_idx: Vec<usize> = q.xs().iter().map(|x| set.insert(x)).collect();
    let anchors = set.into_points();
    let fvals = model.function.evaluate(&anchors)?;
    let wp = 1.0 / data.len() as f64;
    let p = p_idx
        .iter()
        .zip(data.ys())
        .map(|(&idx, &y)| Atom { idx, y, f: fvals[idx], w: wp })
        .collect();
    let q = q_idx
        .iter()
        .zip(q.ys())
        .zip(q.weights())
        .map(|((&idx, &y), &w)| Atom { idx, y, f: fvals[idx], w })
        .collect();
    Ok(Extended { anchors, p, q })
}

/// Coefficients of `E_{a⊗b}[D₅L·Φ(X) + D₆L·Φ(X̃)]`.
fn pair_expectation(model: &FittedModel, a: &[Atom], b: &[Atom], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for u in a {
        for v in b {
            let w = u.w * v.w;
            if w == 0.0 {
                continue;
            }
            let (d5, d6) = model.loss.grad(u.y, v.y, u.f, v.f);
            out[u.idx] += w * d5;
            out[v.idx] += w * d6;
        }
    }
    out
}

fn operator(model: &FittedModel, data: &Dataset, ext: &Extended) -> Result<HessianOperator> {
    let gram = gram_matrix(model.kernel(), &ext.anchors)?;
    let fvals: Vec<f64> = ext.p.iter().map(|a| a.f).collect();
    let a = weighted_value_hessian(&model.loss, data.ys(), Weights::Uniform, &fvals)?;
    let m = ext.anchors.len();
    let mut a_bar = DMatrix::zeros(m, m);
    for (i, pi) in ext.p.iter().enumerate() {
        for (j, pj) in ext.p.iter().enumerate() {
            a_bar[(pi.idx, pj.idx)] += a[(i, j)];
        }
    }
    Ok(HessianOperator { anchors: ext.anchors.clone(), gram, a_bar, lambda: model.lambda })
}

/// `M(P)` on the span of the training inputs and the atoms of `q`.
pub fn hessian_operator(model: &FittedModel, data: &Dataset, q: &DiscreteMeasure) -> Result<HessianOperator> {
    check_admissible(model, data)?;
    let ext = extend(model, data, q)?;
    operator(model, data, &ext)
}

fn solve(op: &HessianOperator, t: &[f64]) -> Vec<f64> {
    let m = op.matrix();
    let rhs = -DVector::from_column_slice(t);
    let residual = |beta: &[f64]| {
        let r: Vec<f64> = op.apply(beta).iter().zip(t).map(|(a, b)| a + b).collect();
        op.norm(&r)
    };
    let t_norm = op.norm(t);
    if let Some(beta) = m.clone().lu().solve(&rhs) {
        let beta: Vec<f64> = beta.iter().copied().collect();
        if beta.iter().all(|v| v.is_finite()) && residual(&beta) <= OPERATOR_TOL * t_norm.max(1.0) {
            return beta;
        }
    }
    let jitter = 1e-10 * 2.0 * op.lambda;
    log::warn!("influence system is ill-conditioned; least-squares solve with jitter {jitter:e}");
    let n = op.dim();
    let jittered = m + DMatrix::identity(n, n) * jitter;
    match jittered.svd(true, true).solve(&rhs, 1e-14) {
        Ok(beta) => beta.iter().copied().collect(),
        Err(_) => vec![f64::NAN; n],
    }
}

/// Gâteaux derivative of the estimator at the empirical measure of `data`
/// in the direction of `q`.
///
/// `model` must be the converged fit on `data`. Errors with
/// [`Error::Unsupported`] for losses without bounded first and second
/// derivatives or unbounded kernels, and with [`Error::Numeric`] when the
/// operator equation cannot be solved to tolerance.
pub fn gateaux_derivative(model: &FittedModel, data: &Dataset, q: &DiscreteMeasure) -> Result<InfluenceResult> {
    check_admissible(model, data)?;
    let ext = extend(model, data, q)?;
    let dim = ext.anchors.len();
    // −2·E_{P⊗P} + E_{P⊗Q} + E_{Q⊗P}; the three sums share one loop so that
    // Q = P cancels exactly
    let pp = pair_expectation(model, &ext.p, &ext.p, dim);
    let pq = pair_expectation(model, &ext.p, &ext.q, dim);
    let qp = pair_expectation(model, &ext.q, &ext.p, dim);
    let t: Vec<f64> = (0..dim).map(|e| -2.0 * pp[e] + pq[e] + qp[e]).collect();

    let op = operator(model, data, &ext)?;
    let t_norm = op.norm(&t);
    let beta = solve(&op, &t);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("influence system could not be solved".into()));
    }
    let r: Vec<f64> = op.apply(&beta).iter().zip(&t).map(|(a, b)| a + b).collect();
    let operator_residual = op.norm(&r);
    if operator_residual > OPERATOR_TOL * t_norm.max(1.0) {
        return Err(Error::Numeric(format!(
            "operator residual {operator_residual:e} exceeds {:e}",
            OPERATOR_TOL * t_norm.max(1.0)
        )));
    }
    let h_norm = op.norm(&beta);
    let kernel = model.kernel().clone();
    Ok(InfluenceResult {
        direction: RkhsFunction::new(beta, ext.anchors.clone(), kernel.clone())?,
        h_norm,
        operator_residual,
        t: RkhsFunction::new(t, ext.anchors, kernel)?,
        t_norm,
        bound_2lambda_check: h_norm <= t_norm / (2.0 * model.lambda) + BOUND_SLACK,
    })
}

/// Influence function at `(x0, y0)`: the Gâteaux derivative towards `δ_{(x0, y0)}`.
pub fn influence_function(model: &FittedModel, data: &Dataset, x0: &[f64], y0: f64) -> Result<InfluenceResult> {
    gateaux_derivative(model, data, &DiscreteMeasure::point_mass(x0.to_vec(), y0)?)
}
