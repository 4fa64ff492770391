//! Bounded kernels, Gram matrices and functions in representer form.
//!
//! A function in the RKHS of `k` is kept as a finite expansion
//! `f = Σ_b α_b k(·, x_b)` over a list of anchor points. All norms and inner
//! products are computed through the Gram matrix of those anchors, so nothing
//! here ever needs an explicit feature map.

use std::collections::HashMap;
use std::fmt;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Kernel family and its parameters.
///
/// The precomputed family treats each input point as a one-element vector
/// holding a row/column index into the supplied matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-‖x − x'‖₂² / γ)`
    GaussianRbf { gamma: f64 },
    /// `exp(-‖x − x'‖₁ / γ)`
    AbelRbf { gamma: f64 },
    /// `⟨x, x'⟩`, unbounded on ℝᵈ.
    Linear,
    Precomputed { matrix: Vec<Vec<f64>> },
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::GaussianRbf { gamma } => write!(f, "GaussianRbf(gamma={gamma})"),
            KernelSpec::AbelRbf { gamma } => write!(f, "AbelRbf(gamma={gamma})"),
            KernelSpec::Linear => write!(f, "Linear"),
            KernelSpec::Precomputed { matrix } => write!(f, "Precomputed({}x{})", matrix.len(), matrix.len()),
        }
    }
}

impl KernelSpec {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::GaussianRbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn abel(gamma: f64) -> Result<Self> {
        let spec = KernelSpec::AbelRbf { gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a precomputed kernel. The matrix must be square, finite and
    /// symmetric; a clearly indefinite matrix is accepted with a warning.
    pub fn precomputed(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let spec = KernelSpec::Precomputed { matrix };
        spec.validate()?;
        if let KernelSpec::Precomputed { matrix } = &spec {
            let n = matrix.len();
            let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
            let min_eig = SymmetricEigen::new(m).eigenvalues.min();
            if min_eig < -1e-6 {
                warn!("precomputed kernel matrix is not positive semi-definite (min eigenvalue {min_eig:e})");
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::GaussianRbf { gamma } | KernelSpec::AbelRbf { gamma } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return input_err(format!("kernel width gamma must be positive and finite, got {gamma}"));
                }
            }
            KernelSpec::Linear => {}
            KernelSpec::Precomputed { matrix } => {
                let n = matrix.len();
                if n == 0 {
                    return input_err("precomputed kernel matrix is empty");
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != n {
                        return input_err(format!(
                            "precomputed kernel matrix row {i} has {} entries, expected {n}",
                            row.len()
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return input_err(format!("precomputed kernel matrix row {i} has non-finite entries"));
                    }
                }
                for i in 0..n {
                    for j in 0..i {
                        if matrix[i][j] != matrix[j][i] {
                            return input_err(format!("precomputed kernel matrix is not symmetric at ({i}, {j})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// True for kernels with `sup_x k(x, x) < ∞` on their whole domain.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, KernelSpec::Linear)
    }

    /// `‖k‖_∞ = sup_x √k(x, x)`; `+∞` for the linear kernel.
    pub fn sup_norm(&self) -> f64 {
        match self {
            KernelSpec::GaussianRbf { .. } | KernelSpec::AbelRbf { .. } => 1.0,
            KernelSpec::Linear => f64::INFINITY,
            KernelSpec::Precomputed { matrix } => matrix
                .iter()
                .enumerate()
                .map(|(i, row)| row[i].max(0.0).sqrt())
                .fold(0.0, f64::max),
        }
    }

    /// Evaluates `k(x, x')`.
    pub fn eval(&self, x: &[f64], xp: &[f64]) -> Result<f64> {
        if x.len() != xp.len() {
            return input_err(format!("dimension mismatch: {} vs {}", x.len(), xp.len()));
        }
        match self {
            KernelSpec::Precomputed { matrix } => {
                let i = precomputed_index(x, matrix.len())?;
                let j = precomputed_index(xp, matrix.len())?;
                Ok(matrix[i][j])
            }
            _ => Ok(self.eval_unchecked(x, xp)),
        }
    }

    /// Evaluation without dimension checks, for callers that validated
    /// the point set once up front.
    fn eval_unchecked(&self, x: &[f64], xp: &[f64]) -> f64 {
        match self {
            KernelSpec::GaussianRbf { gamma } => {
                let d2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / gamma).exp()
            }
            KernelSpec::AbelRbf { gamma } => {
                let d1: f64 = x.iter().zip(xp).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / gamma).exp()
            }
            KernelSpec::Linear => x.iter().zip(xp).map(|(a, b)| a * b).sum(),
            KernelSpec::Precomputed { matrix } => matrix[x[0] as usize][xp[0] as usize],
        }
    }

    fn check_points(&self, points: &[Vec<f64>], dim: usize) -> Result<()> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return input_err(format!("point {i} has dimension {}, expected {dim}", p.len()));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return input_err(format!("point {i} has non-finite coordinates"));
            }
            if let KernelSpec::Precomputed { matrix } = self {
                precomputed_index(p, matrix.len())?;
            }
        }
        Ok(())
    }
}

fn precomputed_index(x: &[f64], n: usize) -> Result<usize> {
    match x {
        [v] if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < n => Ok(*v as usize),
        _ => input_err(format!(
            "precomputed kernel expects a single integer index in [0, {n}), got {x:?}"
        )),
    }
}

/// Symmetric matrix `K_ij = k(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return input_err("gram matrix must be square");
        }
        Ok(GramMatrix { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone()).eigenvalues.min()
    }

    /// `G v`
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.entries[(i, j)] * v[j]).sum();
        }
        out
    }

    /// `uᵀ G v` with a fixed summation order.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let gv = self.apply(v);
        u.iter().zip(&gv).map(|(a, b)| a * b).sum()
    }

    /// `√max(0, vᵀ G v)`, the H-(semi)norm of a coefficient vector.
    pub fn seminorm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }
}

/// Assembles the Gram matrix of `points`. Each unordered pair is evaluated
/// once and mirrored, so the result is exactly symmetric.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<GramMatrix> {
    if points.is_empty() {
        return input_err("gram matrix needs at least one point");
    }
    spec.validate()?;
    spec.check_points(points, points[0].len())?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval_unchecked(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries: k })
}

/// Rectangular matrix `C_ab = k(xs_a, anchors_b)`.
pub fn cross_gram(spec: &KernelSpec, xs: &[Vec<f64>], anchors: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = match (xs.first(), anchors.first()) {
        (Some(x), _) => x.len(),
        (None, Some(a)) => a.len(),
        (None, None) => return Ok(DMatrix::zeros(0, 0)),
    };
    spec.check_points(xs, dim)?;
    spec.check_points(anchors, dim)?;
    Ok(DMatrix::from_fn(xs.len(), anchors.len(), |a, b| {
        spec.eval_unchecked(&xs[a], &anchors[b])
    }))
}

/// `f(·) = Σ_b α_b k(·, x_b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RkhsFunction {
    pub coefficients: Vec<f64>,
    pub anchors: Vec<Vec<f64>>,
    pub kernel: KernelSpec,
}

impl RkhsFunction {
    pub fn new(coefficients: Vec<f64>, anchors: Vec<Vec<f64>>, kernel: KernelSpec) -> Result<Self> {
        if coefficients.len() != anchors.len() {
            return input_err(format!(
                "{} coefficients for {} anchors",
                coefficients.len(),
                anchors.len()
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return input_err("non-finite coefficient");
        }
        if let Some(first) = anchors.first() {
            kernel.check_points(&anchors, first.len())?;
        }
        Ok(RkhsFunction { coefficients, anchors, kernel })
    }

    pub fn zero(anchors: Vec<Vec<f64>>, kernel: KernelSpec) -> Self {
        RkhsFunction { coefficients: vec![0.0; anchors.len()], anchors, kernel }
    }

    pub fn dim(&self) -> Option<usize> {
        self.anchors.first().map(Vec::len)
    }

    /// `f(x)` for each `x` in `xs`.
    pub fn evaluate(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(d) = self.dim() {
            self.kernel.check_points(xs, d)?;
        } else {
            return Ok(vec![0.0; xs.len()]);
        }
        Ok(xs
            .iter()
            .map(|x| {
                self.anchors
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(anchor, c)| c * self.kernel.eval_unchecked(x, anchor))
                    .sum()
            })
            .collect())
    }

    /// `‖f‖²_H` using a freshly assembled Gram matrix of the anchors.
    pub fn norm_sq(&self) -> Result<f64> {
        if self.anchors.is_empty() {
            return Ok(0.0);
        }
        let gram = gram_matrix(&self.kernel, &self.anchors)?;
        h_norm_sq(self, &gram)
    }
}

/// `αᵀ G α` for a function whose anchors generated `gram`.
///
/// Round-off can push the quadratic form slightly below zero; negative values
/// are clamped to zero and logged.
pub fn h_norm_sq(f: &RkhsFunction, gram: &GramMatrix) -> Result<f64> {
    if gram.len() != f.coefficients.len() {
        return input_err(format!(
            "gram matrix of size {} for {} coefficients",
            gram.len(),
            f.coefficients.len()
        ));
    }
    Ok(clamped_quadratic_form(gram, &f.coefficients))
}

pub(crate) fn clamped_quadratic_form(gram: &GramMatrix, alpha: &[f64]) -> f64 {
    let q = gram.inner(alpha, alpha);
    if q < 0.0 {
        let alpha_sq: f64 = alpha.iter().map(|a| a * a).sum();
        let scale = 1e-12 * alpha_sq * gram.max_abs();
        if -q > scale {
            warn!("quadratic form αᵀGα = {q:e} is negative beyond round-off; kernel matrix may be indefinite");
        } else {
            warn!("clamping round-off negative αᵀGα = {q:e} to zero");
        }
        return 0.0;
    }
    q
}

/// Anchor list with exact-duplicate detection: a point is only added once,
/// keyed by the bit patterns of its coordinates.
#[derive(Debug, Clone, Default)]
pub struct AnchorSet {
    points: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
}

impl AnchorSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `x`, inserting it if it is new.
    pub fn insert(&mut self, x: &[f64]) -> usize {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.points.push(x.to_vec());
        self.index.insert(key, self.points.len() - 1);
        self.points.len() - 1
    }

    /// Appends `x` without merging, keeping the first index as the lookup target.
    pub fn push(&mut self, x: &[f64]) -> usize {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        self.points.push(x.to_vec());
        let i = self.points.len() - 1;
        self.index.entry(key).or_insert(i);
        i
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }
}

/// `Σ_k c_k f_k` over a merged anchor list. All functions must share a kernel.
pub fn linear_combination(terms: &[(f64, &RkhsFunction)]) -> Result<RkhsFunction> {
    let kernel = match terms.first() {
        Some((_, f)) => f.kernel.clone(),
        None => return input_err("empty linear combination"),
    };
    let mut anchors = AnchorSet::new();
    let mut coefficients = Vec::new();
    for (c, f) in terms {
        if f.kernel != kernel {
            return input_err("functions use different kernels");
        }
        for (x, a) in f.anchors.iter().zip(&f.coefficients) {
            let i = anchors.insert(x);
            if i == coefficients.len() {
                coefficients.push(0.0);
            }
            coefficients[i] += c * a;
        }
    }
    RkhsFunction::new(coefficients, anchors.into_points(), kernel)
}

/// `‖f − g‖_H` for two functions with the same kernel.
pub fn distance(f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
    let diff = linear_combination(&[(1.0, f), (-1.0, g)])?;
    diff.norm_sq().map(f64::sqrt)
}
