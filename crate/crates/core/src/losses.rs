//! Pairwise loss functions `L(x, y, x̃, ỹ, t, t̃)`.
//!
//! Every family implemented here depends on the inputs `x, x̃` only through
//! the responses and predictions, so the methods take `(y, ỹ, t, t̃)`.
//! Two shapes occur:
//!
//! * distance-based losses `ρ(u)` with `u = (y − t) − (ỹ − t̃)`;
//! * ranking losses `φ(v)` with `v = |y − ỹ| − (t − t̃)·sign(y − ỹ)` and `sign(0) = 0`.
//!
//! In both cases the argument is affine in `(t, t̃)` with slope `(−σ, +σ)`
//! (`σ = 1` for distance losses, `σ = sign(y − ỹ)` for ranking losses), which
//! gives the derivatives below by the chain rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Error, Result};

const INV_SQRT_E: f64 = 0.606_530_659_712_633_4;

/// A pairwise loss family with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairwiseLoss {
    /// Minimum error entropy loss `1 − exp(−u² / (2h²))`.
    Mee { h: f64 },
    /// `|u|`
    Absolute,
    /// Smoothed absolute loss `u − 2a·log(2Λ(u/a))`.
    LogisticPairwise { a: f64 },
    /// `u²`
    Squared,
    /// `max(0, v)`
    HingeRanking,
    /// `v²`
    LsRanking,
    /// `ρ_a(v)`
    LogisticRanking { a: f64 },
}

/// Constants consumed by the a-priori bounds and robustness diagnostics.
/// Unbounded quantities are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    /// Separate Lipschitz constant `|L|₁`.
    pub lipschitz: f64,
    /// `c_{L,1} ≥ sup |D_i L|`.
    pub grad_bound: f64,
    /// `c_{L,2} ≥ sup |D_i D_j L|`.
    pub hess_bound: f64,
    /// `c ≥ sup L`.
    pub value_bound: f64,
    pub convex: bool,
    pub differentiable: bool,
    pub twice_differentiable: bool,
}

/// One-dimensional profile applied to the pair argument.
#[derive(Debug, Clone, Copy)]
enum Profile {
    Mee { h: f64 },
    Abs,
    Logistic { a: f64 },
    Square,
    Hinge,
}

/// Logistic cdf `Λ(r) = 1 / (1 + e^{−r})`.
pub fn logistic_cdf(r: f64) -> f64 {
    if r >= 0.0 {
        1.0 / (1.0 + (-r).exp())
    } else {
        let e = r.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Profile {
    fn value(self, s: f64) -> f64 {
        match self {
            Profile::Mee { h } => -(-s * s / (2.0 * h * h)).exp_m1(),
            Profile::Abs => s.abs(),
            // u − 2a·log(2Λ(u/a)) = u − 2a·ln2 + 2a·softplus(−u/a)
            Profile::Logistic { a } => {
                let v = s - 2.0 * a * std::f64::consts::LN_2 + 2.0 * a * softplus(-s / a);
                v.max(0.0)
            }
            Profile::Square => s * s,
            Profile::Hinge => s.max(0.0),
        }
    }

    fn d1(self, s: f64) -> f64 {
        match self {
            Profile::Mee { h } => s / (h * h) * (-s * s / (2.0 * h * h)).exp(),
            Profile::Abs => {
                if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Profile::Logistic { a } => 2.0 * logistic_cdf(s / a) - 1.0,
            Profile::Square => 2.0 * s,
            Profile::Hinge => {
                if s > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn d2(self, s: f64) -> Option<f64> {
        match self {
            Profile::Mee { h } => {
                let h2 = h * h;
                Some((1.0 - s * s / h2) / h2 * (-s * s / (2.0 * h2)).exp())
            }
            Profile::Logistic { a } => {
                let l = logistic_cdf(s / a);
                Some(2.0 / a * l * (1.0 - l))
            }
            Profile::Square => Some(2.0),
            Profile::Abs | Profile::Hinge => None,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl PairwiseLoss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PairwiseLoss::Mee { h } if !(h.is_finite() && h > 0.0) => {
                input_err(format!("mee bandwidth h must be positive and finite, got {h}"))
            }
            PairwiseLoss::LogisticPairwise { a } | PairwiseLoss::LogisticRanking { a }
                if !(a.is_finite() && a > 0.0) =>
            {
                input_err(format!("logistic smoothing a must be positive and finite, got {a}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PairwiseLoss::Mee { .. } => "mee",
            PairwiseLoss::Absolute => "absolute",
            PairwiseLoss::LogisticPairwise { .. } => "logistic_pairwise",
            PairwiseLoss::Squared => "squared",
            PairwiseLoss::HingeRanking => "hinge_ranking",
            PairwiseLoss::LsRanking => "ls_ranking",
            PairwiseLoss::LogisticRanking { .. } => "logistic_ranking",
        }
    }

    pub fn is_ranking(&self) -> bool {
        matches!(
            self,
            PairwiseLoss::HingeRanking | PairwiseLoss::LsRanking | PairwiseLoss::LogisticRanking { .. }
        )
    }

    fn profile(&self) -> Profile {
        match *self {
            PairwiseLoss::Mee { h } => Profile::Mee { h },
            PairwiseLoss::Absolute => Profile::Abs,
            PairwiseLoss::LogisticPairwise { a } | PairwiseLoss::LogisticRanking { a } => Profile::Logistic { a },
            PairwiseLoss::Squared | PairwiseLoss::LsRanking => Profile::Square,
            PairwiseLoss::HingeRanking => Profile::Hinge,
        }
    }

    /// Pair argument and the slope `σ` with `∂arg/∂t = −σ`, `∂arg/∂t̃ = σ`.
    #[inline]
    fn argument(&self, y: f64, yt: f64, t: f64, tt: f64) -> (f64, f64) {
        if self.is_ranking() {
            let s = sign(y - yt);
            ((y - yt).abs() - (t - tt) * s, s)
        } else {
            ((y - t) - (yt - tt), 1.0)
        }
    }

    /// `L(·, y, ·, ỹ, t, t̃)` without input validation.
    #[inline]
    pub fn value(&self, y: f64, yt: f64, t: f64, tt: f64) -> f64 {
        let (arg, _) = self.argument(y, yt, t, tt);
        self.profile().value(arg)
    }

    /// Checked loss value; rejects non-finite arguments and invalid parameters.
    pub fn try_value(&self, y: f64, yt: f64, t: f64, tt: f64) -> Result<f64> {
        self.validate()?;
        if ![y, yt, t, tt].iter().all(|v| v.is_finite()) {
            return input_err("loss arguments must be finite");
        }
        Ok(self.value(y, yt, t, tt))
    }

    /// Shifted loss `L⋆ = L(…, t, t̃) − L(…, 0, 0)`.
    #[inline]
    pub fn shifted_value(&self, y: f64, yt: f64, t: f64, tt: f64) -> f64 {
        self.value(y, yt, t, tt) - self.value(y, yt, 0.0, 0.0)
    }

    pub fn try_shifted_value(&self, y: f64, yt: f64, t: f64, tt: f64) -> Result<f64> {
        Ok(self.try_value(y, yt, t, tt)? - self.value(y, yt, 0.0, 0.0))
    }

    /// `(D₅L, D₆L) = (∂L/∂t, ∂L/∂t̃)`. At kinks the zero subgradient is used.
    /// These are also the derivatives of the shifted loss.
    #[inline]
    pub fn grad(&self, y: f64, yt: f64, t: f64, tt: f64) -> (f64, f64) {
        let (arg, sigma) = self.argument(y, yt, t, tt);
        let d = sigma * self.profile().d1(arg);
        (-d, d)
    }

    /// Second partials `[[D₅D₅, D₅D₆], [D₆D₅, D₆D₆]]`.
    pub fn hessian(&self, y: f64, yt: f64, t: f64, tt: f64) -> Result<[[f64; 2]; 2]> {
        let (arg, sigma) = self.argument(y, yt, t, tt);
        match self.profile().d2(arg) {
            Some(d2) => {
                let c = sigma * sigma * d2;
                Ok([[c, -c], [-c, c]])
            }
            None => Err(Error::Unsupported(format!(
                "{} loss is not twice differentiable",
                self.name()
            ))),
        }
    }

    /// Diagonal Hessian coefficient `h` with Hessian `h·[[1,−1],[−1,1]]`;
    /// avoids building the matrix in hot loops.
    #[inline]
    pub(crate) fn hessian_scale(&self, y: f64, yt: f64, t: f64, tt: f64) -> Option<f64> {
        let (arg, sigma) = self.argument(y, yt, t, tt);
        self.profile().d2(arg).map(|d2| sigma * sigma * d2)
    }

    pub fn constants(&self) -> LossConstants {
        let inf = f64::INFINITY;
        match *self {
            PairwiseLoss::Mee { h } => LossConstants {
                lipschitz: INV_SQRT_E / h,
                grad_bound: INV_SQRT_E / h,
                hess_bound: 1.0 / (h * h),
                value_bound: 1.0,
                convex: false,
                differentiable: true,
                twice_differentiable: true,
            },
            PairwiseLoss::Absolute | PairwiseLoss::HingeRanking => LossConstants {
                lipschitz: 1.0,
                grad_bound: 1.0,
                hess_bound: inf,
                value_bound: inf,
                convex: true,
                differentiable: false,
                twice_differentiable: false,
            },
            PairwiseLoss::LogisticPairwise { a } | PairwiseLoss::LogisticRanking { a } => LossConstants {
                lipschitz: 1.0,
                grad_bound: 1.0,
                hess_bound: 1.0 / (2.0 * a),
                value_bound: inf,
                convex: true,
                differentiable: true,
                twice_differentiable: true,
            },
            PairwiseLoss::Squared | PairwiseLoss::LsRanking => LossConstants {
                lipschitz: inf,
                grad_bound: inf,
                hess_bound: 2.0,
                value_bound: inf,
                convex: true,
                differentiable: true,
                twice_differentiable: true,
            },
        }
    }

    /// Rejects losses outside the convex, twice differentiable class with
    /// bounded first and second derivatives.
    pub fn require_smooth_lipschitz(&self) -> Result<()> {
        let c = self.constants();
        if !c.convex || !c.twice_differentiable || !c.grad_bound.is_finite() || !c.hess_bound.is_finite() {
            return Err(Error::Unsupported(format!(
                "{} loss must be convex, twice differentiable and separately Lipschitz with bounded \
                 first and second derivatives",
                self.name()
            )));
        }
        Ok(())
    }

    pub fn require_bounded(&self) -> Result<f64> {
        let c = self.constants().value_bound;
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::Unsupported(format!("{} loss is unbounded", self.name())))
        }
    }
}

/// Monte-Carlo lower estimate of the local modulus of continuity of the
/// second derivatives,
/// `ω(h)_r = sup |D_iD_jL(…, f, f̃) − D_iD_jL(…, g, g̃)|` over
/// `f, f̃, g, g̃ ∈ [−r, r]` with `|f − g|, |f̃ − g̃| ≤ h`.
///
/// Responses `y, ỹ` are drawn from `[−r, r]` as well. Perturbations are drawn
/// on the unit scale and multiplied by `h`, so for a fixed seed the estimate
/// is computed on the same design for every `h`.
pub fn modulus_of_continuity_probe(loss: &PairwiseLoss, h: f64, r: f64, samples: usize, seed: u64) -> Result<f64> {
    loss.validate()?;
    if !loss.constants().twice_differentiable {
        return Err(Error::Unsupported(format!("{} loss is not twice differentiable", loss.name())));
    }
    if !(h >= 0.0 && h.is_finite() && r > 0.0 && r.is_finite()) {
        return input_err(format!("modulus probe needs h ≥ 0 and r > 0, got h={h}, r={r}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let y = rng.gen_range(-r..=r);
        let yt = rng.gen_range(-r..=r);
        let f = rng.gen_range(-r..=r);
        let ft = rng.gen_range(-r..=r);
        let g = (f + h * rng.gen_range(-1.0..=1.0)).clamp(-r, r);
        let gt = (ft + h * rng.gen_range(-1.0..=1.0)).clamp(-r, r);
        let a = loss.hessian_scale(y, yt, f, ft).unwrap_or(0.0);
        let b = loss.hessian_scale(y, yt, g, gt).unwrap_or(0.0);
        best = best.max((a - b).abs());
    }
    Ok(best)
}
