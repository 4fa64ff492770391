//! Regularized pairwise learning in a reproducing kernel Hilbert space.
//!
//! Estimators minimize a degree-2 V-statistic of a pairwise loss plus a
//! squared RKHS-norm penalty,
//!
//! ```text
//! f̂ = argmin_{f ∈ H}  (1/n²) Σ_i Σ_j L(x_i, y_i, x_j, y_j, f(x_i), f(x_j)) + λ‖f‖²_H,
//! ```
//!
//! and are represented by coefficients over the training inputs. Around the
//! solver sit robustness diagnostics: Gâteaux derivatives and influence
//! functions, sensitivity curves, maxbias probes for bounded losses, total
//! variation distances and a bootstrap harness.
//!
//! ```
//! use pairwise_rkhs::{fit, Dataset, KernelSpec, PairwiseLoss, SolverOptions};
//!
//! let data = Dataset::new(vec![vec![0.0], vec![0.5], vec![1.0]], vec![0.0, 0.4, 1.1]).unwrap();
//! let kernel = KernelSpec::gaussian(1.0).unwrap();
//! let model = fit(&PairwiseLoss::LogisticPairwise { a: 0.1 }, &data, &kernel, 0.1, &SolverOptions::default()).unwrap();
//! assert!(model.diagnostics.converged);
//! ```

pub mod error;
pub mod kernels;
pub mod losses;
pub mod risk;
pub mod robustness;
pub mod solver;

pub use error::{Error, Result};
pub use kernels::{gram_matrix, h_norm_sq, GramMatrix, KernelSpec, RkhsFunction};
pub use losses::{modulus_of_continuity_probe, LossConstants, PairwiseLoss};
pub use risk::{empirical_risk, empirical_shifted_risk, regularized_risk, risk_gradient_coeffs, Dataset, RiskReport};
pub use solver::{fit, fit_ls_closed_form, predict, stationarity_residual, FittedModel, SolverMode, SolverOptions};
