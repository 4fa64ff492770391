//! Robustness diagnostics for fitted estimators.

mod bootstrap;
mod contamination;
mod influence;
mod measure;

pub use bootstrap::{bootstrap_distribution, bootstrap_measure, summarize, BootstrapOptions, BootstrapReport, Resampling, Summary};
pub use contamination::{
    default_contamination_grid, maxbias_probe, maxbias_probe_from, regularized_objective, risk_gap, sensitivity_curve,
    stability_bound_check, MaxbiasReport, RiskGapReport, ScTarget, SensitivityReport, StabilityCheck, SC_CONVENTION,
};
pub use influence::{gateaux_derivative, hessian_operator, influence_function, HessianOperator, InfluenceResult, OPERATOR_TOL};
pub use measure::{total_variation, DiscreteMeasure};
