//! Monte Carlo simulation of separable measurement schemes: outcome
//! sampling, estimators, empirical Bayes risk and scheme information.

mod estimate;
pub mod haar;
mod risk;
mod scheme;

pub use estimate::{
    log_likelihood, mle, pure_chart, BayesMean, Estimate, Estimator, EstimatorSpec, Mle, MleOptions,
};
pub use risk::{bayes_risk_mc, LossSummary, MonteCarlo, RiskEstimate};
pub use scheme::{
    adapted_bases, empirical_fisher, sample_outcomes, sample_with_rng, stage_two_bases,
    two_step_scheme, BasisSpec, EmpiricalFisher, MeasurementScheme, Record, Sample,
};
