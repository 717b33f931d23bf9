//! Outcome-maximizing rule selection and predictive-risk minimization.

mod constraint;
mod gradient;
mod one_d;
mod outcome;
mod sgd;

pub use constraint::ConstraintSet;
pub use gradient::{population_gradient, population_risk, risk_gradient_corrected, risk_gradient_simple, GradientKind};
pub use one_d::{one_d_gradients, one_d_grid_minimizer, one_d_risk, OneDPopulation};
pub use outcome::{expected_outcome, outcome_maximizing_rule, McEstimate};
pub use sgd::{
    sgd_minimize_one_d, sgd_minimize_risk, SgdConfig, StepSize, Trajectory, TrajectoryPoint, DIVERGENCE_NORM,
};
