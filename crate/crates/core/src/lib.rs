//! Strategic agents facing linear assessment rules, and causal estimation
//! that uses the deployed rules as instruments.
//!
//! Agents best-respond to a rule `theta` by shifting their features to
//! `x = b + E E^T theta`; outcomes follow `y = x^T theta_star + o` with an
//! unobserved offset `o` that confounds ordinary least squares. Because the
//! rule is chosen independently of the agent, two-stage least squares with
//! the rule as instrument recovers `theta_star`.
//!
//! ```
//! use strategic_iv::{admissions_spec, run_simulation, estimators::tsls_fit};
//!
//! let (population, schedule) = admissions_spec();
//! let log = run_simulation(&population, &schedule.with_horizon(2000), 7).unwrap();
//! let fit = tsls_fit(&log).unwrap();
//! assert!((fit.theta_hat - population.causal.theta_star()).norm() < 0.1);
//! ```

pub mod error;
pub mod estimators;
pub mod fairness;
pub mod linalg;
pub mod model;
pub mod optimize;
mod serde_util;
pub mod simulate;

pub use error::{Error, Result};
pub use estimators::{ols_fit, theta_error_bound, tsls_fit, OlsFit, TslsFit};
pub use model::{
    agent_utility, best_respond, observe_features, predict, realize_outcome, AgentType, AssessmentRule, CausalModel,
    Interaction,
};
pub use simulate::{
    admissions_spec, read_log, run_simulation, sample_agent, write_log, InteractionLog, PopulationSpec, RuleSchedule,
    SubpopulationSpec,
};

pub use nalgebra::{DMatrix, DVector};
