//! OLS baseline, two-stage least squares and its finite-sample error bound.

mod bound;
mod ols;
mod tsls;

pub use bound::{bound_confidence, theta_error_bound, theta_error_bound_apriori, BoundParams, ErrorBound};
pub use ols::{ols_fit, OlsFit};
pub use tsls::{tsls_fit, tsls_fit_with, TslsFit, TslsOptions};
