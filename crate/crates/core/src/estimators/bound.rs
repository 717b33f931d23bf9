use serde::{Deserialize, Serialize};

use super::tsls::TslsFit;
use crate::error::{Error, Result};

/// Constants of the a-priori finite-sample error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    /// Bound on the absolute rule weights.
    pub beta: f64,
    /// Sub-Gaussian parameter of the outcome offset.
    pub sigma_g: f64,
    /// Standard-deviation bound of baseline entries.
    pub sigma_z: f64,
    /// Standard-deviation bound of `E E^T` entries.
    #[serde(rename = "sigma_E")]
    pub sigma_e: f64,
    /// `sigma_min(E[E E^T])`.
    pub c: f64,
    /// Per-coordinate instrument variance.
    pub sigma_theta_sq: f64,
    pub m: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
}

/// A bound on `|theta_hat - theta_star|_2` and the probability it holds with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub value: f64,
    pub confidence: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Both bound forms hold with probability `1 - 6 delta`.
pub fn bound_confidence(delta: f64) -> f64 {
    1.0 - 6.0 * delta
}

/// Data-driven bound `2 beta sigma_g sqrt(2 m T log(m / delta)) / sigma_min(sum theta (x - b_bar)^T)`.
///
/// `sigma_g` defaults to the stage-2 residual standard deviation, which
/// over-covers because it also carries baseline and effort noise.
pub fn theta_error_bound(fit: &TslsFit, sigma_g: Option<f64>, delta: f64) -> Result<ErrorBound> {
    check_delta(delta)?;
    let sigma_g = sigma_g.unwrap_or(fit.stage2_residual_std);
    if sigma_g.is_nan() || sigma_g < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma_g must be >= 0, got {sigma_g}")));
    }
    let denominator = fit.design_min_singular_value;
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::VacuousBound { denominator });
    }
    let m = fit.theta_hat.len() as f64;
    let t = fit.rounds as f64;
    let numerator = 2.0 * fit.instrument_bound * sigma_g * (2.0 * m * t * (m / delta).ln()).sqrt();
    Ok(ErrorBound {
        value: numerator / denominator,
        confidence: bound_confidence(delta),
    })
}

/// A-priori bound in terms of population constants:
///
/// ```text
/// 2 beta sigma_g sqrt(2 m log(m/delta))
/// ------------------------------------------------------------------------------
/// c sqrt(T) sigma_theta^2 / 2 - m beta^2 sigma_E L - 2 m beta sigma_z L,   L = sqrt(2 log(m^2/delta))
/// ```
pub fn theta_error_bound_apriori(p: &BoundParams) -> Result<ErrorBound> {
    check_delta(p.delta)?;
    let all_finite_nonneg = [p.beta, p.sigma_g, p.sigma_z, p.sigma_e, p.c, p.sigma_theta_sq]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0);
    if !all_finite_nonneg || p.m == 0 || p.t == 0 {
        return Err(Error::InvalidArgument(
            "bound parameters must be non-negative with m, T >= 1".into(),
        ));
    }
    let m = p.m as f64;
    let t = p.t as f64;
    let l = (2.0 * (m * m / p.delta).ln()).sqrt();
    let numerator = 2.0 * p.beta * p.sigma_g * (2.0 * m * (m / p.delta).ln()).sqrt();
    let denominator = 0.5 * p.c * t.sqrt() * p.sigma_theta_sq
        - m * p.beta * p.beta * p.sigma_e * l
        - 2.0 * m * p.beta * p.sigma_z * l;
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::VacuousBound { denominator });
    }
    Ok(ErrorBound {
        value: numerator / denominator,
        confidence: bound_confidence(p.delta),
    })
}
