use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::outcome::McEstimate;
use crate::error::{check_dim, Error, Result};
use crate::model::{observe_features, predict, realize_outcome, AssessmentRule, Interaction};
use crate::simulate::{sample_agent, stream, PopulationSpec, Purpose};

/// Which gradient estimate drives risk minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientKind {
    /// Accounts for the features' dependence on the deployed rule.
    Corrected,
    /// Treats features as fixed, which biases the estimate.
    Simple,
}

fn check(rule: &AssessmentRule, interaction: &Interaction) -> Result<f64> {
    predict(rule, &interaction.features).map(|yhat| yhat - interaction.outcome)
}

/// `2 (y_hat - y) x`.
pub fn risk_gradient_simple(rule: &AssessmentRule, interaction: &Interaction) -> Result<DVector<f64>> {
    let r = check(rule, interaction)?;
    Ok(&interaction.features * (2.0 * r))
}

/// `2 (y_hat - y) (x + omega (theta - theta_reference))`.
///
/// With `omega = E E^T` and `theta_reference = theta_star` this is the exact
/// derivative of the squared loss for an agent with that effort matrix.
pub fn risk_gradient_corrected(
    rule: &AssessmentRule,
    interaction: &Interaction,
    omega: &DMatrix<f64>,
    theta_reference: &DVector<f64>,
) -> Result<DVector<f64>> {
    let m = rule.dim();
    let r = check(rule, interaction)?;
    if omega.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            context: "omega vs rule",
            expected: m,
            found: if omega.nrows() != m {
                omega.nrows()
            } else {
                omega.ncols()
            },
        });
    }
    check_dim("reference vs rule", m, theta_reference.len())?;
    let dir = &interaction.features + omega * (&rule.weights - theta_reference);
    Ok(dir * (2.0 * r))
}

fn population_interactions(
    rule: &AssessmentRule,
    spec: &PopulationSpec,
    samples: usize,
    seed: u64,
    mut f: impl FnMut(&Interaction) -> Result<()>,
) -> Result<()> {
    spec.validate()?;
    check_dim("rule vs population", spec.m, rule.dim())?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one Monte-Carlo sample".into()));
    }
    let mut rng = stream(seed, 0, Purpose::Mc);
    for _ in 0..samples {
        let (agent, _) = sample_agent(spec, &mut rng);
        let x = observe_features(&agent, rule)?;
        let y = realize_outcome(&agent, &x, &spec.causal)?;
        f(&Interaction {
            rule: rule.clone(),
            features: x,
            outcome: y,
        })?;
    }
    Ok(())
}

/// Monte-Carlo predictive risk `E[(y_hat - y)^2]` under `rule`. Agents are
/// drawn from the seed's Monte-Carlo stream, so equal seeds give common random
/// numbers across rules.
pub fn population_risk(rule: &AssessmentRule, spec: &PopulationSpec, samples: usize, seed: u64) -> Result<McEstimate> {
    let mut losses = Vec::with_capacity(samples);
    population_interactions(rule, spec, samples, seed, |it| {
        let r = predict(rule, &it.features)? - it.outcome;
        losses.push(r * r);
        Ok(())
    })?;
    Ok(McEstimate::from_samples(&losses))
}

/// Monte-Carlo average of a per-sample risk gradient.
pub fn population_gradient(
    kind: GradientKind,
    rule: &AssessmentRule,
    spec: &PopulationSpec,
    omega: &DMatrix<f64>,
    theta_reference: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<DVector<f64>> {
    let mut acc = DVector::zeros(spec.m);
    population_interactions(rule, spec, samples, seed, |it| {
        acc += match kind {
            GradientKind::Corrected => risk_gradient_corrected(rule, it, omega, theta_reference)?,
            GradientKind::Simple => risk_gradient_simple(rule, it)?,
        };
        Ok(())
    })?;
    Ok(acc / samples as f64)
}
