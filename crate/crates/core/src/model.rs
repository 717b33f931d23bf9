//! Domain types and closed-form strategic behavior.
//!
//! An agent holds baseline features `b` (length m), an effort-conversion
//! matrix `E` (m x d) and an outcome offset `o`. Facing a linear rule with
//! weights `theta`, it maximizes `theta^T (b + E a) - |a|^2 / 2`, which gives the
//! effort `a = E^T theta` and observable features `x = b + E E^T theta`. Its
//! realized outcome is `x^T theta_star + o`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::serde_util;

/// One agent's latent type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    #[serde(with = "serde_util::dvector")]
    pub baseline_features: DVector<f64>,
    #[serde(with = "serde_util::dmatrix")]
    pub effort_matrix: DMatrix<f64>,
    pub outcome_offset: f64,
}

impl AgentType {
    pub fn new(baseline_features: DVector<f64>, effort_matrix: DMatrix<f64>, outcome_offset: f64) -> Result<Self> {
        let m = baseline_features.len();
        if m == 0 || effort_matrix.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "agent needs m >= 1 features and d >= 1 effort directions".into(),
            ));
        }
        check_dim("effort matrix rows", m, effort_matrix.nrows())?;
        let finite = baseline_features.iter().all(|v| v.is_finite())
            && effort_matrix.iter().all(|v| v.is_finite())
            && outcome_offset.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("agent type has non-finite entries".into()));
        }
        Ok(Self {
            baseline_features,
            effort_matrix,
            outcome_offset,
        })
    }

    pub fn num_features(&self) -> usize {
        self.baseline_features.len()
    }

    pub fn num_actions(&self) -> usize {
        self.effort_matrix.ncols()
    }

    /// `E E^T`, the feature response to a unit change in the rule.
    pub fn effort_gram(&self) -> DMatrix<f64> {
        &self.effort_matrix * self.effort_matrix.transpose()
    }
}

/// A deployed linear assessment rule `y_hat = x^T weights + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRule {
    #[serde(with = "serde_util::dvector")]
    pub weights: DVector<f64>,
    #[serde(default)]
    pub intercept: f64,
}

impl AssessmentRule {
    pub fn new(weights: DVector<f64>) -> Self {
        Self {
            weights,
            intercept: 0.0,
        }
    }

    pub fn with_intercept(weights: DVector<f64>, intercept: f64) -> Self {
        Self { weights, intercept }
    }

    pub fn from_slice(weights: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(weights))
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// The true causal coefficients and their support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CausalModelRepr", into = "CausalModelRepr")]
pub struct CausalModel {
    theta_star: DVector<f64>,
    support: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CausalModelRepr {
    #[serde(with = "serde_util::dvector")]
    theta_star: DVector<f64>,
}

impl From<CausalModelRepr> for CausalModel {
    fn from(r: CausalModelRepr) -> Self {
        CausalModel::new(r.theta_star)
    }
}

impl From<CausalModel> for CausalModelRepr {
    fn from(c: CausalModel) -> Self {
        CausalModelRepr {
            theta_star: c.theta_star,
        }
    }
}

impl CausalModel {
    pub fn new(theta_star: DVector<f64>) -> Self {
        let support = theta_star
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        Self { theta_star, support }
    }

    pub fn from_slice(theta_star: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(theta_star))
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    /// Zero-based indices of the causally relevant features.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn is_causal(&self, i: usize) -> bool {
        self.support.binary_search(&i).is_ok()
    }
}

/// One logged round `(theta_t, x_t, y_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub rule: AssessmentRule,
    pub features: DVector<f64>,
    pub outcome: f64,
}

impl Interaction {
    pub fn new(rule: AssessmentRule, features: DVector<f64>, outcome: f64) -> Result<Self> {
        check_dim("interaction features", rule.dim(), features.len())?;
        let finite = rule.weights.iter().all(|v| v.is_finite())
            && rule.intercept.is_finite()
            && features.iter().all(|v| v.is_finite())
            && outcome.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("interaction has non-finite entries".into()));
        }
        Ok(Self {
            rule,
            features,
            outcome,
        })
    }
}

fn check_agent_rule(agent: &AgentType, rule: &AssessmentRule) -> Result<()> {
    check_dim("rule weights vs agent features", agent.num_features(), rule.dim())
}

/// Utility-maximizing effort `E^T theta`. The rule intercept does not enter.
pub fn best_respond(agent: &AgentType, rule: &AssessmentRule) -> Result<DVector<f64>> {
    check_agent_rule(agent, rule)?;
    Ok(agent.effort_matrix.tr_mul(&rule.weights))
}

/// Observable features after best response: `b + E E^T theta`.
pub fn observe_features(agent: &AgentType, rule: &AssessmentRule) -> Result<DVector<f64>> {
    let effort = best_respond(agent, rule)?;
    Ok(&agent.baseline_features + &agent.effort_matrix * effort)
}

/// True outcome `x^T theta_star + o`.
pub fn realize_outcome(agent: &AgentType, features: &DVector<f64>, model: &CausalModel) -> Result<f64> {
    check_dim("features vs causal model", model.dim(), features.len())?;
    Ok(features.dot(model.theta_star()) + agent.outcome_offset)
}

/// Prediction `x^T weights + intercept`.
pub fn predict(rule: &AssessmentRule, features: &DVector<f64>) -> Result<f64> {
    check_dim("features vs rule weights", rule.dim(), features.len())?;
    Ok(features.dot(&rule.weights) + rule.intercept)
}

/// Agent utility `predict(rule, b + E a) - |a|^2 / 2` for an arbitrary effort.
pub fn agent_utility(agent: &AgentType, rule: &AssessmentRule, effort: &DVector<f64>) -> Result<f64> {
    check_agent_rule(agent, rule)?;
    check_dim("effort vs agent actions", agent.num_actions(), effort.len())?;
    let x = &agent.baseline_features + &agent.effort_matrix * effort;
    Ok(predict(rule, &x)? - 0.5 * effort.norm_squared())
}
