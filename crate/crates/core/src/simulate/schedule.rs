use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AssessmentRule;
use crate::serde_util;

/// How the deployed rule is chosen at each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RuleSchedule {
    /// Cycles through `rules`: round `t` deploys `rules[t % len]`.
    FixedList { rules: Vec<AssessmentRule>, horizon: usize },
    /// Independent draws `center + stddev * z` with `z` standard normal.
    GaussianPerturbation {
        #[serde(with = "serde_util::dvector")]
        center: DVector<f64>,
        #[serde(with = "serde_util::dvector")]
        stddev: DVector<f64>,
        horizon: usize,
    },
}

impl RuleSchedule {
    pub fn horizon(&self) -> usize {
        match self {
            RuleSchedule::FixedList { horizon, .. } | RuleSchedule::GaussianPerturbation { horizon, .. } => *horizon,
        }
    }

    pub fn with_horizon(&self, t: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            RuleSchedule::FixedList { horizon, .. } | RuleSchedule::GaussianPerturbation { horizon, .. } => {
                *horizon = t
            }
        }
        s
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        match self {
            RuleSchedule::FixedList { rules, horizon } => {
                if rules.is_empty() && *horizon > 0 {
                    return bad("fixed-list schedule has no rules".into());
                }
                for (i, r) in rules.iter().enumerate() {
                    if r.dim() != m {
                        return bad(format!("rule {i} has length {}, expected {m}", r.dim()));
                    }
                    if !r.weights.iter().all(|v| v.is_finite()) || !r.intercept.is_finite() {
                        return bad(format!("rule {i} has non-finite entries"));
                    }
                }
            }
            RuleSchedule::GaussianPerturbation { center, stddev, .. } => {
                if center.len() != m || stddev.len() != m {
                    return bad(format!("center and stddev must have length {m}"));
                }
                if !center.iter().all(|v| v.is_finite()) {
                    return bad("center has non-finite entries".into());
                }
                if !stddev.iter().all(|&s| s.is_finite() && s > 0.0) {
                    return bad("perturbation stddev entries must be > 0".into());
                }
            }
        }
        Ok(())
    }

    /// The rule for round `t`, drawing from `rng` when the schedule is random.
    pub fn rule_at<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> AssessmentRule {
        match self {
            RuleSchedule::FixedList { rules, .. } => rules[t % rules.len()].clone(),
            RuleSchedule::GaussianPerturbation { center, stddev, .. } => {
                let w = DVector::from_fn(center.len(), |i, _| {
                    let z: f64 = StandardNormal.sample(rng);
                    center[i] + stddev[i] * z
                });
                AssessmentRule::new(w)
            }
        }
    }
}
