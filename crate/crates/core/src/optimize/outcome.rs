use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::constraint::ConstraintSet;
use crate::error::{check_dim, Error, Result};
use crate::model::{observe_features, realize_outcome, AssessmentRule};
use crate::simulate::{sample_agent, stream, PopulationSpec, Purpose};

/// Rule maximizing the linear objective `theta^T lambda` over `set`.
///
/// Since `E[y] = const + theta^T E[E E^T] theta_star`, passing `lambda_hat`
/// from a two-stage fit gives the rule that maximizes expected agent outcome.
/// On a box, coordinates with `lambda_i = 0` take the lower bound.
pub fn outcome_maximizing_rule(lambda: &DVector<f64>, set: &ConstraintSet) -> Result<AssessmentRule> {
    set.validate()?;
    if !lambda.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("lambda has non-finite entries".into()));
    }
    let w = match set {
        ConstraintSet::L2Ball { radius } => {
            let n = lambda.norm();
            if n == 0.0 {
                return Err(Error::DegenerateObjective);
            }
            lambda * (*radius / n)
        }
        ConstraintSet::Box { lo, hi } => {
            check_dim("lambda vs box bounds", lo.len(), lambda.len())?;
            DVector::from_fn(lambda.len(), |i, _| if lambda[i] > 0.0 { hi[i] } else { lo[i] })
        }
    };
    Ok(AssessmentRule::new(w))
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub(crate) fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            samples: n,
        }
    }
}

/// Monte-Carlo estimate of the mean outcome when every agent best-responds to `rule`.
///
/// Agents come from one sub-stream of `seed`, so calls with the same seed
/// share their random numbers across rules.
pub fn expected_outcome(rule: &AssessmentRule, spec: &PopulationSpec, samples: usize, seed: u64) -> Result<McEstimate> {
    spec.validate()?;
    check_dim("rule vs population", spec.m, rule.dim())?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one Monte-Carlo sample".into()));
    }
    let mut rng = stream(seed, 0, Purpose::Mc);
    let mut ys = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (agent, _) = sample_agent(spec, &mut rng);
        let x = observe_features(&agent, rule)?;
        ys.push(realize_outcome(&agent, &x, &spec.causal)?);
    }
    Ok(McEstimate::from_samples(&ys))
}
