use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::constraint::ConstraintSet;
use super::gradient::{risk_gradient_corrected, risk_gradient_simple, GradientKind};
use super::one_d::{one_d_risk, OneDPopulation};
use crate::error::{check_dim, Error, Result};
use crate::model::{observe_features, predict, realize_outcome, AssessmentRule, Interaction};
use crate::serde_util;
use crate::simulate::{sample_agent, stream, PopulationSpec, Purpose};

/// Iterates whose norm exceeds this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSize {
    Constant {
        eta: f64,
    },
    /// `eta0 / sqrt(t)` at step `t = 1, 2, ...`.
    Decaying {
        eta0: f64,
    },
}

impl StepSize {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSize::Constant { eta } => eta,
            StepSize::Decaying { eta0 } => eta0 / (t as f64).sqrt(),
        }
    }
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Decaying { eta0: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    #[serde(with = "serde_util::dvector")]
    pub initial_rule: DVector<f64>,
    pub steps: usize,
    #[serde(default)]
    pub step_size: StepSize,
    pub gradient_kind: GradientKind,
    /// `E E^T` or its stage-1 estimate.
    #[serde(with = "serde_util::dmatrix")]
    pub omega: DMatrix<f64>,
    /// `theta_star` or its two-stage estimate.
    #[serde(with = "serde_util::dvector")]
    pub theta_reference: DVector<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ConstraintSet>,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.initial_rule.len();
        if m == 0 {
            return Err(Error::InvalidArgument("initial rule is empty".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        let eta = match self.step_size {
            StepSize::Constant { eta } => eta,
            StepSize::Decaying { eta0 } => eta0,
        };
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be finite and >= 0, got {eta}"
            )));
        }
        check_dim("omega rows", m, self.omega.nrows())?;
        check_dim("omega columns", m, self.omega.ncols())?;
        check_dim("theta reference", m, self.theta_reference.len())?;
        if let Some(set) = &self.projection {
            set.validate()?;
            if let ConstraintSet::Box { lo, .. } = set {
                check_dim("projection box", m, lo.len())?;
            }
        }
        Ok(())
    }

    fn project(&self, theta: DVector<f64>) -> Result<DVector<f64>> {
        match &self.projection {
            Some(set) => set.project(&theta),
            None => Ok(theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub theta: DVector<f64>,
    /// Squared loss of the interaction observed under `theta`, or the exact
    /// risk for analytic runs.
    pub risk_sample: f64,
}

/// Iterates of a risk-minimization run and the reference values it used.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub gradient_kind: GradientKind,
    pub omega: DMatrix<f64>,
    pub theta_reference: DVector<f64>,
}

impl Trajectory {
    pub fn final_theta(&self) -> &DVector<f64> {
        &self
            .points
            .last()
            .expect("trajectory has at least the initial point")
            .theta
    }

    /// CSV with header `t,theta_1..theta_m,risk_sample`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.theta_reference.len();
        let mut head = vec!["t".to_string()];
        head.extend((1..=m).map(|i| format!("theta_{i}")));
        head.push("risk_sample".into());
        writeln!(w, "{}", head.join(","))?;
        for p in &self.points {
            let mut row = vec![p.t.to_string()];
            row.extend(p.theta.iter().map(|v| v.to_string()));
            row.push(p.risk_sample.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn run(
    config: &SgdConfig,
    mut step: impl FnMut(usize, &DVector<f64>) -> Result<(DVector<f64>, f64)>,
) -> Result<Trajectory> {
    config.validate()?;
    let mut theta = config.project(config.initial_rule.clone())?;
    let mut points = Vec::with_capacity(config.steps + 1);
    for t in 0..=config.steps {
        let (grad, risk) = step(t, &theta)?;
        points.push(TrajectoryPoint {
            t,
            theta: theta.clone(),
            risk_sample: risk,
        });
        if t == config.steps {
            break;
        }
        let next = config.project(&theta - grad * config.step_size.at(t + 1))?;
        let norm = next.norm();
        if norm.is_nan() || norm > DIVERGENCE_NORM {
            return Err(Error::Diverged { step: t + 1, norm });
        }
        theta = next;
    }
    Ok(Trajectory {
        points,
        gradient_kind: config.gradient_kind,
        omega: config.omega.clone(),
        theta_reference: config.theta_reference.clone(),
    })
}

/// Stochastic gradient descent on predictive risk, one fresh simulated agent
/// per step: `theta_{t+1} = P(theta_t - eta_{t+1} g_t)`.
///
/// Point `t` of the trajectory holds `theta_t` and the squared loss of the
/// agent drawn at step `t`, which also produces `g_t`.
pub fn sgd_minimize_risk(config: &SgdConfig, spec: &PopulationSpec, seed: u64) -> Result<Trajectory> {
    spec.validate()?;
    check_dim("initial rule vs population", spec.m, config.initial_rule.len())?;
    run(config, |t, theta| {
        let rule = AssessmentRule::new(theta.clone());
        let (agent, _) = sample_agent(spec, &mut stream(seed, t as u64, Purpose::Sgd));
        let x = observe_features(&agent, &rule)?;
        let y = realize_outcome(&agent, &x, &spec.causal)?;
        let resid = predict(&rule, &x)? - y;
        let it = Interaction {
            rule: rule.clone(),
            features: x,
            outcome: y,
        };
        let g = match config.gradient_kind {
            GradientKind::Corrected => risk_gradient_corrected(&rule, &it, &config.omega, &config.theta_reference)?,
            GradientKind::Simple => risk_gradient_simple(&rule, &it)?,
        };
        Ok((g, resid * resid))
    })
}

/// Gradient descent on a scalar population using its exact expected
/// gradients, so the run is deterministic. Risk entries are exact.
pub fn sgd_minimize_one_d(config: &SgdConfig, pop: &OneDPopulation) -> Result<Trajectory> {
    check_dim("one-dimensional rule", 1, config.initial_rule.len())?;
    let correction = match config.gradient_kind {
        GradientKind::Corrected => Some((config.omega[(0, 0)], config.theta_reference[0])),
        GradientKind::Simple => None,
    };
    run(config, |_, theta| {
        let th = theta[0];
        Ok((
            DVector::from_element(1, pop.expected_gradient(th, correction)),
            one_d_risk(pop, th),
        ))
    })
}
