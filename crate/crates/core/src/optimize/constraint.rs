use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::serde_util;

/// Convex set of feasible rule weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSet {
    L2Ball {
        radius: f64,
    },
    Box {
        #[serde(with = "serde_util::dvector")]
        lo: DVector<f64>,
        #[serde(with = "serde_util::dvector")]
        hi: DVector<f64>,
    },
}

impl ConstraintSet {
    pub fn ball(radius: f64) -> Result<Self> {
        let s = ConstraintSet::L2Ball { radius };
        s.validate()?;
        Ok(s)
    }

    pub fn boxed(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        let s = ConstraintSet::Box { lo, hi };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConstraintSet::L2Ball { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("ball radius must be > 0, got {radius}")));
                }
            }
            ConstraintSet::Box { lo, hi } => {
                check_dim("box bounds", lo.len(), hi.len())?;
                if lo
                    .iter()
                    .zip(hi.iter())
                    .any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h))
                {
                    return Err(Error::InvalidArgument("box needs finite bounds with lo <= hi".into()));
                }
            }
        }
        Ok(())
    }

    fn check(&self, theta: &DVector<f64>) -> Result<()> {
        if let ConstraintSet::Box { lo, .. } = self {
            check_dim("rule vs box bounds", lo.len(), theta.len())?;
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(theta)?;
        Ok(match self {
            ConstraintSet::L2Ball { radius } => {
                let n = theta.norm();
                if n > *radius {
                    theta * (*radius / n)
                } else {
                    theta.clone()
                }
            }
            ConstraintSet::Box { lo, hi } => DVector::from_fn(theta.len(), |i, _| theta[i].clamp(lo[i], hi[i])),
        })
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        match self {
            ConstraintSet::L2Ball { radius } => theta.norm() <= radius + tol,
            ConstraintSet::Box { lo, hi } => {
                lo.len() == theta.len()
                    && theta
                        .iter()
                        .zip(lo.iter().zip(hi.iter()))
                        .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
            }
        }
    }
}
