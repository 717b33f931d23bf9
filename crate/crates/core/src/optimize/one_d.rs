use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar population described by its second moments (all means zero), with
/// a fixed effort conversion `conv`, so that `x = b + conv^2 theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDPopulation {
    pub e_b2: f64,
    pub e_ob: f64,
    pub e_o2: f64,
    pub conv: f64,
    pub theta_star: f64,
}

impl OneDPopulation {
    /// Checks that the moments are finite and that the second moments are
    /// non-negative. Joint realizability is reported by [`Self::is_realizable`].
    pub fn new(e_b2: f64, e_ob: f64, e_o2: f64, conv: f64, theta_star: f64) -> Result<Self> {
        let p = Self {
            e_b2,
            e_ob,
            e_o2,
            conv,
            theta_star,
        };
        if ![e_b2, e_ob, e_o2, conv, theta_star].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("one-dimensional moments must be finite".into()));
        }
        if e_b2 < 0.0 || e_o2 < 0.0 {
            return Err(Error::InvalidArgument("second moments must be non-negative".into()));
        }
        Ok(p)
    }

    /// Non-convex instance on which the simple gradient points the wrong way
    /// at `theta = 0.5`.
    pub fn non_convex_example() -> Self {
        Self {
            e_b2: 0.3,
            e_ob: -6.5,
            e_o2: 15.0,
            conv: 3.0,
            theta_star: 1.0,
        }
    }

    /// Whether some joint distribution of `(b, o)` has these moments, i.e.
    /// `|E[ob]| <= sqrt(E[b^2] E[o^2])`.
    pub fn is_realizable(&self) -> bool {
        self.e_ob.abs() <= (self.e_b2 * self.e_o2).sqrt()
    }

    /// `conv^2`, the scalar `E E^T`.
    pub fn omega(&self) -> f64 {
        self.conv * self.conv
    }

    /// Expected gradient with a configurable correction term:
    /// the simple gradient plus `2 E[y_hat - y] omega (theta - theta_reference)`.
    pub fn expected_gradient(&self, theta: f64, correction: Option<(f64, f64)>) -> f64 {
        let (_, simple) = one_d_gradients(self, theta);
        match correction {
            None => simple,
            Some((omega, reference)) => {
                let mean_residual = (theta - self.theta_star) * self.omega() * theta;
                simple + 2.0 * mean_residual * omega * (theta - reference)
            }
        }
    }
}

/// `E[((theta - theta_star)(b + conv^2 theta) - o)^2]`.
pub fn one_d_risk(pop: &OneDPopulation, theta: f64) -> f64 {
    let d = theta - pop.theta_star;
    let c4 = pop.omega() * pop.omega();
    d * d * (pop.e_b2 + c4 * theta * theta) - 2.0 * d * pop.e_ob + pop.e_o2
}

/// Exact derivative of [`one_d_risk`] and the derivative that ignores how the
/// features move with `theta`, in that order.
pub fn one_d_gradients(pop: &OneDPopulation, theta: f64) -> (f64, f64) {
    let d = theta - pop.theta_star;
    let c4 = pop.omega() * pop.omega();
    let simple = 2.0 * (d * (pop.e_b2 + c4 * theta * theta) - pop.e_ob);
    let corrected = simple + 2.0 * c4 * theta * d * d;
    (corrected, simple)
}

/// Minimizer of [`one_d_risk`] on a uniform grid over `[lo, hi]`.
pub fn one_d_grid_minimizer(pop: &OneDPopulation, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let n = points.max(2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|t| (t, one_d_risk(pop, t)))
        .fold(
            (f64::NAN, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}
