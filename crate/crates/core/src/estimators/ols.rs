use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_CONDITION_CAP;
use crate::serde_util;
use crate::simulate::InteractionLog;

/// Ordinary least squares of `y` on `[x, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    #[serde(with = "serde_util::dvector")]
    pub coefficients: DVector<f64>,
    pub intercept: f64,
}

/// Regresses outcomes on observed features with an intercept.
///
/// Confounding between `x` and `o` makes this estimate inconsistent; it is
/// the baseline the instrumental-variable estimator improves on.
pub fn ols_fit(log: &InteractionLog) -> Result<OlsFit> {
    let m = log.m;
    let t = log.len();
    if t < m + 1 {
        return Err(Error::SingularDesign {
            min_singular_value: 0.0,
        });
    }
    let design = DMatrix::from_fn(t, m + 1, |r, c| if c < m { log.records[r].features[c] } else { 1.0 });
    let y = DVector::from_iterator(t, log.records.iter().map(|r| r.outcome));
    let svd = design.svd(true, true);
    let smin = svd.singular_values.min();
    let smax = svd.singular_values.max();
    if !(smin > 0.0 && smax / smin <= DEFAULT_CONDITION_CAP.sqrt()) {
        return Err(Error::SingularDesign {
            min_singular_value: smin,
        });
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::SingularDesign {
        min_singular_value: smin,
    })?;
    Ok(OlsFit {
        coefficients: beta.rows(0, m).into_owned(),
        intercept: beta[m],
    })
}
