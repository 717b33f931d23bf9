use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_singular_value, solve_capped, DEFAULT_CONDITION_CAP};
use crate::serde_util;
use crate::simulate::InteractionLog;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TslsOptions {
    /// Largest acceptable condition number for the instrument Gram matrix and
    /// the stage-1 estimate.
    pub condition_cap: f64,
}

impl Default for TslsOptions {
    fn default() -> Self {
        Self {
            condition_cap: DEFAULT_CONDITION_CAP,
        }
    }
}

/// Two-stage least-squares estimates, with the deployed rule as instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TslsFit {
    /// Stage-1 slope block, an estimate of `E[E E^T]`.
    #[serde(with = "serde_util::dmatrix")]
    pub omega_hat: DMatrix<f64>,
    /// Stage-1 intercepts, an estimate of `E[b]`.
    #[serde(with = "serde_util::dvector")]
    pub baseline_mean: DVector<f64>,
    /// Stage-2 slopes, an estimate of `E[E E^T] theta_star`.
    #[serde(with = "serde_util::dvector")]
    pub lambda_hat: DVector<f64>,
    /// Stage-2 intercept, an estimate of `E[o] + E[b]^T theta_star`.
    pub intercept_hat: f64,
    #[serde(with = "serde_util::dvector")]
    pub theta_hat: DVector<f64>,
    /// `sigma_min(sum_t theta_t (x_t - b_bar)^T)`.
    pub design_min_singular_value: f64,
    pub rounds: usize,
    /// Largest absolute rule weight seen in the log.
    pub instrument_bound: f64,
    /// Standard deviation of the stage-2 residuals.
    pub stage2_residual_std: f64,
    /// Relative residual of the closed-form normal equations at `theta_hat`.
    pub cross_check_residual: f64,
}

pub fn tsls_fit(log: &InteractionLog) -> Result<TslsFit> {
    tsls_fit_with(log, TslsOptions::default())
}

/// Both stages share the Gram matrix `sum_t [theta_t; 1][theta_t; 1]^T`.
/// Sums run over rounds in ascending order.
pub fn tsls_fit_with(log: &InteractionLog, opts: TslsOptions) -> Result<TslsFit> {
    let m = log.m;
    let t = log.len();
    let k = m + 1;
    if t < m + 2 {
        return Err(Error::InsufficientVariation {
            rounds: t,
            required: m + 2,
            condition: f64::INFINITY,
        });
    }

    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut cross_x = DMatrix::<f64>::zeros(k, m);
    let mut cross_y = DMatrix::<f64>::zeros(k, 1);
    let mut inst = DVector::<f64>::zeros(k);
    let mut beta = 0.0_f64;
    for rec in &log.records {
        inst.rows_mut(0, m).copy_from(&rec.rule.weights);
        inst[m] = 1.0;
        beta = rec.rule.weights.iter().fold(beta, |b, v| b.max(v.abs()));
        gram.ger(1.0, &inst, &inst, 1.0);
        cross_x.ger(1.0, &inst, &rec.features, 1.0);
        cross_y.column_mut(0).axpy(rec.outcome, &inst, 1.0);
    }

    let stage1 =
        solve_capped(&gram, &cross_x, opts.condition_cap).map_err(|condition| Error::InsufficientVariation {
            rounds: t,
            required: m + 2,
            condition,
        })?;
    let stage2 =
        solve_capped(&gram, &cross_y, opts.condition_cap).map_err(|condition| Error::InsufficientVariation {
            rounds: t,
            required: m + 2,
            condition,
        })?;

    let omega_hat = stage1.rows(0, m).into_owned();
    let baseline_mean = stage1.row(m).transpose();
    let lambda_hat = stage2.column(0).rows(0, m).into_owned();
    let intercept_hat = stage2[(m, 0)];

    let theta_hat = solve_capped(
        &omega_hat,
        &DMatrix::from_column_slice(m, 1, lambda_hat.as_slice()),
        opts.condition_cap,
    )
    .map_err(|condition| Error::Stage1RankDeficient { condition })?
    .column(0)
    .into_owned();

    // Closed form: (sum theta (x - b_bar)^T) theta_hat = sum theta (y - c).
    let mut design = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut ss = 0.0;
    for rec in &log.records {
        let centered = &rec.features - &baseline_mean;
        design.ger(1.0, &rec.rule.weights, &centered, 1.0);
        rhs.axpy(rec.outcome - intercept_hat, &rec.rule.weights, 1.0);
        let resid = rec.outcome - rec.rule.weights.dot(&lambda_hat) - intercept_hat;
        ss += resid * resid;
    }
    let cross_check_residual = (&design * &theta_hat - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    let dof = (t - k).max(1);

    Ok(TslsFit {
        omega_hat,
        baseline_mean,
        lambda_hat,
        intercept_hat,
        theta_hat,
        design_min_singular_value: min_singular_value(&design),
        rounds: t,
        instrument_bound: beta,
        stage2_residual_std: (ss / dof as f64).sqrt(),
        cross_check_residual,
    })
}
