//! Closed-form population moments used as oracles and for expected outcomes.

use nalgebra::{DMatrix, DVector};

use super::spec::{PopulationSpec, SubpopulationSpec};

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mean of `clamp(N(mu, sigma), lo, hi)`.
pub fn clamped_normal_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if sigma == 0.0 {
        return mu.clamp(lo, hi);
    }
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
    lo * pa + hi * (1.0 - pb) + mu * (pb - pa) + sigma * (std_normal_pdf(a) - std_normal_pdf(b))
}

/// First and second moments of `|N(mu, sigma)|`.
pub fn folded_normal_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let second = mu * mu + sigma * sigma;
    if sigma == 0.0 {
        return (mu.abs(), second);
    }
    let mean = sigma * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp()
        + mu * (1.0 - 2.0 * std_normal_cdf(-mu / sigma));
    (mean, second)
}

fn group_baseline_mean(g: &SubpopulationSpec) -> DVector<f64> {
    DVector::from_fn(g.baseline_mean.len(), |i, _| {
        let (mu, s) = (g.baseline_mean[i], g.baseline_stddev[i]);
        match g.baseline_clamp.as_ref().and_then(|c| c[i]) {
            Some([lo, hi]) => clamped_normal_mean(mu, s, lo, hi),
            None => mu,
        }
    })
}

/// Entrywise mean and variance of a group's effort matrix.
fn group_effort_moments(g: &SubpopulationSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut mean = g.effort_matrix_mean.clone();
    let mut var = DMatrix::zeros(mean.nrows(), mean.ncols());
    for n in &g.effort_noise {
        let (m1, m2) = folded_normal_moments(n.mean, n.stddev);
        mean[(n.row, n.col)] += f64::from(n.sign) * m1;
        var[(n.row, n.col)] += m2 - m1 * m1;
    }
    (mean, var)
}

/// `E[E E^T]` for one group. Entries are independent, so only the diagonal
/// picks up variance terms.
fn group_effort_gram(g: &SubpopulationSpec) -> DMatrix<f64> {
    let (mean, var) = group_effort_moments(g);
    let mut gram = &mean * mean.transpose();
    for i in 0..gram.nrows() {
        gram[(i, i)] += var.row(i).sum();
    }
    gram
}

/// Mixture mean of the (clamped) baseline features.
pub fn expected_baseline(spec: &PopulationSpec) -> DVector<f64> {
    spec.groups.iter().fold(DVector::zeros(spec.m), |acc, g| {
        acc + group_baseline_mean(g) * g.mixture_weight
    })
}

/// Mixture mean of `E E^T`.
pub fn expected_effort_gram(spec: &PopulationSpec) -> DMatrix<f64> {
    spec.groups.iter().fold(DMatrix::zeros(spec.m, spec.m), |acc, g| {
        acc + group_effort_gram(g) * g.mixture_weight
    })
}

/// Mixture mean of the outcome offset.
pub fn expected_offset(spec: &PopulationSpec) -> f64 {
    spec.groups.iter().map(|g| g.offset_mean * g.mixture_weight).sum()
}

/// Per-group `E[E E^T]`, in group order.
pub fn group_effort_grams(spec: &PopulationSpec) -> Vec<DMatrix<f64>> {
    spec.groups.iter().map(group_effort_gram).collect()
}

/// Closed-form `E[y]` under a rule with weights `theta`:
/// `E[b]^T theta* + theta^T E[E E^T] theta* + E[o]`.
pub fn expected_outcome_closed_form(spec: &PopulationSpec, theta: &DVector<f64>) -> f64 {
    let ts = spec.causal.theta_star();
    expected_baseline(spec).dot(ts) + theta.dot(&(expected_effort_gram(spec) * ts)) + expected_offset(spec)
}
