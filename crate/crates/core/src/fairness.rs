//! Individual fairness measured on causally relevant features.
//!
//! Two agents are close when their baselines agree on the causal support and
//! their effort Gram matrices agree on every entry touching the support. A rule
//! is fair for a pair when the gap in predictions is at most that distance.
//! Deploying `theta_star` with unit norm is always fair; rules that load on
//! non-causal features can separate agents at distance zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{AgentType, AssessmentRule, CausalModel};
use crate::simulate::{sample_agent, sample_from_group, stream, PopulationSpec, Purpose};

/// Distance threshold below which two agents count as identical on the causal support.
pub const ZERO_DISTANCE_TOLERANCE: f64 = 1e-10;

/// Slack allowed when comparing a gap to a distance.
pub const SATISFACTION_TOLERANCE: f64 = 1e-12;

fn check_support(support: &[usize], m: usize) -> Result<()> {
    match support.iter().find(|&&i| i >= m) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len: m }),
        None => Ok(()),
    }
}

/// Keeps coordinates in `support`, zeroing the rest.
pub fn causal_mask_vector(v: &DVector<f64>, support: &[usize]) -> Result<DVector<f64>> {
    check_support(support, v.len())?;
    let mut out = DVector::zeros(v.len());
    for &i in support {
        out[i] = v[i];
    }
    Ok(out)
}

/// Keeps entry `(i, j)` when `i` or `j` is in `support`.
pub fn causal_mask_matrix(a: &DMatrix<f64>, support: &[usize]) -> Result<DMatrix<f64>> {
    check_dim("square matrix", a.nrows(), a.ncols())?;
    check_support(support, a.nrows())?;
    let mut keep = vec![false; a.nrows()];
    for &i in support {
        keep[i] = true;
    }
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        if keep[i] || keep[j] {
            a[(i, j)]
        } else {
            0.0
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub distance: f64,
    pub gap: f64,
    pub satisfied: bool,
    /// `|b_C - b'_C|_2`.
    pub baseline_term: f64,
    /// Spectral norm of the masked Gram difference.
    pub matrix_term: f64,
}

fn check_pair(u: &AgentType, v: &AgentType) -> Result<()> {
    check_dim("paired agent features", u.num_features(), v.num_features())
}

fn distance_terms(u: &AgentType, v: &AgentType, model: &CausalModel) -> Result<(f64, f64)> {
    check_pair(u, v)?;
    check_dim("agent vs causal model", model.dim(), u.num_features())?;
    let s = model.support();
    let db = causal_mask_vector(&(&u.baseline_features - &v.baseline_features), s)?;
    let dg = causal_mask_matrix(&(u.effort_gram() - v.effort_gram()), s)?;
    Ok((db.norm(), spectral_norm(&dg)))
}

/// `|b_C - b'_C|_2 + |(E E^T)_C - (E' E'^T)_C|_2`.
pub fn similarity_distance(u: &AgentType, v: &AgentType, model: &CausalModel) -> Result<f64> {
    let (b, g) = distance_terms(u, v, model)?;
    Ok(b + g)
}

/// `|(b - b')^T theta + theta^T (E E^T - E' E'^T) theta|`. Offsets and the
/// intercept cancel.
pub fn prediction_gap(u: &AgentType, v: &AgentType, rule: &AssessmentRule) -> Result<f64> {
    check_pair(u, v)?;
    check_dim("rule vs agent features", u.num_features(), rule.dim())?;
    let th = &rule.weights;
    let dg = u.effort_gram() - v.effort_gram();
    Ok(((&u.baseline_features - &v.baseline_features).dot(th) + th.dot(&(dg * th))).abs())
}

/// The prediction gap of two agents at distance zero, written as sums over
/// the non-causal coordinates only. Errors unless the distance is zero.
pub fn gap_formula_non_causal(u: &AgentType, v: &AgentType, rule: &AssessmentRule, model: &CausalModel) -> Result<f64> {
    let distance = similarity_distance(u, v, model)?;
    if distance > ZERO_DISTANCE_TOLERANCE {
        return Err(Error::NonZeroDistance { distance });
    }
    check_dim("rule vs agent features", u.num_features(), rule.dim())?;
    let off: Vec<usize> = (0..model.dim()).filter(|&i| !model.is_causal(i)).collect();
    let th = &rule.weights;
    let (gu, gv) = (u.effort_gram(), v.effort_gram());
    let mut total = 0.0;
    for &i in &off {
        total += (u.baseline_features[i] - v.baseline_features[i]) * th[i];
        for &j in &off {
            total += (gu[(i, j)] - gv[(i, j)]) * th[i] * th[j];
        }
    }
    Ok(total.abs())
}

pub fn fairness_report(
    u: &AgentType,
    v: &AgentType,
    rule: &AssessmentRule,
    model: &CausalModel,
) -> Result<FairnessReport> {
    let (baseline_term, matrix_term) = distance_terms(u, v, model)?;
    let distance = baseline_term + matrix_term;
    let gap = prediction_gap(u, v, rule)?;
    Ok(FairnessReport {
        distance,
        gap,
        satisfied: gap <= distance + SATISFACTION_TOLERANCE,
        baseline_term,
        matrix_term,
    })
}

/// Two agents at distance zero that any rule with weight on the non-causal
/// half separates. Features `n/2..n` are causal with `theta_star = sqrt(2/n)`;
/// the first agent converts effort on the non-causal half at rate `sqrt(n)`,
/// the second not at all.
pub fn example_unfair_instance(n: usize) -> Result<(AgentType, AgentType, CausalModel)> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "n must be even and at least 2, got {n}"
        )));
    }
    let h = n / 2;
    let ts = DVector::from_fn(n, |i, _| if i < h { 0.0 } else { (2.0 / n as f64).sqrt() });
    let du = DVector::from_fn(n, |i, _| if i < h { (n as f64).sqrt() } else { 1.0 });
    let dv = DVector::from_fn(n, |i, _| if i < h { 0.0 } else { 1.0 });
    let b = DVector::zeros(n);
    let u = AgentType::new(b.clone(), DMatrix::from_diagonal(&du), 0.0)?;
    let v = AgentType::new(b, DMatrix::from_diagonal(&dv), 0.0)?;
    Ok((u, v, CausalModel::new(ts)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub index: usize,
    pub distance: f64,
    pub gap: f64,
}

/// Aggregate of per-pair fairness reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub pairs: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// Largest `gap / distance`; `None` when some pair is at distance zero
    /// with a positive gap. Pairs with zero gap and zero distance count as 0.
    pub max_ratio: Option<f64>,
    pub worst_pair: WorstPair,
    /// `|theta_star|_2`. Deploying `theta_star` is guaranteed fair when this is at most 1.
    pub theta_star_norm: f64,
}

fn ratio(r: &FairnessReport) -> f64 {
    if r.gap == 0.0 {
        0.0
    } else if r.distance == 0.0 {
        f64::INFINITY
    } else {
        r.gap / r.distance
    }
}

fn audit_with(
    spec: &PopulationSpec,
    rule: &AssessmentRule,
    pairs: usize,
    seed: u64,
    mut draw: impl FnMut(&mut rand_chacha::ChaCha8Rng) -> Result<(AgentType, AgentType)>,
) -> Result<AuditSummary> {
    spec.validate()?;
    check_dim("rule vs population", spec.m, rule.dim())?;
    if pairs == 0 {
        return Err(Error::InvalidArgument("audit needs at least one pair".into()));
    }
    let mut violations = 0;
    let mut worst: Option<(f64, WorstPair)> = None;
    for i in 0..pairs {
        let mut rng = stream(seed, i as u64, Purpose::Pair);
        let (u, v) = draw(&mut rng)?;
        let r = fairness_report(&u, &v, rule, &spec.causal)?;
        if !r.satisfied {
            violations += 1;
        }
        let q = ratio(&r);
        if worst.as_ref().is_none_or(|(best, _)| q > *best) {
            worst = Some((
                q,
                WorstPair {
                    index: i,
                    distance: r.distance,
                    gap: r.gap,
                },
            ));
        }
    }
    let (max_ratio, worst_pair) = worst.expect("at least one pair");
    Ok(AuditSummary {
        pairs,
        violations,
        violation_rate: violations as f64 / pairs as f64,
        max_ratio: max_ratio.is_finite().then_some(max_ratio),
        worst_pair,
        theta_star_norm: spec.causal.theta_star().norm(),
    })
}

/// Audits `pairs` independently drawn agent pairs. Pair `i` comes from its
/// own sub-stream, so the summary does not depend on evaluation order.
pub fn audit_population(spec: &PopulationSpec, rule: &AssessmentRule, pairs: usize, seed: u64) -> Result<AuditSummary> {
    audit_with(spec, rule, pairs, seed, |rng| {
        let (u, _) = sample_agent(spec, rng);
        let (v, _) = sample_agent(spec, rng);
        Ok((u, v))
    })
}

/// Audits pairs with the first agent from group `a` and the second from group `b`.
pub fn audit_between_groups(
    spec: &PopulationSpec,
    a: usize,
    b: usize,
    rule: &AssessmentRule,
    pairs: usize,
    seed: u64,
) -> Result<AuditSummary> {
    audit_with(spec, rule, pairs, seed, |rng| {
        Ok((sample_from_group(spec, a, rng)?, sample_from_group(spec, b, rng)?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{observe_features, predict};
    use crate::simulate::{admissions_spec, SubpopulationSpec};
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn agent(b: DVector<f64>, e: DMatrix<f64>, o: f64) -> AgentType {
        AgentType::new(b, e, o).unwrap()
    }

    #[test]
    fn mask_examples() {
        let a = dmatrix![1.0, 2.0; 3.0, 4.0];
        assert_eq!(causal_mask_matrix(&a, &[0, 1]).unwrap(), a);
        assert_eq!(causal_mask_matrix(&a, &[]).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(causal_mask_matrix(&a, &[1]).unwrap(), dmatrix![0.0, 2.0; 3.0, 4.0]);
        let v = dvector![1.0, 2.0, 3.0];
        assert_eq!(causal_mask_vector(&v, &[2]).unwrap(), dvector![0.0, 0.0, 3.0]);
        assert!(matches!(
            causal_mask_vector(&v, &[3]),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn distance_examples() {
        let model = CausalModel::from_slice(&[0.6, 0.8, 0.0]);
        let u = agent(dvector![1.0, 1.0, 5.0], DMatrix::identity(3, 3), 0.0);
        assert_eq!(similarity_distance(&u, &u, &model).unwrap(), 0.0);

        let mut e = DMatrix::identity(3, 3);
        e[(2, 2)] = 7.0;
        let v = agent(dvector![1.0, 1.0, -4.0], e, 9.0);
        assert_eq!(similarity_distance(&u, &v, &model).unwrap(), 0.0);

        let w = agent(dvector![1.3, 1.4, 5.0], DMatrix::identity(3, 3), 0.0);
        assert!((similarity_distance(&u, &w, &model).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        let u = agent(dvector![1.0, 2.0], dmatrix![1.0, 0.5; 0.0, 2.0], 0.3);
        let v = agent(dvector![-1.0, 0.5], dmatrix![2.0, 0.0; 1.0, 1.0], -0.8);
        let r = AssessmentRule::with_intercept(dvector![0.4, -0.9], 3.0);
        assert_eq!(prediction_gap(&u, &u, &r).unwrap(), 0.0);
        assert_eq!(
            prediction_gap(&u, &v, &AssessmentRule::from_slice(&[0.0, 0.0])).unwrap(),
            0.0
        );
        let direct = (predict(&r, &observe_features(&u, &r).unwrap()).unwrap()
            - predict(&r, &observe_features(&v, &r).unwrap()).unwrap())
        .abs();
        assert!((prediction_gap(&u, &v, &r).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn non_causal_formula_requires_zero_distance() {
        let model = CausalModel::from_slice(&[1.0, 0.0]);
        let u = agent(dvector![1.0, 0.0], DMatrix::identity(2, 2), 0.0);
        let v = agent(dvector![2.0, 0.0], DMatrix::identity(2, 2), 0.0);
        let r = AssessmentRule::from_slice(&[1.0, 1.0]);
        assert!(matches!(
            gap_formula_non_causal(&u, &v, &r, &model),
            Err(Error::NonZeroDistance { .. })
        ));
    }

    #[test]
    fn causal_rule_closes_the_gap() {
        let (u, v, model) = example_unfair_instance(6).unwrap();
        let r = AssessmentRule::new(model.theta_star().clone());
        assert_eq!(gap_formula_non_causal(&u, &v, &r, &model).unwrap(), 0.0);
        assert_eq!(prediction_gap(&u, &v, &r).unwrap(), 0.0);
    }

    #[test]
    fn unfair_example_values() {
        let (u, v, model) = example_unfair_instance(2).unwrap();
        assert_eq!(similarity_distance(&u, &v, &model).unwrap(), 0.0);
        let r = AssessmentRule::from_slice(&[1.0 / 2f64.sqrt(), 0.3]);
        assert!((prediction_gap(&u, &v, &r).unwrap() - 1.0).abs() < 1e-12);

        let (u, v, model) = example_unfair_instance(4).unwrap();
        let r = AssessmentRule::from_slice(&[0.5, 0.5, -2.0, 9.0]);
        assert!((prediction_gap(&u, &v, &r).unwrap() - 2.0).abs() < 1e-12);
        assert!((gap_formula_non_causal(&u, &v, &r, &model).unwrap() - 2.0).abs() < 1e-12);

        assert!(example_unfair_instance(3).is_err());
        assert!(example_unfair_instance(0).is_err());
    }

    fn example_population(n: usize) -> PopulationSpec {
        let (u, v, model) = example_unfair_instance(n).unwrap();
        let mut a = SubpopulationSpec::degenerate("u", u.baseline_features, u.effort_matrix, 0.0);
        let mut b = SubpopulationSpec::degenerate("u'", v.baseline_features, v.effort_matrix, 0.0);
        a.mixture_weight = 0.5;
        b.mixture_weight = 0.5;
        PopulationSpec::new(model, n, vec![a, b]).unwrap()
    }

    #[test]
    fn audits() {
        let (spec, _) = admissions_spec();
        let star = AssessmentRule::new(spec.causal.theta_star().clone());
        let s = audit_population(&spec, &star, 500, 1).unwrap();
        assert_eq!(s.violations, 0);
        assert!((s.theta_star_norm - 0.5).abs() < 1e-15);

        let single = PopulationSpec::homogeneous(
            CausalModel::from_slice(&[0.0, 1.0]),
            dvector![1.0, 2.0],
            DMatrix::identity(2, 2),
            0.0,
        )
        .unwrap();
        let s = audit_population(&single, &AssessmentRule::from_slice(&[3.0, -1.0]), 50, 2).unwrap();
        assert_eq!((s.violations, s.worst_pair.gap, s.max_ratio), (0, 0.0, Some(0.0)));

        let n = 4;
        let spec = example_population(n);
        let uniform = AssessmentRule::new(DVector::from_element(n, 1.0 / (n as f64).sqrt()));
        let s = audit_between_groups(&spec, 0, 1, &uniform, 20, 3).unwrap();
        assert_eq!(s.violation_rate, 1.0);
        assert_eq!(s.max_ratio, None);
        let mixed = audit_population(&spec, &uniform, 200, 3).unwrap();
        assert!(mixed.violation_rate > 0.3 && mixed.violation_rate < 0.7);

        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<AuditSummary>(&json).unwrap(), s);
        assert!(audit_population(&spec, &uniform, 0, 3).is_err());
        assert!(audit_between_groups(&spec, 0, 2, &uniform, 1, 3).is_err());
    }

    fn random_agent(m: usize) -> impl Strategy<Value = AgentType> {
        (
            proptest::collection::vec(-3.0..3.0f64, m),
            proptest::collection::vec(-2.0..2.0f64, m * m),
            -5.0..5.0f64,
        )
            .prop_map(move |(b, e, o)| {
                AgentType::new(DVector::from_vec(b), DMatrix::from_row_slice(m, m, &e), o).unwrap()
            })
    }

    proptest! {
        #[test]
        fn metric_symmetry_and_identity(
            (u, v) in (random_agent(3), random_agent(3)),
            support in proptest::sample::subsequence(vec![0usize, 1, 2], 0..=3),
        ) {
            let mut ts = DVector::zeros(3);
            for &i in &support { ts[i] = 1.0; }
            let model = CausalModel::new(ts);
            let a = similarity_distance(&u, &v, &model).unwrap();
            let b = similarity_distance(&v, &u, &model).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            prop_assert_eq!(similarity_distance(&u, &u, &model).unwrap(), 0.0);
        }

        #[test]
        fn report_ignores_offsets_and_intercept(
            (u, v) in (random_agent(2), random_agent(2)),
            shift in -4.0..4.0f64,
            w in proptest::collection::vec(-1.0..1.0f64, 2),
        ) {
            let model = CausalModel::from_slice(&[0.0, 1.0]);
            let rule = AssessmentRule::new(DVector::from_vec(w));
            let base = fairness_report(&u, &v, &rule, &model).unwrap();
            let mut u2 = u.clone();
            u2.outcome_offset += shift;
            let shifted = AssessmentRule::with_intercept(rule.weights.clone(), shift);
            prop_assert_eq!(fairness_report(&u2, &v, &shifted, &model).unwrap(), base);
        }

        #[test]
        fn satisfied_iff_gap_within_distance((u, v) in (random_agent(2), random_agent(2))) {
            let model = CausalModel::from_slice(&[0.6, 0.8]);
            let r = fairness_report(&u, &v, &AssessmentRule::from_slice(&[1.0, -1.0]), &model).unwrap();
            prop_assert_eq!(r.satisfied, r.gap <= r.distance + SATISFACTION_TOLERANCE);
            prop_assert!((r.distance - r.baseline_term - r.matrix_term).abs() < 1e-12);
        }
    }
}
