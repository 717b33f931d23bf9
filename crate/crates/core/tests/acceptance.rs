//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use strategic_iv::estimators::{ols_fit, theta_error_bound, tsls_fit};
use strategic_iv::fairness::{example_unfair_instance, gap_formula_non_causal, prediction_gap, similarity_distance};
use strategic_iv::optimize::{
    expected_outcome, one_d_gradients, one_d_grid_minimizer, one_d_risk, outcome_maximizing_rule, population_gradient,
    population_risk, sgd_minimize_one_d, ConstraintSet, GradientKind, OneDPopulation, SgdConfig, StepSize,
};
use strategic_iv::simulate::{stream, Purpose};
use strategic_iv::{
    admissions_spec, run_simulation, AgentType, AssessmentRule, CausalModel, PopulationSpec, RuleSchedule,
    SubpopulationSpec,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn admissions_log(seed: u64, t: usize) -> strategic_iv::InteractionLog {
    let (spec, schedule) = admissions_spec();
    run_simulation(&spec, &schedule.with_horizon(t), seed).expect("admissions simulation")
}

fn theta_star() -> DVector<f64> {
    dvector![0.0, 0.5]
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;
const HORIZONS: [usize; 3] = [500, 2000, 5000];

fn ac1_exact_recovery() -> Outcome {
    let e = dmatrix![1.5, 0.2; -0.3, 0.9];
    let rules = RuleSchedule::FixedList {
        rules: [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
            .iter()
            .map(|r| AssessmentRule::from_slice(r))
            .collect(),
        horizon: 6,
    };
    let causal = CausalModel::from_slice(&[0.0, 0.5]);
    let confounded = PopulationSpec::homogeneous(causal.clone(), dvector![2.0, -1.0], e.clone(), 0.8).unwrap();
    let clean = PopulationSpec::homogeneous(causal, dvector![2.0, -1.0], e, 0.0).unwrap();
    let iv = tsls_fit(&run_simulation(&confounded, &rules, 1).unwrap()).unwrap();
    let ls = ols_fit(&run_simulation(&clean, &rules, 1).unwrap()).unwrap();
    let e_iv = (&iv.theta_hat - theta_star()).norm();
    let e_ls = (&ls.coefficients - theta_star()).norm();
    outcome(
        e_iv <= 1e-8 && e_ls <= 1e-8,
        format!("2sls err {e_iv:.2e}, ols (o = 0) err {e_ls:.2e}; tol 1e-8"),
    )
}

fn ac2_consistency() -> Outcome {
    let med: Vec<f64> = HORIZONS
        .iter()
        .map(|&t| {
            median(
                SEEDS
                    .map(|s| (tsls_fit(&admissions_log(s, t)).unwrap().theta_hat - theta_star()).norm())
                    .collect(),
            )
        })
        .collect();
    let decreasing = med.windows(2).all(|w| w[1] < w[0]);
    let ratio = med[0] / med[2];
    outcome(
        decreasing && ratio >= 2.0 && med[2] < 0.05,
        format!(
            "median 2sls err {:.4} / {:.4} / {:.4} at T = 500/2000/5000, ratio {ratio:.2} (>= 2), final < 0.05",
            med[0], med[1], med[2]
        ),
    )
}

fn ac3_ols_bias() -> Outcome {
    let mut sat_ols = Vec::new();
    let mut sat_iv = Vec::new();
    let mut err_ols_5000 = Vec::new();
    let mut err_ols_500 = Vec::new();
    for s in SEEDS {
        let log = admissions_log(s, 5000);
        let ls = ols_fit(&log).unwrap();
        sat_ols.push(ls.coefficients[0]);
        err_ols_5000.push((&ls.coefficients - theta_star()).norm());
        sat_iv.push(tsls_fit(&log).unwrap().theta_hat[0]);
        err_ols_500.push((ols_fit(&admissions_log(s, 500)).unwrap().coefficients - theta_star()).norm());
    }
    let sat = median(sat_ols);
    let iv_sat = median(sat_iv.clone());
    let iv_max = sat_iv.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let (e5000, e500) = (median(err_ols_5000), median(err_ols_500));
    let pass = (0.0002..=0.0008).contains(&sat) && iv_sat.abs() < 1e-4 && e5000 > 0.5 * e500;
    outcome(
        pass,
        format!(
            "median ols SAT coef {sat:.5} in [0.0002, 0.0008]; median 2sls SAT coef {iv_sat:.2e} (max |.| {iv_max:.2e}) < 1e-4; ols err {e5000:.4} at 5000 vs {e500:.4} at 500"
        ),
    )
}

fn offset_stddev(spec: &PopulationSpec) -> f64 {
    let mean: f64 = spec.groups.iter().map(|g| g.mixture_weight * g.offset_mean).sum();
    let second: f64 = spec
        .groups
        .iter()
        .map(|g| g.mixture_weight * (g.offset_stddev.powi(2) + g.offset_mean.powi(2)))
        .sum();
    (second - mean * mean).sqrt()
}

fn ac4_bound_validity() -> Outcome {
    let (spec, _) = admissions_spec();
    let sigma_g = offset_stddev(&spec);
    let mut covered = 0;
    let mut ratios = Vec::new();
    for s in 1..=200u64 {
        let fit = tsls_fit(&admissions_log(s, 2000)).unwrap();
        let err = (&fit.theta_hat - theta_star()).norm();
        let bound = theta_error_bound(&fit, Some(sigma_g), 0.05).unwrap().value;
        if bound > err {
            covered += 1;
        }
        ratios.push(bound / err);
    }
    outcome(
        covered >= 190,
        format!(
            "bound covers {covered}/200 runs at T = 2000 (>= 190), sigma_g {sigma_g:.4}, median bound/err {:.1}",
            median(ratios)
        ),
    )
}

fn random_homogeneous_population(index: u64) -> PopulationSpec {
    let mut rng = stream(2024, index, Purpose::Mc);
    let m = 1 + (index as usize % 3);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let e = DMatrix::from_fn(m, m, |_, _| normal());
    let ts = DVector::from_fn(m, |_, _| normal());
    let groups = (0..2)
        .map(|g| {
            let mut grp = SubpopulationSpec::degenerate(
                &format!("g{g}"),
                DVector::from_fn(m, |_, _| normal()),
                e.clone(),
                normal(),
            );
            grp.mixture_weight = 0.5;
            grp.baseline_stddev = DVector::from_fn(m, |_, _| 0.2 + normal().abs());
            grp.offset_stddev = 0.2 + normal().abs();
            grp
        })
        .collect();
    PopulationSpec::new(CausalModel::new(ts), m, groups).unwrap()
}

fn ac5_gradient_oracle() -> Outcome {
    let samples = 1_000_000;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut dims = Vec::new();
    for p in 0..5u64 {
        let spec = random_homogeneous_population(p);
        let m = spec.m;
        dims.push(m);
        let omega = spec.groups[0].effort_matrix_mean.clone() * spec.groups[0].effort_matrix_mean.transpose();
        let mut rng = stream(77, p, Purpose::Rule);
        let theta = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let rule = AssessmentRule::with_intercept(theta.clone(), rng.random_range(-1.0..1.0));
        let seed = 500 + p;
        let g = population_gradient(
            GradientKind::Corrected,
            &rule,
            &spec,
            &omega,
            spec.causal.theta_star(),
            samples,
            seed,
        )
        .unwrap();
        let fd = DVector::from_fn(m, |i, _| {
            let mut up = rule.clone();
            let mut dn = rule.clone();
            up.weights[i] += h;
            dn.weights[i] -= h;
            let fu = population_risk(&up, &spec, samples, seed).unwrap().mean;
            let fl = population_risk(&dn, &spec, samples, seed).unwrap().mean;
            (fu - fl) / (2.0 * h)
        });
        worst = worst.max((&g - &fd).norm() / fd.norm());
    }

    let pop = OneDPopulation::non_convex_example();
    let mut worst_1d: f64 = 0.0;
    for &th in &[-1.0, -0.25, 0.0, 0.5, 1.0, 1.7] {
        // Five-point central stencil; exact up to rounding for a quartic.
        let hh = 1e-3;
        let f = |d: f64| one_d_risk(&pop, th + d);
        let fd = (f(-2.0 * hh) - 8.0 * f(-hh) + 8.0 * f(hh) - f(2.0 * hh)) / (12.0 * hh);
        worst_1d = worst_1d.max((one_d_gradients(&pop, th).0 - fd).abs());
    }
    outcome(
        worst <= 1e-3 && worst_1d <= 1e-8,
        format!(
            "dims {dims:?}: max relative gap to finite differences {worst:.2e} (<= 1e-3); 1d analytic max abs gap {worst_1d:.2e} (<= 1e-8)"
        ),
    )
}

fn ac6_sgd_vs_ssgd() -> Outcome {
    let pop = OneDPopulation::non_convex_example();
    let (corrected, simple) = one_d_gradients(&pop, 0.5);
    let cfg = |kind| SgdConfig {
        initial_rule: dvector![0.5],
        steps: 1000,
        step_size: StepSize::Decaying { eta0: 0.001 },
        gradient_kind: kind,
        omega: dmatrix![pop.omega()],
        theta_reference: dvector![pop.theta_star],
        projection: None,
    };
    let good = sgd_minimize_one_d(&cfg(GradientKind::Corrected), &pop).unwrap();
    let bad = sgd_minimize_one_d(&cfg(GradientKind::Simple), &pop).unwrap();
    let (tg, tb) = (good.final_theta()[0], bad.final_theta()[0]);
    let (rg, rb) = (one_d_risk(&pop, tg), one_d_risk(&pop, tb));
    let (argmin, _) = one_d_grid_minimizer(&pop, -5.0, 5.0, 1_000_001);
    let pass = corrected.signum() != simple.signum() && rg < rb && (tg - argmin).abs() <= 0.1;
    outcome(
        pass,
        format!(
            "gradients at 0.5: corrected {corrected:.3}, simple {simple:.3}; final theta {tg:.4} (risk {rg:.3}) vs {tb:.4} (risk {rb:.3}); grid minimizer {argmin:.4}"
        ),
    )
}

/// Best objective over the unit sphere by grid search with local refinement.
fn sphere_search(lam: &DVector<f64>) -> f64 {
    match lam.len() {
        1 => lam[0].abs(),
        2 => {
            let n = 200_000;
            (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    lam[0] * a.cos() + lam[1] * a.sin()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        }
        3 => {
            let f = |p: f64, a: f64| lam[0] * p.sin() * a.cos() + lam[1] * p.sin() * a.sin() + lam[2] * p.cos();
            let (mut best, mut bp, mut ba) = (f64::NEG_INFINITY, 0.0, 0.0);
            let n = 400;
            for i in 0..=n {
                for j in 0..2 * n {
                    let p = std::f64::consts::PI * i as f64 / n as f64;
                    let a = std::f64::consts::PI * j as f64 / n as f64;
                    let v = f(p, a);
                    if v > best {
                        (best, bp, ba) = (v, p, a);
                    }
                }
            }
            let mut width = std::f64::consts::PI / n as f64;
            for _ in 0..8 {
                let (cp, ca) = (bp, ba);
                for i in -20..=20 {
                    for j in -20..=20 {
                        let p = cp + width * i as f64 / 20.0;
                        let a = ca + width * j as f64 / 20.0;
                        let v = f(p, a);
                        if v > best {
                            (best, bp, ba) = (v, p, a);
                        }
                    }
                }
                width /= 10.0;
            }
            best
        }
        _ => unreachable!(),
    }
}

fn ac7_outcome_maximizer() -> Outcome {
    let mut rng = stream(31, 0, Purpose::Rule);
    let mut worst_gap: f64 = 0.0;
    for k in 0..12 {
        let m = 1 + k % 3;
        let lam = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let unit = ConstraintSet::ball(1.0).unwrap();
        let closed = outcome_maximizing_rule(&lam, &unit).unwrap().weights.dot(&lam);
        worst_gap = worst_gap.max((closed - sphere_search(&lam)).abs());

        let lo = DVector::from_fn(m, |_, _| rng.random_range(-2.0..0.0));
        let hi = DVector::from_fn(m, |i, _| lo[i] + rng.random_range(0.0..3.0));
        let set = ConstraintSet::boxed(lo.clone(), hi.clone()).unwrap();
        let closed = outcome_maximizing_rule(&lam, &set).unwrap().weights.dot(&lam);
        let corners = (0..1u32 << m)
            .map(|mask| {
                (0..m)
                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] } * lam[i])
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst_gap = worst_gap.max((closed - corners).abs());
    }

    let (spec, schedule) = admissions_spec();
    let fit = tsls_fit(&run_simulation(&spec, &schedule, 11).unwrap()).unwrap();
    let unit = ConstraintSet::ball(1.0).unwrap();
    let best_rule = outcome_maximizing_rule(&fit.lambda_hat, &unit).unwrap();
    let samples = 20_000;
    let best = expected_outcome(&best_rule, &spec, samples, 5).unwrap();
    let mut dominated = 0;
    for _ in 0..100 {
        let raw = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
        let r: f64 = rng.random();
        let w = raw.normalize() * r.sqrt();
        let other = expected_outcome(&AssessmentRule::new(w), &spec, samples, 5).unwrap();
        if best.mean >= other.mean - 3.0 * other.stderr.max(best.stderr) {
            dominated += 1;
        }
    }
    outcome(
        worst_gap <= 1e-6 && dominated == 100,
        format!(
            "max objective gap to brute force {worst_gap:.2e} (<= 1e-6); E[y] {:.4} under the maximizer dominates {dominated}/100 random rules",
            best.mean
        ),
    )
}

fn random_agent(rng: &mut impl Rng, m: usize) -> AgentType {
    let mut normal = || -> f64 { StandardNormal.sample(rng) };
    AgentType::new(
        DVector::from_fn(m, |_, _| normal()),
        DMatrix::from_fn(m, m, |_, _| normal()),
        normal(),
    )
    .unwrap()
}

fn ac8_fairness() -> Outcome {
    let mut rng = stream(8, 0, Purpose::Pair);
    let mut violations = 0;
    for i in 0..1000 {
        let m = 2 + i % 4;
        let mut ts = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        for j in 0..m {
            if rng.random_bool(0.4) {
                ts[j] = 0.0;
            }
        }
        if ts.norm() == 0.0 {
            ts[0] = 1.0;
        }
        let ts = ts.normalize();
        let model = CausalModel::new(ts.clone());
        let (u, v) = (random_agent(&mut rng, m), random_agent(&mut rng, m));
        let gap = prediction_gap(&u, &v, &AssessmentRule::new(ts)).unwrap();
        if gap > similarity_distance(&u, &v, &model).unwrap() + 1e-12 {
            violations += 1;
        }
    }

    let mut worst_formula: f64 = 0.0;
    for i in 0..100 {
        let k = 1 + i % 3;
        let n = k + 1 + (i / 3) % 3;
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let a = DMatrix::from_fn(k, k, |_, _| normal());
        let b = DMatrix::from_fn(n - k, k, |_, _| normal());
        let b2 = DMatrix::from_fn(n - k, n - k, |_, _| normal());
        let mut e = DMatrix::zeros(n, n);
        e.view_mut((0, 0), (k, k)).copy_from(&a);
        e.view_mut((k, 0), (n - k, k)).copy_from(&b);
        let mut e2 = e.clone();
        e2.view_mut((k, k), (n - k, n - k)).copy_from(&b2);
        let base = DVector::from_fn(n, |_, _| normal());
        let mut base2 = base.clone();
        for j in k..n {
            base2[j] = normal();
        }
        let ts = DVector::from_fn(n, |j, _| if j < k { 0.5 + normal().abs() } else { 0.0 });
        let model = CausalModel::new(ts);
        let u = AgentType::new(base, e, normal()).unwrap();
        let v = AgentType::new(base2, e2, normal()).unwrap();
        let rule = AssessmentRule::with_intercept(DVector::from_fn(n, |_, _| normal()), normal());
        let direct = prediction_gap(&u, &v, &rule).unwrap();
        let formula = gap_formula_non_causal(&u, &v, &rule, &model).unwrap();
        worst_formula = worst_formula.max((direct - formula).abs());
    }

    let mut example_ok = true;
    let mut gaps = Vec::new();
    for n in [2usize, 4, 8, 16] {
        let (u, v, model) = example_unfair_instance(n).unwrap();
        let rule = AssessmentRule::new(DVector::from_element(n, 1.0 / (n as f64).sqrt()));
        let gap = prediction_gap(&u, &v, &rule).unwrap();
        let d = similarity_distance(&u, &v, &model).unwrap();
        example_ok &= (gap - n as f64 / 2.0).abs() <= 1e-12 * n as f64 && d == 0.0;
        gaps.push(gap);
    }
    outcome(
        violations == 0 && worst_formula <= 1e-10 && example_ok,
        format!(
            "theta_star violations {violations}/1000; non-causal formula max gap {worst_formula:.2e} (<= 1e-10); example gaps {gaps:?} for n = 2, 4, 8, 16"
        ),
    )
}

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("AC1", "exact recovery", ac1_exact_recovery),
        ("AC2", "2sls consistency rate", ac2_consistency),
        ("AC3", "ols bias", ac3_ols_bias),
        ("AC4", "error bound validity", ac4_bound_validity),
        ("AC5", "gradient oracle", ac5_gradient_oracle),
        ("AC6", "sgd vs ssgd", ac6_sgd_vs_ssgd),
        ("AC7", "outcome maximizer", ac7_outcome_maximizer),
        ("AC8", "fairness theorems", ac8_fairness),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| id.contains(f.as_str()) || name.contains(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{id} {status} {name} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
}
