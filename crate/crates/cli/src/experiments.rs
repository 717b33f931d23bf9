//! Reproduction experiments. Each writes CSV tables, SVG figures rendered
//! from those tables, and a JSON summary into the output directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;
use strategic_iv::estimators::{ols_fit, tsls_fit};
use strategic_iv::fairness::{audit_population, AuditSummary};
use strategic_iv::optimize::{
    expected_outcome, one_d_gradients, one_d_grid_minimizer, one_d_risk, outcome_maximizing_rule, sgd_minimize_one_d,
    ConstraintSet, GradientKind, OneDPopulation, SgdConfig, StepSize,
};
use strategic_iv::simulate::moments::expected_outcome_closed_form;
use strategic_iv::simulate::{stream, Purpose};
use strategic_iv::{run_simulation, AssessmentRule, DMatrix, DVector, InteractionLog, PopulationSpec, RuleSchedule};

use crate::config::ExperimentConfig;
use crate::plot::{render, Figure, Series};
use crate::table::Table;
use crate::UsageError;

/// Monte-Carlo samples per expected-outcome estimate.
pub const OUTCOME_SAMPLES: usize = 20_000;
/// Random comparison rules per seed in the outcome experiment.
pub const RANDOM_RULES: usize = 100;
/// Agent pairs per fairness audit.
pub const AUDIT_PAIRS: usize = 1000;
/// Checkpoints along the horizon in the coefficient-trajectory experiment.
pub const CHECKPOINTS: usize = 20;

/// A figure and the table file it is drawn from.
pub struct FigureOutput {
    pub table: &'static str,
    pub svg: &'static str,
    pub figure: Figure,
}

fn caption(cfg: &ExperimentConfig) -> String {
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    format!("seeds: {}", seeds.join(", "))
}

fn figure(title: &str, x: &str, x_label: &str, y_label: &str, series: Vec<Series>, cfg: &ExperimentConfig) -> Figure {
    Figure {
        title: title.into(),
        x: x.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series,
        caption: caption(cfg),
    }
}

/// Figures each experiment draws, keyed by the table they read.
pub fn figures(cfg: &ExperimentConfig) -> Vec<FigureOutput> {
    match cfg.experiment.as_str() {
        "estimate-convergence" => vec![FigureOutput {
            table: "convergence.csv",
            svg: "convergence.svg",
            figure: figure(
                "Estimation error vs rounds",
                "T",
                "rounds T",
                "|theta_hat - theta*|",
                vec![
                    Series::line("2SLS median", "tsls_median").band("tsls_min", "tsls_max"),
                    Series::line("OLS median", "ols_median").band("ols_min", "ols_max"),
                    Series::line("c / sqrt(T)", "reference").dashed(),
                ],
                cfg,
            ),
        }],
        "ols-vs-2sls" => vec![FigureOutput {
            table: "coefficients.csv",
            svg: "coefficients.svg",
            figure: figure(
                "First-feature coefficient estimate",
                "T",
                "rounds T",
                "estimated coefficient",
                vec![
                    Series::line("OLS median", "ols_theta1_median").band("ols_theta1_min", "ols_theta1_max"),
                    Series::line("2SLS median", "tsls_theta1_median").band("tsls_theta1_min", "tsls_theta1_max"),
                    Series::line("true coefficient", "reference").dashed(),
                ],
                cfg,
            ),
        }],
        "sgd-vs-ssgd" => vec![
            FigureOutput {
                table: "trajectory.csv",
                svg: "trajectory.svg",
                figure: figure(
                    "Risk minimization iterates",
                    "t",
                    "step",
                    "theta",
                    vec![
                        Series::line("corrected gradient", "theta_corrected"),
                        Series::line("simple gradient", "theta_simple"),
                        Series::line("global minimizer", "global_minimizer").dashed(),
                    ],
                    cfg,
                ),
            },
            FigureOutput {
                table: "risk_curve.csv",
                svg: "risk_curve.svg",
                figure: figure(
                    "Predictive risk",
                    "theta",
                    "theta",
                    "risk",
                    vec![Series::line("risk", "risk")],
                    cfg,
                ),
            },
        ],
        "outcome-max" => vec![FigureOutput {
            table: "outcome.csv",
            svg: "outcome.svg",
            figure: figure(
                "Expected outcome under the outcome-maximizing rule",
                "seed",
                "seed",
                "E[y]",
                vec![
                    Series::line("maximizing rule", "ao_expected").points(),
                    Series::line("best random rule", "random_max").points(),
                    Series::line("mean random rule", "random_mean").points(),
                ],
                cfg,
            ),
        }],
        "fairness-audit" => vec![FigureOutput {
            table: "audit.csv",
            svg: "audit.svg",
            figure: figure(
                "Individual-fairness violation rate",
                "seed",
                "seed",
                "violation rate",
                vec![
                    Series::line("causal rule", "theta_star_violation_rate").points(),
                    Series::line("OLS rule", "ols_violation_rate").points(),
                ],
                cfg,
            ),
        }],
        _ => Vec::new(),
    }
}

/// Renders every figure of `cfg` from the CSV tables in `dir`.
pub fn render_figures(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<(PathBuf, String)>> {
    figures(cfg)
        .into_iter()
        .map(|f| {
            let table = Table::read(&dir.join(f.table))?;
            Ok((dir.join(f.svg), render(&f.figure, &table)?))
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn stddev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn stats(v: &[f64]) -> [f64; 4] {
    [median(v), stddev(v), min(v), max(v)]
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    population: PopulationSpec,
    schedule: Option<RuleSchedule>,
    out: &'a Path,
    written: Vec<PathBuf>,
}

impl Run<'_> {
    fn schedule(&self) -> Result<&RuleSchedule> {
        self.schedule.as_ref().ok_or_else(|| {
            UsageError("this experiment simulates logs; the population config needs a schedule".into()).into()
        })
    }

    fn simulate(&self, seed: u64, t: usize) -> Result<InteractionLog> {
        Ok(run_simulation(
            &self.population,
            &self.schedule()?.with_horizon(t),
            seed,
        )?)
    }

    fn theta_star(&self) -> &DVector<f64> {
        self.population.causal.theta_star()
    }

    fn max_horizon(&self) -> usize {
        *self.cfg.horizons.iter().max().expect("validated non-empty")
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        let p = self.out.join(name);
        t.write(&p)?;
        self.written.push(p);
        Ok(())
    }

    fn json(&mut self, name: &str, v: &serde_json::Value) -> Result<()> {
        let p = self.out.join(name);
        std::fs::write(&p, serde_json::to_string_pretty(v)? + "\n")
            .with_context(|| format!("writing {}", p.display()))?;
        self.written.push(p);
        Ok(())
    }

    fn figures(&mut self) -> Result<()> {
        for (path, svg) in render_figures(self.cfg, self.out)? {
            std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
            self.written.push(path);
        }
        Ok(())
    }
}

/// Runs the configured experiment and returns the files it wrote.
pub fn reproduce(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (population, schedule) = cfg.population.resolve()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
    let mut ctx = Run {
        cfg,
        population,
        schedule,
        out: &cfg.output_dir,
        written: Vec::new(),
    };
    match cfg.experiment.as_str() {
        "estimate-convergence" => estimate_convergence(&mut ctx)?,
        "ols-vs-2sls" => ols_vs_tsls(&mut ctx)?,
        "sgd-vs-ssgd" => sgd_vs_ssgd(&mut ctx)?,
        "outcome-max" => outcome_max(&mut ctx)?,
        "fairness-audit" => fairness_audit(&mut ctx)?,
        other => unreachable!("validated experiment id {other}"),
    }
    ctx.figures()?;
    Ok(ctx.written)
}

fn estimate_convergence(ctx: &mut Run) -> Result<()> {
    let cells: Vec<(usize, u64)> = ctx
        .cfg
        .horizons
        .iter()
        .flat_map(|&t| ctx.cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let errors: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&(t, s)| {
            let log = ctx.simulate(s, t)?;
            let ols = (ols_fit(&log)?.coefficients - ctx.theta_star()).norm();
            let iv = (tsls_fit(&log)?.theta_hat - ctx.theta_star()).norm();
            Ok((ols, iv))
        })
        .collect::<Result<_>>()?;

    let mut raw = Table::new(["T", "seed", "ols_error", "tsls_error"]);
    for (&(t, s), &(o, i)) in cells.iter().zip(&errors) {
        raw.push_nums(&[t as f64, s as f64, o, i]);
    }
    let mut summary = Table::new([
        "T",
        "tsls_median",
        "tsls_std",
        "tsls_min",
        "tsls_max",
        "ols_median",
        "ols_std",
        "ols_min",
        "ols_max",
        "reference",
    ]);
    let n = ctx.cfg.seeds.len();
    let mut anchor = None;
    let mut medians = Vec::new();
    for (k, &t) in ctx.cfg.horizons.iter().enumerate() {
        let block = &errors[k * n..(k + 1) * n];
        let ols: Vec<f64> = block.iter().map(|e| e.0).collect();
        let iv: Vec<f64> = block.iter().map(|e| e.1).collect();
        let (si, so) = (stats(&iv), stats(&ols));
        let c = *anchor.get_or_insert(si[0] * (t as f64).sqrt());
        medians.push(si[0]);
        let mut row = vec![t as f64];
        row.extend(si);
        row.extend(so);
        row.push(c / (t as f64).sqrt());
        summary.push_nums(&row);
    }
    ctx.table("errors.csv", &raw)?;
    ctx.table("convergence.csv", &summary)?;
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    ctx.json(
        "summary.json",
        &json!({
            "experiment": "estimate-convergence",
            "seeds": ctx.cfg.seeds,
            "horizons": ctx.cfg.horizons,
            "tsls_median_error": medians,
            "tsls_median_strictly_decreasing": decreasing,
        }),
    )
}

fn checkpoints(t_max: usize, min_t: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=CHECKPOINTS)
        .map(|k| (t_max * k).div_ceil(CHECKPOINTS).max(min_t))
        .filter(|&t| t <= t_max)
        .collect();
    v.dedup();
    v
}

fn ols_vs_tsls(ctx: &mut Run) -> Result<()> {
    let t_max = ctx.max_horizon();
    let points = checkpoints(t_max, ctx.population.m + 2);
    let per_seed: Vec<Vec<(f64, f64)>> = ctx
        .cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let log = ctx.simulate(s, t_max)?;
            points
                .iter()
                .map(|&t| {
                    let prefix = log.prefix(t);
                    Ok((ols_fit(&prefix)?.coefficients[0], tsls_fit(&prefix)?.theta_hat[0]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut raw = Table::new(["seed", "T", "ols_theta1", "tsls_theta1"]);
    for (s, series) in ctx.cfg.seeds.iter().zip(&per_seed) {
        for (&t, &(o, i)) in points.iter().zip(series) {
            raw.push_nums(&[*s as f64, t as f64, o, i]);
        }
    }
    let mut summary = Table::new([
        "T",
        "ols_theta1_median",
        "ols_theta1_min",
        "ols_theta1_max",
        "tsls_theta1_median",
        "tsls_theta1_min",
        "tsls_theta1_max",
        "reference",
    ]);
    let reference = ctx.theta_star()[0];
    let mut finals = (0.0, 0.0);
    for (k, &t) in points.iter().enumerate() {
        let ols: Vec<f64> = per_seed.iter().map(|s| s[k].0).collect();
        let iv: Vec<f64> = per_seed.iter().map(|s| s[k].1).collect();
        summary.push_nums(&[
            t as f64,
            median(&ols),
            min(&ols),
            max(&ols),
            median(&iv),
            min(&iv),
            max(&iv),
            reference,
        ]);
        finals = (median(&ols), median(&iv));
    }
    ctx.table("coefficient_runs.csv", &raw)?;
    ctx.table("coefficients.csv", &summary)?;
    ctx.json(
        "summary.json",
        &json!({
            "experiment": "ols-vs-2sls",
            "seeds": ctx.cfg.seeds,
            "horizon": t_max,
            "true_theta1": reference,
            "final_ols_theta1_median": finals.0,
            "final_tsls_theta1_median": finals.1,
        }),
    )
}

fn sgd_vs_ssgd(ctx: &mut Run) -> Result<()> {
    let pop = OneDPopulation::non_convex_example();
    let config = |kind| SgdConfig {
        initial_rule: DVector::from_element(1, 0.5),
        steps: 1000,
        step_size: StepSize::Decaying { eta0: 0.001 },
        gradient_kind: kind,
        omega: DMatrix::from_element(1, 1, pop.omega()),
        theta_reference: DVector::from_element(1, pop.theta_star),
        projection: None,
    };
    let good = sgd_minimize_one_d(&config(GradientKind::Corrected), &pop)?;
    let bad = sgd_minimize_one_d(&config(GradientKind::Simple), &pop)?;
    let (argmin, min_risk) = one_d_grid_minimizer(&pop, -5.0, 5.0, 1_000_001);

    let mut traj = Table::new([
        "t",
        "theta_corrected",
        "theta_simple",
        "risk_corrected",
        "risk_simple",
        "global_minimizer",
    ]);
    for (g, b) in good.points.iter().zip(&bad.points) {
        traj.push_nums(&[g.t as f64, g.theta[0], b.theta[0], g.risk_sample, b.risk_sample, argmin]);
    }
    let mut curve = Table::new(["theta", "risk"]);
    for i in 0..=300 {
        let th = -1.5 + 3.0 * i as f64 / 300.0;
        curve.push_nums(&[th, one_d_risk(&pop, th)]);
    }
    ctx.table("trajectory.csv", &traj)?;
    ctx.table("risk_curve.csv", &curve)?;

    let (tg, tb) = (good.final_theta()[0], bad.final_theta()[0]);
    let (c, s) = one_d_gradients(&pop, 0.5);
    ctx.json(
        "summary.json",
        &json!({
            "experiment": "sgd-vs-ssgd",
            "population": pop,
            "initial_theta": 0.5,
            "steps": 1000,
            "gradient_at_initial": {"corrected": c, "simple": s},
            "final_theta": {"corrected": tg, "simple": tb},
            "final_risk": {"corrected": one_d_risk(&pop, tg), "simple": one_d_risk(&pop, tb)},
            "global_minimizer": argmin,
            "global_min_risk": min_risk,
            "corrected_closer_to_global_minimizer": (tg - argmin).abs() < (tb - argmin).abs(),
        }),
    )
}

fn random_unit_ball_rule(seed: u64, index: usize, m: usize) -> AssessmentRule {
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream(seed, index as u64, Purpose::Rule);
    let dir = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng)).normalize();
    let r: f64 = rng.random();
    AssessmentRule::new(dir * r.powf(1.0 / m as f64))
}

struct OutcomeCell {
    rule: AssessmentRule,
    mean: f64,
    stderr: f64,
    closed_form: f64,
    randoms: Vec<(AssessmentRule, f64)>,
}

fn outcome_max(ctx: &mut Run) -> Result<()> {
    let t_max = ctx.max_horizon();
    let m = ctx.population.m;
    let unit = ConstraintSet::ball(1.0)?;
    let per_seed: Vec<OutcomeCell> = ctx
        .cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let fit = tsls_fit(&ctx.simulate(s, t_max)?)?;
            let rule = outcome_maximizing_rule(&fit.lambda_hat, &unit)?;
            let ao = expected_outcome(&rule, &ctx.population, OUTCOME_SAMPLES, s)?;
            let closed = expected_outcome_closed_form(&ctx.population, &rule.weights);
            let randoms = (0..RANDOM_RULES)
                .map(|k| {
                    let r = random_unit_ball_rule(s, k, m);
                    let e = expected_outcome(&r, &ctx.population, OUTCOME_SAMPLES, s)?.mean;
                    Ok((r, e))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OutcomeCell {
                rule,
                mean: ao.mean,
                stderr: ao.stderr,
                closed_form: closed,
                randoms,
            })
        })
        .collect::<Result<_>>()?;

    let mut cols = vec!["seed".to_string()];
    cols.extend((1..=m).map(|i| format!("ao_theta_{i}")));
    cols.extend(
        [
            "ao_expected",
            "ao_stderr",
            "ao_closed_form",
            "random_mean",
            "random_max",
        ]
        .map(String::from),
    );
    let mut table = Table::new(cols);
    let mut rcols = vec!["seed".to_string(), "index".to_string()];
    rcols.extend((1..=m).map(|i| format!("theta_{i}")));
    rcols.push("expected".into());
    let mut rtable = Table::new(rcols);
    let mut dominated = 0;
    for (&s, cell) in ctx.cfg.seeds.iter().zip(&per_seed) {
        let OutcomeCell {
            rule,
            mean,
            stderr: se,
            closed_form,
            randoms,
        } = cell;
        let values: Vec<f64> = randoms.iter().map(|r| r.1).collect();
        let mut row = vec![s as f64];
        row.extend(rule.weights.iter());
        row.extend([
            *mean,
            *se,
            *closed_form,
            values.iter().sum::<f64>() / values.len() as f64,
            max(&values),
        ]);
        table.push_nums(&row);
        for (k, (r, e)) in randoms.iter().enumerate() {
            let mut row = vec![s as f64, k as f64];
            row.extend(r.weights.iter());
            row.push(*e);
            rtable.push_nums(&row);
        }
        dominated += values.iter().filter(|&&v| *mean >= v - 3.0 * se).count();
    }
    ctx.table("outcome.csv", &table)?;
    ctx.table("random_rules.csv", &rtable)?;
    ctx.json(
        "summary.json",
        &json!({
            "experiment": "outcome-max",
            "seeds": ctx.cfg.seeds,
            "horizon": t_max,
            "constraint": unit,
            "monte_carlo_samples": OUTCOME_SAMPLES,
            "random_rules_per_seed": RANDOM_RULES,
            "random_rules_dominated": dominated,
            "random_rules_total": RANDOM_RULES * ctx.cfg.seeds.len(),
        }),
    )
}

fn ratio_cell(s: &AuditSummary) -> f64 {
    s.max_ratio.unwrap_or(f64::INFINITY)
}

fn fairness_audit(ctx: &mut Run) -> Result<()> {
    let t_max = ctx.max_horizon();
    let star = AssessmentRule::new(ctx.theta_star().clone());
    let per_seed: Vec<(AuditSummary, AuditSummary, DVector<f64>)> = ctx
        .cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let causal = audit_population(&ctx.population, &star, AUDIT_PAIRS, s)?;
            let ols_rule = match &ctx.schedule {
                Some(_) => AssessmentRule::new(ols_fit(&ctx.simulate(s, t_max)?)?.coefficients),
                None => return Err(UsageError("fairness-audit fits an OLS rule and needs a schedule".into()).into()),
            };
            let ols = audit_population(&ctx.population, &ols_rule, AUDIT_PAIRS, s)?;
            Ok((causal, ols, ols_rule.weights))
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new([
        "seed",
        "pairs",
        "theta_star_violation_rate",
        "theta_star_max_ratio",
        "ols_violation_rate",
        "ols_max_ratio",
    ]);
    let mut details = Vec::new();
    for (&s, (c, o, w)) in ctx.cfg.seeds.iter().zip(&per_seed) {
        table.push_nums(&[
            s as f64,
            AUDIT_PAIRS as f64,
            c.violation_rate,
            ratio_cell(c),
            o.violation_rate,
            ratio_cell(o),
        ]);
        details.push(json!({"seed": s, "theta_star": c, "ols": o, "ols_rule": w.as_slice()}));
    }
    ctx.table("audit.csv", &table)?;
    ctx.json(
        "summary.json",
        &json!({
            "experiment": "fairness-audit",
            "seeds": ctx.cfg.seeds,
            "theta_star": ctx.theta_star().as_slice(),
            "audits": details,
        }),
    )
}
