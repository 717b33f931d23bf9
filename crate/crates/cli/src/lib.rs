//! Command-line harness for strategic-agent simulation, causal estimation,
//! rule optimization and fairness audits.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod table;

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use strategic_iv::estimators::theta_error_bound;
use strategic_iv::fairness::{audit_between_groups, audit_population};
use strategic_iv::optimize::{
    expected_outcome, outcome_maximizing_rule, sgd_minimize_one_d, sgd_minimize_risk, ConstraintSet, GradientKind,
    OneDPopulation, SgdConfig, StepSize,
};
use strategic_iv::simulate::moments::expected_effort_gram;
use strategic_iv::{
    ols_fit, read_log, run_simulation, tsls_fit, write_log, AssessmentRule, DMatrix, DVector, InteractionLog,
};

use config::{load_population, ExperimentConfig};

/// Bad command-line input detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "strategic-iv", version, about = "Causal estimation from strategic agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate agents responding to deployed rules and write the interaction log as CSV.
    Simulate(SimulateArgs),
    /// Fit OLS or two-stage least squares to an interaction log.
    Estimate(EstimateArgs),
    /// Choose rules that maximize outcomes or minimize predictive risk.
    #[command(subcommand)]
    Optimize(OptimizeCommand),
    /// Audit a rule for individual fairness over random agent pairs.
    Fairness(FairnessArgs),
    /// Run an experiment and write tables, figures and a summary.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `admissions` or a JSON file with `population` and `schedule`.
    #[arg(long, visible_alias = "config", default_value = "admissions")]
    pub population: String,
    /// Number of rounds; defaults to the schedule's horizon.
    #[arg(short = 'T', long = "horizon")]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ols,
    #[value(name = "2sls")]
    Tsls,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Interaction log CSV.
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, value_enum, default_value = "2sls")]
    pub method: Method,
    /// Failure probability for the error bound, which holds with probability `1 - 6 delta`.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Sub-Gaussian parameter of the outcome offset; the stage-2 residual spread when omitted.
    #[arg(long)]
    pub sigma_g: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum OptimizeCommand {
    /// Fit 2SLS to a log and return the outcome-maximizing rule in an L2 ball.
    Outcome(OutcomeArgs),
    /// Run projected SGD on predictive risk and write the trajectory as CSV.
    Risk(RiskArgs),
}

#[derive(Debug, Args)]
pub struct OutcomeArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Monte-Carlo samples for the expected outcome under `--population`; skipped when omitted.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, visible_alias = "config", default_value = "admissions")]
    pub population: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Gradient {
    Corrected,
    Simple,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    #[arg(long, visible_alias = "config", default_value = "admissions")]
    pub population: String,
    /// Use the one-dimensional non-convex example with exact expected gradients.
    #[arg(long, conflicts_with_all = ["population", "log"])]
    pub one_d: bool,
    /// Take `omega` and the reference rule from a 2SLS fit of this log instead of the population.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "corrected")]
    pub gradient: Gradient,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Step size `eta0 / sqrt(t)`.
    #[arg(long, default_value_t = 0.001)]
    pub eta0: f64,
    /// Use `eta0` at every step instead of decaying it.
    #[arg(long)]
    pub constant_step: bool,
    /// Comma-separated initial rule; zeros when omitted (0.5 for `--one-d`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// Project onto the L2 ball of this radius after each step.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FairnessArgs {
    #[arg(long, visible_alias = "config", default_value = "admissions")]
    pub population: String,
    /// Comma-separated rule weights; the causal rule when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Draw pairs across two group labels, e.g. `--groups a,b`.
    #[arg(long, value_delimiter = ',')]
    pub groups: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// One of estimate-convergence, ols-vs-2sls, sgd-vs-ssgd, outcome-max, fairness-audit.
    #[arg(long, required_unless_present = "config")]
    pub experiment: Option<String>,
    /// Experiment config JSON; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub horizons: Option<Vec<usize>>,
    #[arg(long)]
    pub population: Option<String>,
    #[arg(long, visible_aliases = ["out", "out-dir"])]
    pub output_dir: Option<PathBuf>,
}

/// Maps an error to the process exit code: 2 for numerical failures,
/// 3 for I/O failures and 1 for anything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<strategic_iv::Error>() {
            if e.is_numerical() {
                return 2;
            }
            if matches!(e, strategic_iv::Error::Io(_)) {
                return 3;
            }
            return 1;
        }
        if cause.is::<io::Error>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { 3 } else { 1 };
        }
    }
    1
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Optimize(OptimizeCommand::Outcome(a)) => optimize_outcome(a),
        Command::Optimize(OptimizeCommand::Risk(a)) => optimize_risk(a),
        Command::Fairness(a) => fairness(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_log(path: &Path) -> Result<InteractionLog> {
    let f = File::open(path).with_context(|| format!("opening log {}", path.display()))?;
    read_log(BufReader::new(f)).with_context(|| format!("reading log {}", path.display()))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let (spec, schedule) = load_population(&a.population)?;
    let schedule = schedule.ok_or_else(|| UsageError(format!("{} has no rule schedule", a.population)))?;
    let schedule = match a.horizon {
        Some(t) => schedule.with_horizon(t),
        None => schedule,
    };
    let log = run_simulation(&spec, &schedule, a.seed)?;
    let mut w = output(a.out.as_deref())?;
    write_log(&log, &mut w)?;
    w.flush()?;
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let log = load_log(&a.log)?;
    let value = match a.method {
        Method::Ols => json!({"method": "ols", "rounds": log.len(), "fit": ols_fit(&log)?}),
        Method::Tsls => {
            let fit = tsls_fit(&log)?;
            let bound = match theta_error_bound(&fit, a.sigma_g, a.delta) {
                Ok(b) => json!(b),
                Err(strategic_iv::Error::VacuousBound { .. }) => json!("vacuous"),
                Err(e) => return Err(e.into()),
            };
            json!({"method": "2sls", "rounds": log.len(), "fit": fit, "bound": bound})
        }
    };
    emit_json(a.out.as_deref(), &value)
}

fn optimize_outcome(a: OutcomeArgs) -> Result<()> {
    let log = load_log(&a.log)?;
    let fit = tsls_fit(&log)?;
    let set = ConstraintSet::ball(a.radius)?;
    let rule = outcome_maximizing_rule(&fit.lambda_hat, &set)?;
    let mut value = json!({
        "rule": rule.weights.as_slice(),
        "lambda_hat": fit.lambda_hat.as_slice(),
        "constraint": set,
    });
    if let Some(n) = a.samples {
        let (spec, _) = load_population(&a.population)?;
        value["expected_outcome"] = json!(expected_outcome(&rule, &spec, n, a.seed)?);
    }
    emit_json(a.out.as_deref(), &value)
}

fn optimize_risk(a: RiskArgs) -> Result<()> {
    let step_size = if a.constant_step {
        StepSize::Constant { eta: a.eta0 }
    } else {
        StepSize::Decaying { eta0: a.eta0 }
    };
    let gradient_kind = match a.gradient {
        Gradient::Corrected => GradientKind::Corrected,
        Gradient::Simple => GradientKind::Simple,
    };
    let projection = a.radius.map(ConstraintSet::ball).transpose()?;
    let trajectory = if a.one_d {
        let pop = OneDPopulation::non_convex_example();
        let config = SgdConfig {
            initial_rule: DVector::from_vec(a.initial.unwrap_or_else(|| vec![0.5])),
            steps: a.steps,
            step_size,
            gradient_kind,
            omega: DMatrix::from_element(1, 1, pop.omega()),
            theta_reference: DVector::from_element(1, pop.theta_star),
            projection,
        };
        sgd_minimize_one_d(&config, &pop)?
    } else {
        let (spec, _) = load_population(&a.population)?;
        let (omega, theta_reference) = match &a.log {
            Some(p) => {
                let fit = tsls_fit(&load_log(p)?)?;
                (fit.omega_hat, fit.theta_hat)
            }
            None => (expected_effort_gram(&spec), spec.causal.theta_star().clone()),
        };
        let config = SgdConfig {
            initial_rule: a.initial.map_or_else(|| DVector::zeros(spec.m), DVector::from_vec),
            steps: a.steps,
            step_size,
            gradient_kind,
            omega,
            theta_reference,
            projection,
        };
        sgd_minimize_risk(&config, &spec, a.seed)?
    };
    let mut w = output(a.out.as_deref())?;
    trajectory.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn fairness(a: FairnessArgs) -> Result<()> {
    let (spec, _) = load_population(&a.population)?;
    let rule = match a.rule {
        Some(w) => AssessmentRule::new(DVector::from_vec(w)),
        None => AssessmentRule::new(spec.causal.theta_star().clone()),
    };
    let summary = match &a.groups {
        Some(g) => {
            if g.len() != 2 {
                return Err(UsageError(format!("--groups takes two labels, got {}", g.len())).into());
            }
            let labels = spec.labels();
            let find = |name: &str| {
                labels
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| UsageError(format!("unknown group {name:?}; known: {}", labels.join(", "))))
            };
            audit_between_groups(&spec, find(&g[0])?, find(&g[1])?, &rule, a.pairs, a.seed)?
        }
        None => audit_population(&spec, &rule, a.pairs, a.seed)?,
    };
    emit_json(a.out.as_deref(), &json!(summary))
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    let mut cfg = match (&a.config, &a.experiment) {
        (Some(p), _) => ExperimentConfig::from_file(p)?,
        (None, Some(e)) => ExperimentConfig::new(e),
        (None, None) => unreachable!("clap requires one of --experiment or --config"),
    };
    if let (Some(_), Some(e)) = (&a.config, &a.experiment) {
        cfg.experiment = e.clone();
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(h) = a.horizons {
        cfg.horizons = h;
    }
    if let Some(p) = a.population {
        cfg.population = config::PopulationSource::Named(p);
    }
    if let Some(d) = a.output_dir {
        cfg.output_dir = d;
    }
    for path in experiments::reproduce(&cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}
