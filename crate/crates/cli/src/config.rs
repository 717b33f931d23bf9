use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use strategic_iv::simulate::SimulationConfig;
use strategic_iv::{admissions_spec, PopulationSpec, RuleSchedule};

/// A population given by name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PopulationSource {
    Named(String),
    Inline(Box<SimulationConfig>),
}

impl Default for PopulationSource {
    fn default() -> Self {
        PopulationSource::Named("admissions".into())
    }
}

impl PopulationSource {
    pub fn resolve(&self) -> Result<(PopulationSpec, Option<RuleSchedule>)> {
        match self {
            PopulationSource::Named(name) => load_population(name),
            PopulationSource::Inline(cfg) => {
                cfg.population.validate()?;
                cfg.schedule.validate(cfg.population.m)?;
                Ok((cfg.population.clone(), Some(cfg.schedule.clone())))
            }
        }
    }
}

/// Resolves `admissions` or a JSON file holding either `{population, schedule}`
/// or a bare population.
pub fn load_population(arg: &str) -> Result<(PopulationSpec, Option<RuleSchedule>)> {
    if arg == "admissions" {
        let (p, s) = admissions_spec();
        return Ok((p, Some(s)));
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("reading population config {arg}"))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))?;
    if value.get("population").is_some() {
        let cfg = SimulationConfig::from_json(&text).with_context(|| format!("invalid config {arg}"))?;
        Ok((cfg.population, Some(cfg.schedule)))
    } else {
        let spec: PopulationSpec =
            serde_json::from_value(value).with_context(|| format!("invalid population {arg}"))?;
        spec.validate()?;
        Ok((spec, None))
    }
}

pub const EXPERIMENTS: [&str; 5] = [
    "estimate-convergence",
    "ols-vs-2sls",
    "sgd-vs-ssgd",
    "outcome-max",
    "fairness-audit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub population: PopulationSource,
}

pub fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

pub fn default_horizons() -> Vec<usize> {
    vec![500, 2000, 5000]
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            seeds: default_seeds(),
            horizons: default_horizons(),
            output_dir: default_output(),
            population: PopulationSource::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid experiment config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            bail!(crate::UsageError(format!(
                "unknown experiment {:?}; expected one of {}",
                self.experiment,
                EXPERIMENTS.join(", ")
            )));
        }
        if self.seeds.is_empty() || self.horizons.is_empty() {
            bail!(crate::UsageError("seeds and horizons must be non-empty".into()));
        }
        if self.horizons.contains(&0) {
            bail!(crate::UsageError("horizons must be positive".into()));
        }
        Ok(())
    }
}
