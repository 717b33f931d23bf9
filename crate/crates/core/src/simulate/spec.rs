use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentType, CausalModel};
use crate::serde_util;

/// Tolerance on the sum of mixture weights.
pub const MIXTURE_TOLERANCE: f64 = 1e-12;

/// Perturbation of one effort-matrix entry by `sign * |N(mean, stddev)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffortNoise {
    /// Zero-based row index.
    pub row: usize,
    /// Zero-based column index.
    pub col: usize,
    pub mean: f64,
    pub stddev: f64,
    /// `+1` raises the entry, `-1` lowers it.
    pub sign: i8,
}

/// Generative parameters of one group of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubpopulationSpec {
    pub label: String,
    pub mixture_weight: f64,
    #[serde(with = "serde_util::dvector")]
    pub baseline_mean: DVector<f64>,
    #[serde(with = "serde_util::dvector")]
    pub baseline_stddev: DVector<f64>,
    /// Optional `[lo, hi]` clamp per baseline coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_clamp: Option<Vec<Option<[f64; 2]>>>,
    #[serde(with = "serde_util::dmatrix")]
    pub effort_matrix_mean: DMatrix<f64>,
    #[serde(default)]
    pub effort_noise: Vec<EffortNoise>,
    pub offset_mean: f64,
    pub offset_stddev: f64,
}

/// Mixture of subpopulations plus the causal model shared by all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub m: usize,
    pub d: usize,
    pub causal: CausalModel,
    pub groups: Vec<SubpopulationSpec>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl SubpopulationSpec {
    /// A group whose every agent is exactly `(b, e, o)`.
    pub fn degenerate(label: &str, b: DVector<f64>, e: DMatrix<f64>, o: f64) -> Self {
        let m = b.len();
        Self {
            label: label.to_string(),
            mixture_weight: 1.0,
            baseline_mean: b,
            baseline_stddev: DVector::zeros(m),
            baseline_clamp: None,
            effort_matrix_mean: e,
            effort_noise: Vec::new(),
            offset_mean: o,
            offset_stddev: 0.0,
        }
    }

    fn validate(&self, m: usize, d: usize) -> Result<()> {
        let name = &self.label;
        if !(0.0..=1.0).contains(&self.mixture_weight) {
            return Err(invalid(format!(
                "group {name}: mixture weight {} outside [0, 1]",
                self.mixture_weight
            )));
        }
        if self.baseline_mean.len() != m || self.baseline_stddev.len() != m {
            return Err(invalid(format!("group {name}: baseline vectors must have length {m}")));
        }
        if self.effort_matrix_mean.shape() != (m, d) {
            let (r, c) = self.effort_matrix_mean.shape();
            return Err(invalid(format!(
                "group {name}: effort matrix is {r}x{c}, expected {m}x{d}"
            )));
        }
        if !self.baseline_mean.iter().all(|v| v.is_finite())
            || !self.effort_matrix_mean.iter().all(|v| v.is_finite())
            || !self.offset_mean.is_finite()
        {
            return Err(invalid(format!("group {name}: non-finite mean")));
        }
        if !self.baseline_stddev.iter().all(|&s| finite_nonneg(s)) || !finite_nonneg(self.offset_stddev) {
            return Err(invalid(format!("group {name}: stddev entries must be finite and >= 0")));
        }
        if let Some(clamp) = &self.baseline_clamp {
            if clamp.len() != m {
                return Err(invalid(format!("group {name}: clamp list must have length {m}")));
            }
            for [lo, hi] in clamp.iter().flatten() {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(invalid(format!("group {name}: clamp [{lo}, {hi}] has lo > hi")));
                }
            }
        }
        for n in &self.effort_noise {
            if n.row >= m || n.col >= d {
                return Err(invalid(format!(
                    "group {name}: effort noise entry ({}, {}) outside {m}x{d}",
                    n.row, n.col
                )));
            }
            if !n.mean.is_finite() || !finite_nonneg(n.stddev) {
                return Err(invalid(format!(
                    "group {name}: effort noise parameters must be finite, stddev >= 0"
                )));
            }
            if n.sign != 1 && n.sign != -1 {
                return Err(invalid(format!("group {name}: effort noise sign must be +1 or -1")));
            }
        }
        Ok(())
    }

    fn clamp_of(&self, i: usize) -> Option<[f64; 2]> {
        self.baseline_clamp.as_ref().and_then(|c| c[i])
    }

    /// Draws one agent. The number and order of draws is fixed so streams stay aligned.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> AgentType {
        let m = self.baseline_mean.len();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        let b = DVector::from_fn(m, |i, _| {
            let v = self.baseline_mean[i] + self.baseline_stddev[i] * std_normal.sample(rng);
            match self.clamp_of(i) {
                Some([lo, hi]) => v.clamp(lo, hi),
                None => v,
            }
        });
        let mut e = self.effort_matrix_mean.clone();
        for n in &self.effort_noise {
            let mag = (n.mean + n.stddev * std_normal.sample(rng)).abs();
            e[(n.row, n.col)] += f64::from(n.sign) * mag;
        }
        let o = self.offset_mean + self.offset_stddev * std_normal.sample(rng);
        AgentType {
            baseline_features: b,
            effort_matrix: e,
            outcome_offset: o,
        }
    }
}

impl PopulationSpec {
    pub fn new(causal: CausalModel, d: usize, groups: Vec<SubpopulationSpec>) -> Result<Self> {
        let spec = Self {
            m: causal.dim(),
            d,
            causal,
            groups,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single-type population: every agent is `(b, e, o)`.
    pub fn homogeneous(causal: CausalModel, b: DVector<f64>, e: DMatrix<f64>, o: f64) -> Result<Self> {
        let d = e.ncols();
        Self::new(causal, d, vec![SubpopulationSpec::degenerate("all", b, e, o)])
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.d == 0 {
            return Err(invalid("m and d must be at least 1"));
        }
        if self.causal.dim() != self.m {
            return Err(invalid(format!(
                "theta_star has length {}, expected m = {}",
                self.causal.dim(),
                self.m
            )));
        }
        if !self.causal.theta_star().iter().all(|v| v.is_finite()) {
            return Err(invalid("theta_star has non-finite entries"));
        }
        if self.groups.is_empty() {
            return Err(invalid("at least one group is required"));
        }
        for g in &self.groups {
            g.validate(self.m, self.d)?;
        }
        let total: f64 = self.groups.iter().map(|g| g.mixture_weight).sum();
        if (total - 1.0).abs() > MIXTURE_TOLERANCE {
            return Err(invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }

    fn pick_group(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, g) in self.groups.iter().enumerate() {
            acc += g.mixture_weight;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave the cumulative sum a hair below 1.
        self.groups
            .iter()
            .rposition(|g| g.mixture_weight > 0.0)
            .unwrap_or(self.groups.len() - 1)
    }
}

/// Draws one agent from group `g`.
pub fn sample_from_group<R: Rng + ?Sized>(spec: &PopulationSpec, g: usize, rng: &mut R) -> Result<AgentType> {
    spec.groups
        .get(g)
        .map(|grp| grp.sample(rng))
        .ok_or(Error::IndexOutOfRange {
            index: g,
            len: spec.groups.len(),
        })
}

/// Draws one agent and the index of its group.
///
/// `spec` is assumed valid; call [`PopulationSpec::validate`] first when it
/// comes from untrusted input.
pub fn sample_agent<R: Rng + ?Sized>(spec: &PopulationSpec, rng: &mut R) -> (AgentType, usize) {
    let u: f64 = rng.random();
    let g = spec.pick_group(u);
    (spec.groups[g].sample(rng), g)
}
