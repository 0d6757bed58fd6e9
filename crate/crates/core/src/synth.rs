//! Synthetic domains drifting around a cycle.
//!
//! Phase `t` of a scenario with period `P` draws isotropic Gaussian
//! features. In [`DriftMode::Mean`] the mean moves on a circle of radius
//! `A` in the first two coordinates; in [`DriftMode::Variance`] the mean
//! stays fixed and the standard deviation becomes `σ (1 + A |sin(π t / P)|)`.
//! Noise is keyed on `t mod P`, so phases `t` and `t + P` are identical.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::feature::{DomainSnapshot, FeatureError, FeatureSet};
use crate::rng::{level_index, RngSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DriftMode {
    Mean,
    Variance,
}

impl std::str::FromStr for DriftMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(DriftMode::Mean),
            "variance" => Ok(DriftMode::Variance),
            _ => Err(format!("unknown drift mode '{s}' (expected mean or variance)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftScenario {
    /// `(level, dim)` pairs.
    pub levels: Vec<(i32, usize)>,
    pub samples_per_domain: usize,
    pub cycle_length: u64,
    pub amplitude: f64,
    /// Per-level base mean; levels missing here are centred at the origin.
    pub base_mean: BTreeMap<i32, Vec<f64>>,
    pub base_cov_scale: f64,
    pub noise_seed: RngSpec,
    pub mode: DriftMode,
}

impl DriftScenario {
    /// Mean-drift scenario with zero base mean.
    pub fn new(
        levels: Vec<(i32, usize)>,
        samples_per_domain: usize,
        cycle_length: u64,
        amplitude: f64,
        base_cov_scale: f64,
        seed: u64,
    ) -> Self {
        Self {
            levels,
            samples_per_domain,
            cycle_length,
            amplitude,
            base_mean: BTreeMap::new(),
            base_cov_scale,
            noise_seed: RngSpec::new(seed),
            mode: DriftMode::Mean,
        }
    }

    pub fn with_mode(mut self, mode: DriftMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidScenario(msg));
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if self.cycle_length < 2 {
            return bad(format!("cycle_length must be >= 2, got {}", self.cycle_length));
        }
        if self.samples_per_domain < 2 {
            return bad(format!("samples_per_domain must be >= 2, got {}", self.samples_per_domain));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be finite and >= 0, got {}", self.amplitude));
        }
        if !(self.base_cov_scale > 0.0 && self.base_cov_scale.is_finite()) {
            return bad(format!("sigma must be finite and > 0, got {}", self.base_cov_scale));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(level, dim) in &self.levels {
            if !seen.insert(level) {
                return bad(format!("level {level} listed twice"));
            }
            if dim < 2 {
                return bad(format!("level {level}: dim must be >= 2, got {dim}"));
            }
            if let Some(m) = self.base_mean.get(&level) {
                if m.len() != dim {
                    return bad(format!("level {level}: base mean has {} entries, dim is {dim}", m.len()));
                }
            }
        }
        Ok(())
    }

    /// Mean of level `level` at phase `t`.
    pub fn phase_mean(&self, level: i32, dim: usize, t: u64) -> Vec<f64> {
        let mut mean = self.base_mean.get(&level).cloned().unwrap_or_else(|| vec![0.0; dim]);
        if self.mode == DriftMode::Mean {
            let angle = 2.0 * PI * (t % self.cycle_length) as f64 / self.cycle_length as f64;
            mean[0] += self.amplitude * angle.cos();
            mean[1] += self.amplitude * angle.sin();
        }
        mean
    }

    /// Standard deviation at phase `t`.
    pub fn phase_sigma(&self, t: u64) -> f64 {
        match self.mode {
            DriftMode::Mean => self.base_cov_scale,
            DriftMode::Variance => {
                let s = (PI * (t % self.cycle_length) as f64 / self.cycle_length as f64).sin().abs();
                self.base_cov_scale * (1.0 + self.amplitude * s)
            }
        }
    }

    /// Size of the drift away from phase 0: distance between the means in
    /// mean mode, change of standard deviation in variance mode.
    pub fn true_drift(&self, t: u64) -> f64 {
        let s = (PI * (t % self.cycle_length) as f64 / self.cycle_length as f64).sin().abs();
        match self.mode {
            DriftMode::Mean => 2.0 * self.amplitude * s,
            DriftMode::Variance => self.base_cov_scale * self.amplitude * s,
        }
    }
}

pub fn domain_id_for_phase(phase: u64) -> String {
    format!("phase-{phase:03}")
}

pub fn gen_domain(scenario: &DriftScenario, t: u64) -> Result<DomainSnapshot, SynthError> {
    scenario.validate()?;
    let phase = t % scenario.cycle_length;
    let sigma = scenario.phase_sigma(phase);
    let n = scenario.samples_per_domain;
    let sets = scenario
        .levels
        .par_iter()
        .map(|&(level, dim)| {
            let mean = scenario.phase_mean(level, dim, phase);
            let mut rng = scenario
                .noise_seed
                .derive("synth", &[level_index(level), phase])
                .rng();
            let mut data = Vec::with_capacity(n * dim);
            for _ in 0..n {
                for &mu in &mean {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    data.push((mu + sigma * z) as f32);
                }
            }
            FeatureSet::new(level, dim, data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DomainSnapshot::new(domain_id_for_phase(phase), sets)?.with_meta("phase", phase.to_string()))
}

pub fn gen_schedule(scenario: &DriftScenario, phases: &[u64]) -> Result<Vec<DomainSnapshot>, SynthError> {
    if phases.is_empty() {
        return Err(SynthError::InvalidScenario("phase list is empty".into()));
    }
    phases.iter().map(|&t| gen_domain(scenario, t)).collect()
}
