//! Gap-gated continual adaptation.
//!
//! Each incoming target domain is compared against the current training
//! pool. Domains whose gap falls strictly below the threshold are skipped;
//! the rest trigger an adaptation, which merges them into the pool and
//! costs `adapt_cost_units`. Every evaluation costs `eval_cost_units`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::feature::{merge_snapshots, reservoir_subsample, DomainSnapshot, FeatureError};
use crate::metrics::{compute_gap, sample_banks, BankSet, GapError, GapReport, Metric, DEFAULT_PROJECTIONS};
use crate::rng::{level_index, RngSpec};

/// Threshold used by the reference gating experiments.
pub const DEFAULT_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatingError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("gap was measured with {gap} but the policy uses {policy}")]
    MetricMismatch { gap: Metric, policy: Metric },
    #[error("target schedule is empty")]
    EmptySchedule,
    #[error("threshold list is empty")]
    NoThresholds,
    #[error(transparent)]
    Gap(#[from] GapError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// What the gap is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PoolMode {
    /// Source plus every adapted target.
    Accumulate,
    /// Always the original source; the pool never changes.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GatingPolicy {
    pub metric: Metric,
    pub threshold: f64,
    pub m: usize,
    pub pool_cap: Option<usize>,
    pub adapt_cost_units: f64,
    pub eval_cost_units: f64,
    pub pool_mode: PoolMode,
}

impl GatingPolicy {
    pub fn new(metric: Metric, threshold: f64) -> Self {
        Self {
            metric,
            threshold,
            m: DEFAULT_PROJECTIONS,
            pool_cap: None,
            adapt_cost_units: 1.0,
            eval_cost_units: 0.0,
            pool_mode: PoolMode::Accumulate,
        }
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self {
            threshold,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GatingError> {
        let bad = |msg: String| Err(GatingError::InvalidPolicy(msg));
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return bad(format!("threshold must be >= 0, got {}", self.threshold));
        }
        if self.m == 0 {
            return bad("m must be >= 1".into());
        }
        if self.pool_cap == Some(0) {
            return bad("pool_cap must be >= 1 when set".into());
        }
        if !(self.adapt_cost_units > 0.0 && self.adapt_cost_units.is_finite()) {
            return bad(format!("adapt_cost_units must be > 0, got {}", self.adapt_cost_units));
        }
        if !(self.eval_cost_units >= 0.0 && self.eval_cost_units.is_finite()) {
            return bad(format!("eval_cost_units must be >= 0, got {}", self.eval_cost_units));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Action {
    Adapt,
    Skip,
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Action::Adapt => "Adapt",
            Action::Skip => "Skip",
        })
    }
}

/// Skip iff the aggregate gap is strictly below the threshold.
pub fn decide(gap: &GapReport, policy: &GatingPolicy) -> Result<Action, GatingError> {
    if gap.metric != policy.metric {
        return Err(GatingError::MetricMismatch {
            gap: gap.metric,
            policy: policy.metric,
        });
    }
    Ok(if gap.aggregate < policy.threshold {
        Action::Skip
    } else {
        Action::Adapt
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateDecision {
    pub domain_id: String,
    pub gap_report: GapReport,
    pub action: Action,
    pub pool_rows_before: BTreeMap<i32, usize>,
    pub pool_rows_after: BTreeMap<i32, usize>,
    pub step_cost: f64,
}

fn cap_pool(pool: DomainSnapshot, cap: Option<usize>, rng: &RngSpec) -> Result<DomainSnapshot, FeatureError> {
    match cap {
        None => Ok(pool),
        Some(cap) => pool.map_levels(|f| reservoir_subsample(f, cap, &rng.derive("level", &[level_index(f.level())]))),
    }
}

/// One gating step. `rng` seeds the pool subsample when the pool is capped.
pub fn step(
    pool: &DomainSnapshot,
    incoming: &DomainSnapshot,
    policy: &GatingPolicy,
    banks: Option<&BankSet>,
    rng: &RngSpec,
) -> Result<(GateDecision, DomainSnapshot), GatingError> {
    policy.validate()?;
    let gap_report = compute_gap(pool, incoming, policy.metric, banks)?;
    let action = decide(&gap_report, policy)?;
    let new_pool = match (action, policy.pool_mode) {
        (Action::Adapt, PoolMode::Accumulate) => cap_pool(merge_snapshots(pool, incoming)?, policy.pool_cap, rng)?,
        _ => pool.clone(),
    };
    let step_cost = match action {
        Action::Adapt => policy.eval_cost_units + policy.adapt_cost_units,
        Action::Skip => policy.eval_cost_units,
    };
    let decision = GateDecision {
        domain_id: incoming.domain_id().to_owned(),
        gap_report,
        action,
        pool_rows_before: pool.row_counts(),
        pool_rows_after: new_pool.row_counts(),
        step_cost,
    };
    Ok((decision, new_pool))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptationLog {
    pub policy: GatingPolicy,
    pub decisions: Vec<GateDecision>,
    pub total_cost: f64,
    pub adapt_count: usize,
    pub skip_count: usize,
}

impl AdaptationLog {
    pub fn gaps(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.gap_report.aggregate).collect()
    }
}

/// Banks for every level of `source`, drawn from `rng / ("banks")`.
/// Metrics without projections get `None`.
pub fn banks_for(source: &DomainSnapshot, policy: &GatingPolicy, rng: &RngSpec) -> Result<Option<BankSet>, GapError> {
    if !policy.metric.uses_projections() {
        return Ok(None);
    }
    let shapes = source.levels().iter().map(|(&k, f)| (k, f.dim()));
    sample_banks(shapes, policy.m, &rng.derive("banks", &[])).map(Some)
}

/// Folds [`step`] over `targets`, starting from the (capped) source.
/// Banks are sampled once and reused for every step.
pub fn run_schedule(
    source: &DomainSnapshot,
    targets: &[DomainSnapshot],
    policy: &GatingPolicy,
    rng: &RngSpec,
) -> Result<AdaptationLog, GatingError> {
    policy.validate()?;
    if targets.is_empty() {
        return Err(GatingError::EmptySchedule);
    }
    let banks = banks_for(source, policy, rng)?;
    let mut pool = cap_pool(source.clone(), policy.pool_cap, &rng.derive("pool-init", &[]))?;
    let mut decisions = Vec::with_capacity(targets.len());
    for (n, target) in targets.iter().enumerate() {
        let (decision, next) = step(&pool, target, policy, banks.as_ref(), &rng.derive("pool", &[n as u64]))?;
        decisions.push(decision);
        pool = next;
    }
    let total_cost = decisions.iter().map(|d| d.step_cost).sum();
    let adapt_count = decisions.iter().filter(|d| d.action == Action::Adapt).count();
    Ok(AdaptationLog {
        policy: policy.clone(),
        skip_count: decisions.len() - adapt_count,
        decisions,
        total_cost,
        adapt_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub adapt_count: usize,
    pub total_cost: f64,
    pub mean_gap: f64,
    pub gaps: Vec<f64>,
}

/// Runs the schedule once per threshold with the same `rng`, so every run
/// shares its projection banks.
pub fn threshold_sweep(
    source: &DomainSnapshot,
    targets: &[DomainSnapshot],
    thresholds: &[f64],
    template: &GatingPolicy,
    rng: &RngSpec,
) -> Result<Vec<SweepRow>, GatingError> {
    if thresholds.is_empty() {
        return Err(GatingError::NoThresholds);
    }
    thresholds
        .par_iter()
        .map(|&threshold| {
            let log = run_schedule(source, targets, &template.with_threshold(threshold), rng)?;
            let gaps = log.gaps();
            Ok(SweepRow {
                threshold,
                adapt_count: log.adapt_count,
                total_cost: log.total_cost,
                mean_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
                gaps,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::FeatureSet;

    fn report(aggregate: f64) -> GapReport {
        GapReport::from_levels(Metric::DssProj, "s", "t", Some(10), BTreeMap::from([(3, aggregate)]))
    }

    #[test]
    fn decide_uses_strict_comparison() {
        let policy = GatingPolicy::new(Metric::DssProj, DEFAULT_THRESHOLD);
        assert_eq!(decide(&report(0.05), &policy).unwrap(), Action::Adapt);
        assert_eq!(decide(&report(0.01), &policy).unwrap(), Action::Skip);
        assert_eq!(decide(&report(0.02), &policy).unwrap(), Action::Adapt);
        let mmd = GatingPolicy::new(Metric::Mmd, 0.02);
        assert!(matches!(decide(&report(0.05), &mmd), Err(GatingError::MetricMismatch { .. })));
    }

    #[test]
    fn policy_validation() {
        let ok = GatingPolicy::new(Metric::Mmd, 0.0);
        assert!(ok.validate().is_ok());
        for bad in [
            GatingPolicy { threshold: -1.0, ..ok.clone() },
            GatingPolicy { threshold: f64::NAN, ..ok.clone() },
            GatingPolicy { m: 0, ..ok.clone() },
            GatingPolicy { adapt_cost_units: 0.0, ..ok.clone() },
            GatingPolicy { eval_cost_units: -0.5, ..ok.clone() },
            GatingPolicy { pool_cap: Some(0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(GatingError::InvalidPolicy(_))));
        }
    }

    fn snap(id: &str, count: usize, offset: f32) -> DomainSnapshot {
        let data = (0..count * 2).map(|i| (i as f32 * 0.13).sin() + offset).collect();
        DomainSnapshot::new(id, [FeatureSet::new(3, 2, data).unwrap()]).unwrap()
    }

    #[test]
    fn identical_incoming_is_skipped() {
        let pool = snap("pool", 20, 0.0);
        let policy = GatingPolicy::new(Metric::Mmd, 0.02);
        let (d, next) = step(&pool, &pool, &policy, None, &RngSpec::new(0)).unwrap();
        assert_eq!(d.action, Action::Skip);
        assert_eq!(d.step_cost, 0.0);
        assert_eq!(next, pool);
        assert_eq!(d.pool_rows_before, d.pool_rows_after);
    }

    #[test]
    fn zero_threshold_always_adapts() {
        let pool = snap("pool", 20, 0.0);
        let policy = GatingPolicy::new(Metric::Mmd, 0.0);
        let (d, next) = step(&pool, &pool, &policy, None, &RngSpec::new(0)).unwrap();
        assert_eq!(d.action, Action::Adapt);
        assert_eq!(next.level(3).unwrap().count(), 40);
    }

    #[test]
    fn adapt_caps_pool() {
        let pool = snap("pool", 100, 0.0);
        let incoming = snap("new", 50, 5.0);
        let policy = GatingPolicy {
            pool_cap: Some(120),
            ..GatingPolicy::new(Metric::Mmd, 0.02)
        };
        let (d, next) = step(&pool, &incoming, &policy, None, &RngSpec::new(3)).unwrap();
        assert_eq!(d.action, Action::Adapt);
        assert_eq!(d.pool_rows_before[&3], 100);
        assert_eq!(d.pool_rows_after[&3], 120);
        assert_eq!(next.level(3).unwrap().count(), 120);
        assert_eq!(d.step_cost, 1.0);
    }

    #[test]
    fn frozen_pool_never_grows() {
        let pool = snap("pool", 10, 0.0);
        let policy = GatingPolicy {
            pool_mode: PoolMode::Frozen,
            ..GatingPolicy::new(Metric::Mmd, 0.0)
        };
        let (d, next) = step(&pool, &snap("x", 10, 1.0), &policy, None, &RngSpec::new(0)).unwrap();
        assert_eq!(d.action, Action::Adapt);
        assert_eq!(next, pool);
    }

    #[test]
    fn schedule_cost_identities() {
        let source = snap("src", 30, 0.0);
        let targets: Vec<_> = (0..5).map(|i| snap(&format!("t{i}"), 30, i as f32 * 0.3)).collect();
        let rng = RngSpec::new(5);
        let base = GatingPolicy {
            eval_cost_units: 0.25,
            ..GatingPolicy::new(Metric::Swd, 0.0)
        };
        let all = run_schedule(&source, &targets, &base, &rng).unwrap();
        assert_eq!(all.adapt_count, 5);
        assert_eq!(all.total_cost, 5.0 * 1.0 + 5.0 * 0.25);
        let none = run_schedule(&source, &targets, &base.with_threshold(1e300), &rng).unwrap();
        assert_eq!(none.adapt_count, 0);
        assert_eq!(none.skip_count, 5);
        assert_eq!(none.total_cost, 5.0 * 0.25);
        assert!(matches!(run_schedule(&source, &[], &base, &rng), Err(GatingError::EmptySchedule)));
    }

    #[test]
    fn sweep_endpoints_and_shared_first_step() {
        let source = snap("src", 30, 0.0);
        let targets: Vec<_> = (0..4).map(|i| snap(&format!("t{i}"), 30, i as f32)).collect();
        let policy = GatingPolicy::new(Metric::DssProj, 0.0);
        let rows = threshold_sweep(&source, &targets, &[0.0, 1e300, 0.01], &policy, &RngSpec::new(1)).unwrap();
        assert_eq!(rows[0].adapt_count, 4);
        assert_eq!(rows[1].adapt_count, 0);
        assert_eq!(rows[1].total_cost, 0.0);
        assert!(rows.iter().all(|r| r.gaps[0] == rows[0].gaps[0]));
        assert!(matches!(
            threshold_sweep(&source, &targets, &[], &policy, &RngSpec::new(1)),
            Err(GatingError::NoThresholds)
        ));
    }
}
