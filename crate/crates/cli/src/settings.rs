//! Flag/config-file resolution. Flags win over `--config` values, which win
//! over built-in defaults.

use std::path::Path;
use std::str::FromStr;

use domain_gap::analysis::{KlDirection, DEFAULT_EPSILON};
use domain_gap::gating::{GatingPolicy, PoolMode, DEFAULT_THRESHOLD};
use domain_gap::io::KvConfig;
use domain_gap::metrics::{Metric, DEFAULT_PROJECTIONS};
use domain_gap::synth::{DriftMode, DriftScenario};
use domain_gap::RngSpec;

use crate::error::CliError;

pub const CONFIG_KEYS: &[&str] = &[
    "metric",
    "threshold",
    "m",
    "seed",
    "pool_cap",
    "frozen_pool",
    "adapt_cost",
    "eval_cost",
    "kl_direction",
    "epsilon",
    "source_id",
    "levels",
    "samples",
    "cycle_length",
    "amplitude",
    "sigma",
    "drift",
    "phases",
];

pub fn load_config(path: Option<&Path>) -> Result<KvConfig, CliError> {
    let config = match path {
        Some(p) => KvConfig::read(p)?,
        None => KvConfig::default(),
    };
    config.check_keys(CONFIG_KEYS)?;
    Ok(config)
}

/// `flag`, else the config value under `key`, else `None`.
pub fn pick<T: FromStr>(flag: Option<T>, config: &KvConfig, key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => Ok(config.parse_value(key)?),
    }
}

/// Policy knobs shared by `gap`, `simulate` and `sweep`.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct PolicyFlags {
    /// Gap metric: mmd, swd, dss (projected) or dss-full.
    #[arg(long)]
    pub metric: Option<Metric>,
    /// Projections per level.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-level row cap for the training pool.
    #[arg(long)]
    pub pool_cap: Option<usize>,
    /// Compare every target against the original source only.
    #[arg(long)]
    pub frozen_pool: Option<bool>,
    /// Cost units per adaptation.
    #[arg(long)]
    pub adapt_cost: Option<f64>,
    /// Cost units per gap evaluation.
    #[arg(long)]
    pub eval_cost: Option<f64>,
}

pub struct ResolvedPolicy {
    pub policy: GatingPolicy,
    pub rng: RngSpec,
}

pub fn resolve_policy(flags: &PolicyFlags, threshold: Option<f64>, config: &KvConfig) -> Result<ResolvedPolicy, CliError> {
    let metric = pick(flags.metric, config, "metric")?.unwrap_or(Metric::DssProj);
    let threshold = pick(threshold, config, "threshold")?.unwrap_or(DEFAULT_THRESHOLD);
    let frozen = pick(flags.frozen_pool, config, "frozen_pool")?.unwrap_or(false);
    let policy = GatingPolicy {
        metric,
        threshold,
        m: pick(flags.m, config, "m")?.unwrap_or(DEFAULT_PROJECTIONS),
        pool_cap: pick(flags.pool_cap, config, "pool_cap")?,
        adapt_cost_units: pick(flags.adapt_cost, config, "adapt_cost")?.unwrap_or(1.0),
        eval_cost_units: pick(flags.eval_cost, config, "eval_cost")?.unwrap_or(0.0),
        pool_mode: if frozen { PoolMode::Frozen } else { PoolMode::Accumulate },
    };
    policy.validate()?;
    let seed = pick(flags.seed, config, "seed")?.unwrap_or(0);
    Ok(ResolvedPolicy {
        policy,
        rng: RngSpec::new(seed),
    })
}

pub fn resolve_epsilon(flag: Option<f64>, config: &KvConfig) -> Result<f64, CliError> {
    let eps = pick(flag, config, "epsilon")?.unwrap_or(DEFAULT_EPSILON);
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CliError::invalid(format!("epsilon must be finite and >= 0, got {eps}")));
    }
    Ok(eps)
}

pub fn resolve_kl_direction(flag: Option<KlDirection>, config: &KvConfig) -> Result<KlDirection, CliError> {
    Ok(pick(flag, config, "kl_direction")?.unwrap_or(KlDirection::ApToGap))
}

/// `3:8,4:16` → `[(3, 8), (4, 16)]`.
pub fn parse_levels(s: &str) -> Result<Vec<(i32, usize)>, CliError> {
    s.split(',')
        .map(|item| {
            let (level, dim) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| CliError::invalid(format!("levels: expected level:dim, got '{item}'")))?;
            let level = level.trim().parse().map_err(|_| CliError::invalid(format!("levels: bad level '{level}'")))?;
            let dim = dim.trim().parse().map_err(|_| CliError::invalid(format!("levels: bad dim '{dim}'")))?;
            Ok((level, dim))
        })
        .collect()
}

/// `0-3,7` → `[0, 1, 2, 3, 7]`; ranges are inclusive.
pub fn parse_phases(s: &str) -> Result<Vec<u64>, CliError> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        let bad = || CliError::invalid(format!("phases: cannot parse '{item}'"));
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

pub fn scenario_from_config(config: &KvConfig) -> Result<(DriftScenario, Vec<u64>), CliError> {
    let required = |key: &str| {
        config
            .get(key)
            .ok_or_else(|| CliError::invalid(format!("synth config needs '{key}'")))
    };
    let levels = parse_levels(required("levels")?)?;
    let samples = config.parse_value("samples")?.unwrap_or(500);
    let cycle_length: u64 = config.parse_value("cycle_length")?.unwrap_or(12);
    let amplitude = config.parse_value("amplitude")?.unwrap_or(1.0);
    let sigma = config.parse_value("sigma")?.unwrap_or(1.0);
    let seed = config.parse_value("seed")?.unwrap_or(0);
    let mode: DriftMode = config.parse_value("drift")?.unwrap_or(DriftMode::Mean);
    let scenario = DriftScenario::new(levels, samples, cycle_length, amplitude, sigma, seed).with_mode(mode);
    scenario.validate()?;
    let phases = match config.get("phases") {
        Some(p) => parse_phases(p)?,
        None => (0..cycle_length).collect(),
    };
    if phases.is_empty() {
        return Err(CliError::invalid("phases list is empty"));
    }
    Ok((scenario, phases))
}
