use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::projection::project_pair;
use super::{check_pair, ot1d_cost, BankSet, GapError, Metric, ProjectionBank};
use crate::feature::{DomainSnapshot, FeatureSet};

/// Largest dimension accepted by [`dss_level_full`].
pub const DEFAULT_DSS_DIM_CAP: usize = 4096;

fn mean_vector(f: &FeatureSet) -> Vec<f64> {
    let mut acc = vec![0.0f64; f.dim()];
    for row in f.rows() {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }
    let n = f.count() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Squared Euclidean distance between the two mean feature vectors.
pub fn mmd_level(src: &FeatureSet, tgt: &FeatureSet) -> Result<f64, GapError> {
    check_pair(src, tgt)?;
    let (ms, mt) = (mean_vector(src), mean_vector(tgt));
    Ok(ms.iter().zip(&mt).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Mean over the bank's directions of the 1-D transport cost between the
/// projected sets.
pub fn swd_level(src: &FeatureSet, tgt: &FeatureSet, bank: &ProjectionBank) -> Result<f64, GapError> {
    let (ps, pt) = project_pair(src, tgt, bank)?;
    let costs = (0..bank.count())
        .into_par_iter()
        .map(|m| ot1d_cost(ps.row(m), pt.row(m)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(costs.iter().sum::<f64>() / bank.count() as f64)
}

fn require_samples(f: &FeatureSet) -> Result<(), GapError> {
    if f.count() < 2 {
        return Err(GapError::InsufficientSamples {
            level: f.level(),
            count: f.count(),
        });
    }
    Ok(())
}

/// Unbiased sample covariance, row-major `dim × dim`.
fn covariance(f: &FeatureSet) -> Vec<f64> {
    let d = f.dim();
    let mean = mean_vector(f);
    let mut cov = vec![0.0f64; d * d];
    let mut centered = vec![0.0f64; d];
    for row in f.rows() {
        for ((c, &x), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = f64::from(x) - m;
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                cov[a * d + b] += ca * centered[b];
            }
        }
    }
    let denom = (f.count() - 1) as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / denom;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    cov
}

/// Unbiased sample variance of a projected series.
fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// `‖K_s − K_t‖_F² / (4 d²)` with unbiased sample covariances, for
/// dimensions up to [`DEFAULT_DSS_DIM_CAP`].
pub fn dss_level_full(src: &FeatureSet, tgt: &FeatureSet) -> Result<f64, GapError> {
    dss_level_full_capped(src, tgt, DEFAULT_DSS_DIM_CAP)
}

pub fn dss_level_full_capped(src: &FeatureSet, tgt: &FeatureSet, dim_cap: usize) -> Result<f64, GapError> {
    check_pair(src, tgt)?;
    require_samples(src)?;
    require_samples(tgt)?;
    let d = src.dim();
    if d > dim_cap {
        return Err(GapError::DimTooLarge {
            level: src.level(),
            dim: d,
            cap: dim_cap,
        });
    }
    let (ks, kt) = (covariance(src), covariance(tgt));
    let frob: f64 = ks.iter().zip(&kt).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(frob / (4.0 * (d * d) as f64))
}

/// `Σ_m (var_s(m) − var_t(m))² / (4 M)` over the bank's directions.
///
/// Unlike the full form there is no `1 / d²` factor, so the two are only
/// on the same scale when `d = 1`.
pub fn dss_level_projected(src: &FeatureSet, tgt: &FeatureSet, bank: &ProjectionBank) -> Result<f64, GapError> {
    check_pair(src, tgt)?;
    require_samples(src)?;
    require_samples(tgt)?;
    let (ps, pt) = project_pair(src, tgt, bank)?;
    let terms: Vec<f64> = (0..bank.count())
        .into_par_iter()
        .map(|m| {
            let diff = variance(ps.row(m)) - variance(pt.row(m));
            diff * diff
        })
        .collect();
    Ok(terms.iter().sum::<f64>() / (4.0 * bank.count() as f64))
}

/// Per-level and level-averaged gap between two snapshots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub metric: Metric,
    pub source_id: String,
    pub target_id: String,
    pub m_used: Option<usize>,
    pub per_level: BTreeMap<i32, f64>,
    pub aggregate: f64,
}

impl GapReport {
    /// Builds a report whose aggregate is the unweighted mean of `per_level`.
    pub fn from_levels(
        metric: Metric,
        source_id: impl Into<String>,
        target_id: impl Into<String>,
        m_used: Option<usize>,
        per_level: BTreeMap<i32, f64>,
    ) -> Self {
        let aggregate = if per_level.is_empty() {
            0.0
        } else {
            per_level.values().sum::<f64>() / per_level.len() as f64
        };
        Self {
            metric,
            source_id: source_id.into(),
            target_id: target_id.into(),
            m_used,
            per_level,
            aggregate,
        }
    }
}

/// Evaluates `metric` on every level the two snapshots share and averages.
/// Projected metrics need a bank for each shared level.
pub fn compute_gap(
    src: &DomainSnapshot,
    tgt: &DomainSnapshot,
    metric: Metric,
    banks: Option<&BankSet>,
) -> Result<GapReport, GapError> {
    let common: Vec<i32> = src
        .levels()
        .keys()
        .filter(|k| tgt.levels().contains_key(k))
        .copied()
        .collect();
    if common.is_empty() {
        return Err(GapError::NoCommonLevel {
            source_id: src.domain_id().to_owned(),
            target_id: tgt.domain_id().to_owned(),
        });
    }

    let mut per_level = BTreeMap::new();
    let mut m_used = None;
    for level in common {
        let (s, t) = (&src.levels()[&level], &tgt.levels()[&level]);
        let value = match metric {
            Metric::Mmd => mmd_level(s, t)?,
            Metric::DssFull => dss_level_full(s, t)?,
            Metric::Swd | Metric::DssProj => {
                let bank = banks
                    .and_then(|b| b.get(&level))
                    .ok_or(GapError::MissingBank { level })?;
                m_used.get_or_insert(bank.count());
                if metric == Metric::Swd {
                    swd_level(s, t, bank)?
                } else {
                    dss_level_projected(s, t, bank)?
                }
            }
        };
        per_level.insert(level, value);
    }
    Ok(GapReport::from_levels(
        metric,
        src.domain_id(),
        tgt.domain_id(),
        m_used,
        per_level,
    ))
}
