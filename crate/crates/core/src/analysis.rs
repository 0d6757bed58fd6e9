//! Agreement between domain gaps and detector accuracy loss.
//!
//! The per-domain gap series and the per-domain AP discrepancy series are
//! each normalised into a probability profile (one bin per target domain)
//! and compared with KL divergence in nats. Spearman rank correlation gives
//! a scale-free second view.

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("AP for '{domain_id}' must lie in [0, 1], got {ap}")]
    InvalidAp { domain_id: String, ap: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {need} values, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("profile values must be finite and >= 0")]
    NegativeValue,
    #[error("profile sums to zero")]
    AllZero,
    #[error("distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("q has zero mass where p is positive (index {index})")]
    UnsupportedMass { index: usize },
    #[error("all values in a ranked series are equal")]
    DegenerateRanks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApRecord {
    domain_id: String,
    ap: f64,
}

impl ApRecord {
    pub fn new(domain_id: impl Into<String>, ap: f64) -> Result<Self, AnalysisError> {
        let domain_id = domain_id.into();
        if !(0.0..=1.0).contains(&ap) {
            return Err(AnalysisError::InvalidAp { domain_id, ap });
        }
        Ok(Self { domain_id, ap })
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn ap(&self) -> f64 {
        self.ap
    }
}

pub fn ap_discrepancy(source: &ApRecord, target: &ApRecord) -> f64 {
    (source.ap - target.ap).abs()
}

/// Adds `epsilon` to each entry and rescales to sum to one.
pub fn normalize_profile(values: &[f64], epsilon: f64) -> Result<Vec<f64>, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::TooShort { need: 1, got: 0 });
    }
    if epsilon.is_nan() || epsilon < 0.0 || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(AnalysisError::NegativeValue);
    }
    let shifted: Vec<f64> = values.iter().map(|v| v + epsilon).collect();
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        return Err(AnalysisError::AllZero);
    }
    Ok(shifted.into_iter().map(|v| v / total).collect())
}

const NORMALIZATION_TOL: f64 = 1e-9;

/// `Σ p_i ln(p_i / q_i)` in nats, with `0 ln(0 / q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, AnalysisError> {
    if p.len() != q.len() {
        return Err(AnalysisError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    for dist in [p, q] {
        if dist.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(AnalysisError::NegativeValue);
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(AnalysisError::NotNormalized { sum });
        }
    }
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(AnalysisError::UnsupportedMass { index });
        }
        total += pi * (pi / qi).ln();
    }
    // rounding can leave a tiny negative value for p ≈ q
    Ok(total.max(0.0))
}

/// Ranks starting at 1; tied values share their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(AnalysisError::DegenerateRanks);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average-rank vectors.
pub fn spearman_correlation(a: &[f64], b: &[f64]) -> Result<f64, AnalysisError> {
    if a.len() != b.len() {
        return Err(AnalysisError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 3 {
        return Err(AnalysisError::TooShort { need: 3, got: a.len() });
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Which profile plays `p` in `KL(p ‖ q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KlDirection {
    /// `KL(AP discrepancy ‖ gap)`.
    #[serde(rename = "ap-gap")]
    ApToGap,
    /// `KL(gap ‖ AP discrepancy)`.
    #[serde(rename = "gap-ap")]
    GapToAp,
}

impl std::str::FromStr for KlDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ap-gap" | "ap_gap" => Ok(KlDirection::ApToGap),
            "gap-ap" | "gap_ap" => Ok(KlDirection::GapToAp),
            _ => Err(format!("unknown KL direction '{s}' (expected ap-gap or gap-ap)")),
        }
    }
}

/// Aligned per-domain gap and AP-discrepancy series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePair {
    domain_ids: Vec<String>,
    gap_values: Vec<f64>,
    ap_discrepancies: Vec<f64>,
}

impl ProfilePair {
    pub fn new(domain_ids: Vec<String>, gap_values: Vec<f64>, ap_discrepancies: Vec<f64>) -> Result<Self, AnalysisError> {
        for other in [gap_values.len(), ap_discrepancies.len()] {
            if other != domain_ids.len() {
                return Err(AnalysisError::LengthMismatch {
                    left: domain_ids.len(),
                    right: other,
                });
            }
        }
        if domain_ids.len() < 2 {
            return Err(AnalysisError::TooShort {
                need: 2,
                got: domain_ids.len(),
            });
        }
        if gap_values
            .iter()
            .chain(&ap_discrepancies)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(AnalysisError::NegativeValue);
        }
        Ok(Self {
            domain_ids,
            gap_values,
            ap_discrepancies,
        })
    }

    pub fn domain_ids(&self) -> &[String] {
        &self.domain_ids
    }

    pub fn gap_values(&self) -> &[f64] {
        &self.gap_values
    }

    pub fn ap_discrepancies(&self) -> &[f64] {
        &self.ap_discrepancies
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub domain_ids: Vec<String>,
    pub kl_direction: KlDirection,
    pub epsilon: f64,
    pub kl: f64,
    /// Absent when fewer than three domains or a series is constant.
    pub spearman: Option<f64>,
    pub gap_profile: Vec<f64>,
    pub ap_profile: Vec<f64>,
}

pub fn correlate(pair: &ProfilePair, epsilon: f64, direction: KlDirection) -> Result<CorrelationReport, AnalysisError> {
    let gap_profile = normalize_profile(&pair.gap_values, epsilon)?;
    let ap_profile = normalize_profile(&pair.ap_discrepancies, epsilon)?;
    let kl = match direction {
        KlDirection::ApToGap => kl_divergence(&ap_profile, &gap_profile)?,
        KlDirection::GapToAp => kl_divergence(&gap_profile, &ap_profile)?,
    };
    let spearman = match spearman_correlation(&pair.gap_values, &pair.ap_discrepancies) {
        Ok(r) => Some(r),
        Err(AnalysisError::TooShort { .. } | AnalysisError::DegenerateRanks) => None,
        Err(e) => return Err(e),
    };
    Ok(CorrelationReport {
        domain_ids: pair.domain_ids.clone(),
        kl_direction: direction,
        epsilon,
        kl,
        spearman,
        gap_profile,
        ap_profile,
    })
}
