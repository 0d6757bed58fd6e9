//! Domain-gap metrics.
//!
//! Three families, each computed per level and averaged over levels:
//!
//! * MMD: squared distance between the mean feature vectors.
//! * SWD: mean over random unit directions of the exact 1-D transport cost
//!   (squared-difference ground cost) between the projected sets.
//! * DSS: squared Frobenius distance between sample covariances scaled by
//!   `1 / (4 d^2)`, or its projected form that compares per-direction
//!   variances scaled by `1 / (4 M)`.
//!
//! All reductions accumulate in `f64` and run in a fixed index order, so
//! results do not depend on the rayon thread count.

mod gap;
pub mod oracle;
mod ot1d;
mod projection;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature::FeatureSet;

pub use gap::{
    compute_gap, dss_level_full, dss_level_full_capped, dss_level_projected, mmd_level, swd_level, GapReport,
    DEFAULT_DSS_DIM_CAP,
};
pub use oracle::wd1d_bruteforce;
pub use ot1d::ot1d_cost;
pub use projection::{
    project_features, sample_banks, sample_projection_bank, BankSet, ProjectedSet, ProjectionBank,
};

/// Projections per level used when nothing else is configured.
pub const DEFAULT_PROJECTIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error("level mismatch: {left} vs {right}")]
    LevelMismatch { left: i32, right: i32 },
    #[error("level {level}: dimension mismatch: {left} vs {right}")]
    DimMismatch { level: i32, left: usize, right: usize },
    #[error("empty input to 1-D transport")]
    EmptyInput,
    #[error("brute-force transport needs {atoms} atoms, limit is {max}")]
    TooLarge { atoms: usize, max: usize },
    #[error("level {level}: covariance needs at least 2 samples, got {count}")]
    InsufficientSamples { level: i32, count: usize },
    #[error("level {level}: dimension {dim} exceeds full-covariance cap {cap}")]
    DimTooLarge { level: i32, dim: usize, cap: usize },
    #[error("projection bank needs dim >= 1 and m >= 1 (got dim {dim}, m {m})")]
    InvalidBankShape { dim: usize, m: usize },
    #[error("could not draw a non-degenerate direction")]
    DegenerateDraw,
    #[error("snapshots '{source_id}' and '{target_id}' share no level")]
    NoCommonLevel { source_id: String, target_id: String },
    #[error("no projection bank for level {level}")]
    MissingBank { level: i32 },
}

/// Which gap is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MMD")]
    Mmd,
    #[serde(rename = "SWD")]
    Swd,
    #[serde(rename = "DSS_FULL")]
    DssFull,
    #[serde(rename = "DSS_PROJ")]
    DssProj,
}

impl Metric {
    /// Whether the metric needs a projection bank per level.
    pub fn uses_projections(self) -> bool {
        matches!(self, Metric::Swd | Metric::DssProj)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Mmd => "MMD",
            Metric::Swd => "SWD",
            Metric::DssFull => "DSS_FULL",
            Metric::DssProj => "DSS_PROJ",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    /// Accepts the report names and the short forms `mmd`, `swd`, `dss`
    /// (projected) and `dss-full`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mmd" => Ok(Metric::Mmd),
            "swd" => Ok(Metric::Swd),
            "dss" | "dss_proj" => Ok(Metric::DssProj),
            "dss_full" => Ok(Metric::DssFull),
            _ => Err(format!("unknown metric '{s}' (expected mmd, swd, dss or dss-full)")),
        }
    }
}

pub(crate) fn check_pair(src: &FeatureSet, tgt: &FeatureSet) -> Result<(), GapError> {
    if src.level() != tgt.level() {
        return Err(GapError::LevelMismatch {
            left: src.level(),
            right: tgt.level(),
        });
    }
    if src.dim() != tgt.dim() {
        return Err(GapError::DimMismatch {
            level: src.level(),
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    Ok(())
}
