//! Multi-level feature sets and domain snapshots.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::Serialize;
use thiserror::Error;

use crate::rng::RngSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("level {level}: feature set has no rows")]
    EmptyLevel { level: i32 },
    #[error("level {level}: dimension mismatch ({detail})")]
    DimMismatch { level: i32, detail: String },
    #[error("level {level}: non-finite value at row {row}, column {col}")]
    NonFinite { level: i32, row: usize, col: usize },
    #[error("snapshot '{domain_id}' has no levels")]
    NoLevels { domain_id: String },
    #[error("snapshot '{domain_id}': level {level} given more than once")]
    DuplicateLevel { domain_id: String, level: i32 },
    #[error("snapshot '{domain_id}': map key {key} holds a feature set labelled level {level}")]
    LevelKeyMismatch {
        domain_id: String,
        key: i32,
        level: i32,
    },
    #[error("subsample cap must be at least 1")]
    InvalidCap,
}

/// `count × dim` matrix of 32-bit features for one backbone level, row-major.
///
/// Construction validates shape and finiteness, so every `FeatureSet` in
/// circulation satisfies the invariants the metrics rely on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSet {
    level: i32,
    dim: usize,
    count: usize,
    data: Vec<f32>,
}

fn check_set(level: i32, dim: usize, data: &[f32]) -> Result<usize, FeatureError> {
    if dim == 0 {
        return Err(FeatureError::DimMismatch {
            level,
            detail: "dim must be at least 1".into(),
        });
    }
    if !data.len().is_multiple_of(dim) {
        return Err(FeatureError::DimMismatch {
            level,
            detail: format!("{} values do not fill rows of width {dim}", data.len()),
        });
    }
    let count = data.len() / dim;
    if count == 0 {
        return Err(FeatureError::EmptyLevel { level });
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite {
            level,
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(count)
}

impl FeatureSet {
    pub fn new(level: i32, dim: usize, data: Vec<f32>) -> Result<Self, FeatureError> {
        let count = check_set(level, dim, &data)?;
        Ok(Self {
            level,
            dim,
            count,
            data,
        })
    }

    /// Builds a set from explicit rows; ragged rows are a `DimMismatch`.
    pub fn from_rows<R: AsRef<[f32]>>(level: i32, rows: &[R]) -> Result<Self, FeatureError> {
        let Some(first) = rows.first() else {
            return Err(FeatureError::EmptyLevel { level });
        };
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(FeatureError::DimMismatch {
                    level,
                    detail: format!("row {i} has {} columns, expected {dim}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(level, dim, data)
    }

    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + DoubleEndedIterator + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Same rows with a different level label.
    pub fn relabel(mut self, level: i32) -> Self {
        self.level = level;
        self
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

/// One domain's feature sets keyed by level, plus free-form tags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSnapshot {
    domain_id: String,
    levels: BTreeMap<i32, FeatureSet>,
    meta: BTreeMap<String, String>,
}

impl DomainSnapshot {
    pub fn new(
        domain_id: impl Into<String>,
        sets: impl IntoIterator<Item = FeatureSet>,
    ) -> Result<Self, FeatureError> {
        let domain_id = domain_id.into();
        let mut levels = BTreeMap::new();
        for set in sets {
            let level = set.level;
            if levels.insert(level, set).is_some() {
                return Err(FeatureError::DuplicateLevel { domain_id, level });
            }
        }
        let snap = Self {
            domain_id,
            levels,
            meta: BTreeMap::new(),
        };
        validate_snapshot(&snap)?;
        Ok(snap)
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn levels(&self) -> &BTreeMap<i32, FeatureSet> {
        &self.levels
    }

    pub fn level(&self, level: i32) -> Option<&FeatureSet> {
        self.levels.get(&level)
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    /// Per-level row counts.
    pub fn row_counts(&self) -> BTreeMap<i32, usize> {
        self.levels.iter().map(|(&k, f)| (k, f.count)).collect()
    }

    /// Applies `f` to every level, keeping identity and tags.
    pub fn map_levels<F>(&self, mut f: F) -> Result<Self, FeatureError>
    where
        F: FnMut(&FeatureSet) -> Result<FeatureSet, FeatureError>,
    {
        let levels = self
            .levels
            .iter()
            .map(|(&k, set)| f(set).map(|s| (k, s)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        let snap = Self {
            domain_id: self.domain_id.clone(),
            levels,
            meta: self.meta.clone(),
        };
        validate_snapshot(&snap)?;
        Ok(snap)
    }
}

/// Checks every feature-set and snapshot invariant; reports the first
/// violation in level order.
pub fn validate_snapshot(s: &DomainSnapshot) -> Result<(), FeatureError> {
    if s.levels.is_empty() {
        return Err(FeatureError::NoLevels {
            domain_id: s.domain_id.clone(),
        });
    }
    for (&key, set) in &s.levels {
        if set.level != key {
            return Err(FeatureError::LevelKeyMismatch {
                domain_id: s.domain_id.clone(),
                key,
                level: set.level,
            });
        }
        let count = check_set(set.level, set.dim, &set.data)?;
        if count != set.count {
            return Err(FeatureError::DimMismatch {
                level: key,
                detail: format!("count field {} but data holds {count} rows", set.count),
            });
        }
    }
    Ok(())
}

/// Row-concatenates shared levels (`a` first) and passes the rest through.
pub fn merge_snapshots(a: &DomainSnapshot, b: &DomainSnapshot) -> Result<DomainSnapshot, FeatureError> {
    let mut levels = a.levels.clone();
    for (&k, fb) in &b.levels {
        match levels.get_mut(&k) {
            Some(fa) => {
                if fa.dim != fb.dim {
                    return Err(FeatureError::DimMismatch {
                        level: k,
                        detail: format!(
                            "cannot merge dim {} ('{}') with dim {} ('{}')",
                            fa.dim, a.domain_id, fb.dim, b.domain_id
                        ),
                    });
                }
                fa.data.extend_from_slice(&fb.data);
                fa.count += fb.count;
            }
            None => {
                levels.insert(k, fb.clone());
            }
        }
    }
    let mut meta = a.meta.clone();
    for (k, v) in &b.meta {
        meta.entry(k.clone()).or_insert_with(|| v.clone());
    }
    Ok(DomainSnapshot {
        domain_id: format!("{}+{}", a.domain_id, b.domain_id),
        levels,
        meta,
    })
}

/// Seeded uniform subsample without replacement, keeping the original row
/// order. Sets already within `cap` come back unchanged.
pub fn reservoir_subsample(s: &FeatureSet, cap: usize, rng: &RngSpec) -> Result<FeatureSet, FeatureError> {
    if cap == 0 {
        return Err(FeatureError::InvalidCap);
    }
    if s.count <= cap {
        return Ok(s.clone());
    }
    let mut picked = index::sample(&mut rng.rng(), s.count, cap).into_vec();
    picked.sort_unstable();
    let mut data = Vec::with_capacity(cap * s.dim);
    for i in picked {
        data.extend_from_slice(s.row(i));
    }
    FeatureSet::new(s.level, s.dim, data)
}
