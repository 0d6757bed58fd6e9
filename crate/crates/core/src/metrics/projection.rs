//! Random unit directions and 1-D projections of feature sets.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{check_pair, GapError};
use crate::feature::FeatureSet;
use crate::rng::{level_index, RngSpec};

const MIN_DRAW_NORM: f64 = 1e-12;
const MAX_REDRAWS: usize = 100;

/// `count` unit-norm directions in `R^dim` for one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionBank {
    level: i32,
    dim: usize,
    count: usize,
    directions: Vec<f64>,
    seed_provenance: RngSpec,
}

impl ProjectionBank {
    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of directions, M.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn direction(&self, m: usize) -> &[f64] {
        &self.directions[m * self.dim..(m + 1) * self.dim]
    }

    pub fn directions(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.directions.chunks_exact(self.dim)
    }

    pub fn seed_provenance(&self) -> &RngSpec {
        &self.seed_provenance
    }
}

/// Per-level banks shared by every projected computation in a run.
pub type BankSet = BTreeMap<i32, ProjectionBank>;

fn draw_direction(dim: usize, stream: &RngSpec) -> Result<Vec<f64>, GapError> {
    let mut rng = stream.rng();
    for _ in 0..MAX_REDRAWS {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm >= MIN_DRAW_NORM {
            return Ok(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Err(GapError::DegenerateDraw)
}

/// Samples `m` directions uniformly on the unit sphere of `R^dim` by
/// normalising standard-normal draws. Direction `i` reads the stream
/// `rng / ("projection", [level, i])`, so banks do not depend on order.
pub fn sample_projection_bank(level: i32, dim: usize, m: usize, rng: &RngSpec) -> Result<ProjectionBank, GapError> {
    if dim == 0 || m == 0 {
        return Err(GapError::InvalidBankShape { dim, m });
    }
    let rows = (0..m)
        .into_par_iter()
        .map(|i| draw_direction(dim, &rng.derive("projection", &[level_index(level), i as u64])))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ProjectionBank {
        level,
        dim,
        count: m,
        directions: rows.concat(),
        seed_provenance: rng.clone(),
    })
}

/// One bank per `(level, dim)` entry, all drawn from the same `rng`.
pub fn sample_banks(
    shapes: impl IntoIterator<Item = (i32, usize)>,
    m: usize,
    rng: &RngSpec,
) -> Result<BankSet, GapError> {
    shapes
        .into_iter()
        .map(|(level, dim)| sample_projection_bank(level, dim, m, rng).map(|b| (level, b)))
        .collect()
}

/// Row `m` holds the projections of every sample onto direction `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSet {
    level: i32,
    count: usize,
    values: Vec<f64>,
}

impl ProjectedSet {
    pub fn level(&self) -> i32 {
        self.level
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn directions(&self) -> usize {
        self.values.len() / self.count
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.values[m * self.count..(m + 1) * self.count]
    }
}

pub fn project_features(f: &FeatureSet, bank: &ProjectionBank) -> Result<ProjectedSet, GapError> {
    if f.level() != bank.level {
        return Err(GapError::LevelMismatch {
            left: f.level(),
            right: bank.level,
        });
    }
    if f.dim() != bank.dim {
        return Err(GapError::DimMismatch {
            level: f.level(),
            left: f.dim(),
            right: bank.dim,
        });
    }
    let values = bank
        .directions()
        .flat_map(|dir| {
            f.rows().map(move |row| {
                row.iter()
                    .zip(dir)
                    .map(|(&x, &r)| f64::from(x) * r)
                    .sum::<f64>()
            })
        })
        .collect();
    Ok(ProjectedSet {
        level: f.level(),
        count: f.count(),
        values,
    })
}

/// Projects both sets after checking that they agree with each other and
/// with the bank.
pub(crate) fn project_pair(
    src: &FeatureSet,
    tgt: &FeatureSet,
    bank: &ProjectionBank,
) -> Result<(ProjectedSet, ProjectedSet), GapError> {
    check_pair(src, tgt)?;
    Ok((project_features(src, bank)?, project_features(tgt, bank)?))
}
