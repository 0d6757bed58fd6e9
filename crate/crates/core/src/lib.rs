//! Domain-gap evaluation and gap-gated continual adaptation.
//!
//! Feature sets from one or more backbone levels are compared with three
//! distributional gaps (mean discrepancy, sliced Wasserstein, second-order
//! statistics). The gating simulator uses a gap threshold to decide which
//! incoming domains are worth adapting to and accounts the cost.

pub mod analysis;
pub mod feature;
pub mod gating;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod synth;

pub use feature::{merge_snapshots, reservoir_subsample, validate_snapshot, DomainSnapshot, FeatureError, FeatureSet};
pub use gating::{run_schedule, threshold_sweep, Action, AdaptationLog, GatingPolicy, PoolMode};
pub use metrics::{compute_gap, GapError, GapReport, Metric};
pub use rng::RngSpec;
