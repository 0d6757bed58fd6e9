use std::fmt;

use domain_gap::analysis::AnalysisError;
use domain_gap::gating::GatingError;
use domain_gap::io::IoError;
use domain_gap::synth::SynthError;
use domain_gap::{FeatureError, GapError};

/// Exit code 1: the filesystem failed. Exit code 2: inputs were read but
/// violate an invariant.
#[derive(Debug)]
pub enum CliError {
    Io(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        })*
    };
}

validation_from!(FeatureError, GapError, GatingError, AnalysisError, SynthError);
