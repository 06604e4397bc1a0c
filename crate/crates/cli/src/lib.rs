//! Experiment harness: JSON instance formats, command dispatch and reports.

pub mod formats;
pub mod report;
pub mod run;

use choquet_core::classifier::ClassifierError;
use choquet_core::construction::ConstructionError;
use choquet_core::groupoids::GroupoidError;
use choquet_core::groups::GroupError;
use choquet_core::harmonic::HarmonicError;
use choquet_core::markov::MarkovError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    /// Carries the core message, which already names the cap.
    #[error("{0}")]
    ResourceCap(String),
    #[error("cannot read input: {0}")]
    Io(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    /// 2 for bad input, 3 for exhausted resource caps, 4 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::ResourceCap(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    /// Prefixes validation messages with the file they came from.
    pub fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

macro_rules! classify_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                let msg = e.to_string();
                if msg.starts_with("resource cap") {
                    CliError::ResourceCap(msg)
                } else {
                    CliError::Validation(msg)
                }
            }
        }
    )*};
}

classify_errors!(GroupError, GroupoidError, MarkovError, HarmonicError, ClassifierError);

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        match e {
            ConstructionError::ResourceCap { .. } | ConstructionError::SearchExhausted { .. } => {
                CliError::ResourceCap(e.to_string())
            }
            ConstructionError::Group(g) => g.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}
