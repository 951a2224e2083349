//! Process exit codes. The table is part of the scripting contract.

use std::fmt;

use shannon_core::backend::BackendError;
use shannon_core::harness::HarnessError;
use shannon_core::metrics::MetricError;
use shannon_core::text::TextError;
use shannon_core::viz::VizError;

pub const OK: u8 = 0;
pub const OTHER: u8 = 1;
/// Bad flags, unreadable or malformed input files, invalid configuration.
pub const INPUT: u8 = 2;
pub const DEGENERATE: u8 = 3;
pub const BACKEND_UNAVAILABLE: u8 = 4;
pub const PROTOCOL: u8 = 5;
pub const BATCH_ABORTED: u8 = 6;
pub const GREEDY_UNSUPPORTED: u8 = 7;

pub const TABLE: &str = "\
Exit codes:
  0  success
  1  other error
  2  usage or input error (flags, files, dataset schema, configuration)
  3  degenerate normalization: the Shannon score is undefined for this backend
  4  scoring backend unavailable
  5  scoring backend protocol violation
  6  batch aborted after repeated backend failures (progress is kept)
  7  BLANC-Shannon requested but the backend reports no greedy flags";

/// A problem with the user's flags or input files.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input(message: impl Into<String>) -> anyhow::Error {
    InputError(message.into()).into()
}

pub fn for_backend(e: &BackendError) -> u8 {
    match e {
        BackendError::Unavailable(_) => BACKEND_UNAVAILABLE,
        BackendError::Protocol { .. } => PROTOCOL,
        BackendError::EmptyContinuation | BackendError::EmptyCorpus | BackendError::InvalidConfig(_) => INPUT,
    }
}

pub fn for_metric(e: &MetricError) -> u8 {
    match e {
        MetricError::DegenerateNormalization { .. } => DEGENERATE,
        MetricError::GreedyUnsupported => GREEDY_UNSUPPORTED,
        MetricError::Backend { source, .. } => for_backend(source),
        MetricError::EmptyDocument => INPUT,
        MetricError::NotComputed(_) => OTHER,
    }
}

fn for_harness(e: &HarnessError) -> u8 {
    match e {
        HarnessError::AbortBatch { .. } => BATCH_ABORTED,
        HarnessError::Metric(m) => for_metric(m),
        HarnessError::Correlation(_) => OTHER,
        HarnessError::Io { .. }
        | HarnessError::Schema { .. }
        | HarnessError::Integrity(_)
        | HarnessError::ScoreFile { .. }
        | HarnessError::ConfigMismatch { .. }
        | HarnessError::MixedConfigs(_)
        | HarnessError::NeedTwoDocuments(_) => INPUT,
    }
}

/// Exit code for the first recognized error in the cause chain.
pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return for_harness(e);
        }
        if let Some(e) = cause.downcast_ref::<MetricError>() {
            return for_metric(e);
        }
        if let Some(e) = cause.downcast_ref::<BackendError>() {
            return for_backend(e);
        }
        if cause.is::<InputError>()
            || cause.is::<TextError>()
            || cause.is::<VizError>()
            || cause.is::<std::io::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<serde_json::Error>()
        {
            return INPUT;
        }
    }
    OTHER
}
