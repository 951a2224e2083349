//! Dataset ingestion, resumable batch scoring, baseline validation and
//! the correlation and bias tables built from a score file.

mod dataset;
mod scores;
mod tables;
mod validation;

use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::ScoringBackend;
use crate::correlation::CorrelationError;
use crate::metrics::{MetricError, ScoringConfig};

pub use dataset::{load_dataset, parse_dataset, DatasetFormat, Entry, EvalDataset, DEFAULT_SYSTEM_ID};
pub use scores::{run_metrics, BatchOptions, BatchReport, PairFailure, ScoreRecord, ScoreTable};
pub use tables::{bias_table, correlation_table, BiasTable, Cell, CorrelationLevel, CorrelationTable};
pub use validation::{
    baseline_validation, DocValidation, Separation, Triple, ValidationOptions, ValidationReport, Variant,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("dataset integrity: {0}")]
    Integrity(String),
    #[error("score file line {line}: {message}")]
    ScoreFile { line: usize, message: String },
    #[error("score file was written with config {found}, current config is {expected}; use a new output path")]
    ConfigMismatch { expected: String, found: String },
    #[error("score file mixes configurations: {}", .0.join(", "))]
    MixedConfigs(Vec<String>),
    #[error("aborted after {consecutive} consecutive backend failures; last: {last}")]
    AbortBatch { consecutive: usize, last: String },
    #[error("baseline validation needs at least two documents with reference summaries, got {0}")]
    NeedTwoDocuments(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Correlation(#[from] CorrelationError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    model_id: &'a str,
    context_limit: usize,
    scoring: &'a ScoringConfig,
}

/// Short stable hash of everything that determines metric values: the
/// backend identity and context limit plus the scoring configuration.
pub fn config_hash(backend: &dyn ScoringBackend, config: &ScoringConfig) -> String {
    let input = HashInput {
        model_id: backend.model_id(),
        context_limit: backend.context_limit(),
        scoring: config,
    };
    let json = serde_json::to_vec(&input).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
