//! Reference-free summary evaluation from language-model surprisal.
//!
//! A summary is scored by how much it lowers the information (total
//! surprisal, in nats) a scoring backend assigns to its source document.
//! [`metrics`] computes information difference, the Shannon score and
//! BLANC-Shannon on top of any [`ScoringBackend`]. The crate also ships an
//! in-process n-gram backend, an HTTP client for a remote token-logprob
//! server, tie-aware rank correlations, an evaluation harness for
//! annotated datasets, and an HTML heatmap renderer.
//!
//! ```
//! use shannon_core::{Document, NGramConfig, ReferenceBackend, ScoringConfig, shannon_score};
//!
//! let text = "The cat sat on the mat. The cat was happy.";
//! let backend = ReferenceBackend::train(&[text], NGramConfig::default()).unwrap();
//! let doc = Document::new("d1", text).unwrap();
//! let score = shannon_score(&doc, text, &ScoringConfig::default(), &backend).unwrap();
//! assert!((score - 1.0).abs() < 1e-9);
//! ```

pub mod backend;
pub mod correlation;
pub mod harness;
pub mod metrics;
pub mod synthetic;
pub mod text;
pub mod viz;

pub use backend::{
    BackendError, NGramConfig, ReferenceBackend, RemoteBackend, RemoteConfig, ScoreRequest, ScoringBackend,
    TokenScores, UniformBackend,
};
pub use correlation::{kendall_tau_b, pearson_r, spearman_rho, CorrelationError, CorrelationMethod, PairedSeries};
pub use harness::{config_hash, EvalDataset, HarnessError};
pub use metrics::{
    blanc_shannon, document_info, evaluate, information_difference, shannon_score, InfoProfile, InfoScorer,
    MetricError, MetricKind, MetricResult, Scenario, ScoringConfig, Upstream,
};
pub use text::{extractive_fragments, summary_stats, Document, Fragment, SummaryStats, SummaryText, TextError};
pub use viz::{render_heatmap, HeatmapSpec, VizError};
