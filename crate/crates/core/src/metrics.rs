//! Document information under three scoring scenarios and the metrics built
//! on them.
//!
//! For sentence `i` of a document the backend scores the sentence as a
//! continuation of the prompt
//!
//! ```text
//! helper ++ separator ++ sentences[i-k .. i-1]
//! ```
//!
//! where the helper is absent (I(D)), the summary (I(D|S)) or the document
//! itself (I(D|D)). Without a helper the separator is omitted too. An empty
//! summary counts as no helper. Surprisal is in nats throughout.
//!
//! * information difference: `I(D) − I(D|S)`
//! * Shannon score: `(I(D) − I(D|S)) / (I(D) − I(D|D))`
//! * BLANC-Shannon: greedy accuracy with the summary minus without it,
//!   micro-averaged over all document tokens.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ScoreRequest, ScoringBackend, TokenScores};
use crate::text::Document;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("document has no sentences")]
    EmptyDocument,
    #[error("scoring sentence {sentence} ({scenario}): {source}")]
    Backend {
        sentence: usize,
        scenario: Scenario,
        #[source]
        source: BackendError,
    },
    #[error("degenerate normalization: I(D) = {unconditional} and I(D|D) = {given_document} are within epsilon; the backend does not use its prompt")]
    DegenerateNormalization { unconditional: f64, given_document: f64 },
    #[error("backend does not report greedy-match flags")]
    GreedyUnsupported,
    #[error("metric {0} was not computed")]
    NotComputed(MetricKind),
}

impl MetricError {
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            MetricError::Backend { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// How many preceding sentences join the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "UpstreamRepr", into = "UpstreamRepr")]
pub enum Upstream {
    Count(usize),
    /// Every prior sentence.
    All,
}

impl Upstream {
    fn resolve(self, prior: usize) -> usize {
        match self {
            Upstream::Count(k) => k.min(prior),
            Upstream::All => prior,
        }
    }
}

impl fmt::Display for Upstream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Upstream::Count(k) => write!(f, "{k}"),
            Upstream::All => f.write_str("all"),
        }
    }
}

impl FromStr for Upstream {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" | "inf" | "infinity" => Ok(Upstream::All),
            n => n
                .parse()
                .map(Upstream::Count)
                .map_err(|_| format!("expected a sentence count or \"all\", got {s:?}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum UpstreamRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<UpstreamRepr> for Upstream {
    type Error = String;
    fn try_from(r: UpstreamRepr) -> Result<Self, String> {
        match r {
            UpstreamRepr::Count(k) => Ok(Upstream::Count(k)),
            UpstreamRepr::Word(w) => w.parse(),
        }
    }
}

impl From<Upstream> for UpstreamRepr {
    fn from(u: Upstream) -> Self {
        match u {
            Upstream::Count(k) => UpstreamRepr::Count(k),
            Upstream::All => UpstreamRepr::Word("all".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    pub k_upstream: Upstream,
    pub helper_separator: String,
    /// Minimum |I(D) − I(D|D)|, in nats, for a Shannon score to be defined.
    pub degeneracy_epsilon: f64,
    pub want_greedy: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self {
            k_upstream: Upstream::Count(0),
            helper_separator: "\n".to_string(),
            degeneracy_epsilon: 1e-9,
            want_greedy: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Unconditional,
    GivenSummary,
    GivenDocument,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Unconditional => "I(D)",
            Scenario::GivenSummary => "I(D|S)",
            Scenario::GivenDocument => "I(D|D)",
        })
    }
}

/// Per-sentence token scores for one scenario and their totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoProfile {
    pub scenario: Scenario,
    pub per_sentence: Vec<TokenScores>,
    pub total_info: f64,
    pub total_tokens: usize,
    pub greedy_hits: Option<usize>,
}

impl InfoProfile {
    /// Totals are sentence sums added in sentence order, so a profile's
    /// total equals the sum of its single-sentence profiles bit for bit.
    pub fn from_sentences(scenario: Scenario, per_sentence: Vec<TokenScores>) -> Self {
        let total_info = per_sentence.iter().map(TokenScores::total).sum();
        let total_tokens = per_sentence.iter().map(|s| s.tokens.len()).sum();
        let greedy_hits = per_sentence.iter().map(TokenScores::greedy_hits).sum::<Option<usize>>();
        Self {
            scenario,
            per_sentence,
            total_info,
            total_tokens,
            greedy_hits,
        }
    }

    /// Fraction of tokens the backend would have generated greedily.
    pub fn greedy_accuracy(&self) -> Option<f64> {
        self.greedy_hits.map(|h| {
            if self.total_tokens == 0 {
                0.0
            } else {
                h as f64 / self.total_tokens as f64
            }
        })
    }

    fn relabel(mut self, scenario: Scenario) -> Self {
        self.scenario = scenario;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ShannonScore,
    InfoDiff,
    BlancShannon,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::ShannonScore, MetricKind::InfoDiff, MetricKind::BlancShannon];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::ShannonScore => "shannon_score",
            MetricKind::InfoDiff => "info_diff",
            MetricKind::BlancShannon => "blanc_shannon",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match key.as_str() {
            "shannon" | "shannonscore" => Ok(MetricKind::ShannonScore),
            "infodiff" | "id" | "informationdifference" => Ok(MetricKind::InfoDiff),
            "blanc" | "blancshannon" => Ok(MetricKind::BlancShannon),
            _ => Err(format!(
                "unknown metric {s:?} (expected shannon_score, info_diff or blanc_shannon)"
            )),
        }
    }
}

/// Metric values for one document–summary pair, with the profiles they
/// were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    /// `None` when not requested or when the normalization is degenerate.
    pub shannon_score: Option<f64>,
    pub info_diff: f64,
    /// `None` when not requested or when greedy flags are unavailable.
    pub blanc_shannon: Option<f64>,
    pub unconditional: InfoProfile,
    pub given_summary: InfoProfile,
    pub given_document: Option<InfoProfile>,
    pub config: ScoringConfig,
}

impl MetricResult {
    fn new(
        unconditional: InfoProfile,
        given_summary: InfoProfile,
        given_document: Option<InfoProfile>,
        config: &ScoringConfig,
    ) -> Self {
        let mut result = Self {
            shannon_score: None,
            info_diff: unconditional.total_info - given_summary.total_info,
            blanc_shannon: None,
            unconditional,
            given_summary,
            given_document,
            config: config.clone(),
        };
        result.shannon_score = result.metric(MetricKind::ShannonScore).ok();
        result.blanc_shannon = result.metric(MetricKind::BlancShannon).ok();
        result
    }

    /// Value of one metric, or the reason it is undefined.
    pub fn metric(&self, kind: MetricKind) -> Result<f64, MetricError> {
        match kind {
            MetricKind::InfoDiff => Ok(self.info_diff),
            MetricKind::ShannonScore => {
                let given_document = self.given_document.as_ref().ok_or(MetricError::NotComputed(kind))?;
                let denominator = self.unconditional.total_info - given_document.total_info;
                if denominator.is_nan() || denominator.abs() < self.config.degeneracy_epsilon {
                    return Err(MetricError::DegenerateNormalization {
                        unconditional: self.unconditional.total_info,
                        given_document: given_document.total_info,
                    });
                }
                Ok(self.info_diff / denominator)
            }
            MetricKind::BlancShannon => {
                match (
                    self.given_summary.greedy_accuracy(),
                    self.unconditional.greedy_accuracy(),
                ) {
                    (Some(help), Some(base)) => Ok(help - base),
                    _ => Err(MetricError::GreedyUnsupported),
                }
            }
        }
    }
}

/// Scores documents against one backend and configuration.
///
/// `workers > 1` scores sentences of a profile concurrently; results are
/// keyed by sentence index, so the outcome does not depend on scheduling.
pub struct InfoScorer<'a> {
    backend: &'a dyn ScoringBackend,
    config: &'a ScoringConfig,
    workers: usize,
}

impl<'a> InfoScorer<'a> {
    pub fn new(backend: &'a dyn ScoringBackend, config: &'a ScoringConfig) -> Self {
        Self {
            backend,
            config,
            workers: 1,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn want_greedy(&self) -> bool {
        self.config.want_greedy && self.backend.supports_greedy()
    }

    /// Prompt for sentence `index`. When the backend can count tokens,
    /// upstream sentences are dropped oldest-first until the request fits;
    /// anything still too long is left-truncated by the backend.
    pub fn prompt_for(&self, doc: &Document, index: usize, helper: Option<&str>) -> String {
        let sentence = doc.sentence_text(index);
        let k = self.config.k_upstream.resolve(index);
        let limit = self.backend.context_limit();
        let sentence_tokens = self.backend.token_count(sentence);
        let mut first = index - k;
        loop {
            let upstream = (first < index).then(|| doc.span_text(first, index - 1));
            let prompt = match (helper, upstream) {
                (Some(h), Some(u)) => format!("{h}{}{u}", self.config.helper_separator),
                (Some(h), None) => format!("{h}{}", self.config.helper_separator),
                (None, Some(u)) => u.to_string(),
                (None, None) => String::new(),
            };
            if first == index {
                return prompt;
            }
            match (self.backend.token_count(&prompt), sentence_tokens) {
                (Some(p), Some(s)) if p + s > limit => first += 1,
                _ => return prompt,
            }
        }
    }

    fn score_sentence(
        &self,
        doc: &Document,
        index: usize,
        helper: Option<&str>,
        scenario: Scenario,
    ) -> Result<TokenScores, MetricError> {
        let request = ScoreRequest::new(
            self.prompt_for(doc, index, helper),
            doc.sentence_text(index),
            self.want_greedy(),
        );
        self.backend.score(&request).map_err(|source| MetricError::Backend {
            sentence: index,
            scenario,
            source,
        })
    }

    fn profile(&self, doc: &Document, helper: Option<&str>, scenario: Scenario) -> Result<InfoProfile, MetricError> {
        if doc.is_empty() {
            return Err(MetricError::EmptyDocument);
        }
        let helper = helper.filter(|h| !h.trim().is_empty());
        let n = doc.len();
        let per_sentence = if self.workers == 1 || n == 1 {
            (0..n)
                .map(|i| self.score_sentence(doc, i, helper, scenario))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            let slots: Vec<Mutex<Option<Result<TokenScores, MetricError>>>> =
                (0..n).map(|_| Mutex::new(None)).collect();
            let next = AtomicUsize::new(0);
            thread::scope(|scope| {
                for _ in 0..self.workers.min(n) {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        let scored = self.score_sentence(doc, i, helper, scenario);
                        *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(scored);
                    });
                }
            });
            slots
                .into_iter()
                .map(|slot| {
                    slot.into_inner()
                        .unwrap_or_else(|e| e.into_inner())
                        .expect("every sentence slot is filled")
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        Ok(InfoProfile::from_sentences(scenario, per_sentence))
    }

    /// Information of `doc` with an optional helper text. The profile is
    /// labelled by what the helper is: none, the document itself, or other.
    pub fn document_info(&self, doc: &Document, helper: Option<&str>) -> Result<InfoProfile, MetricError> {
        let scenario = match helper.filter(|h| !h.trim().is_empty()) {
            None => Scenario::Unconditional,
            Some(h) if h == doc.text => Scenario::GivenDocument,
            Some(_) => Scenario::GivenSummary,
        };
        self.profile(doc, helper, scenario)
    }

    fn given_summary(
        &self,
        doc: &Document,
        summary: &str,
        unconditional: &InfoProfile,
    ) -> Result<InfoProfile, MetricError> {
        if summary.trim().is_empty() {
            Ok(unconditional.clone().relabel(Scenario::GivenSummary))
        } else {
            self.profile(doc, Some(summary), Scenario::GivenSummary)
        }
    }

    pub fn information_difference(&self, doc: &Document, summary: &str) -> Result<f64, MetricError> {
        self.evaluate_selected(doc, summary, &[MetricKind::InfoDiff])
            .map(|r| r.info_diff)
    }

    pub fn shannon_score(&self, doc: &Document, summary: &str) -> Result<f64, MetricError> {
        self.evaluate_selected(doc, summary, &[MetricKind::ShannonScore])?
            .metric(MetricKind::ShannonScore)
    }

    pub fn blanc_shannon(&self, doc: &Document, summary: &str) -> Result<f64, MetricError> {
        if !self.want_greedy() {
            return Err(MetricError::GreedyUnsupported);
        }
        self.evaluate_selected(doc, summary, &[MetricKind::BlancShannon])?
            .metric(MetricKind::BlancShannon)
    }

    /// All three metrics from one scoring pass per scenario.
    pub fn evaluate(&self, doc: &Document, summary: &str) -> Result<MetricResult, MetricError> {
        self.evaluate_selected(doc, summary, &MetricKind::ALL)
    }

    /// Like [`Self::evaluate`] but skips I(D|D) unless the Shannon score is
    /// requested. Undefined metrics are `None` in the result; use
    /// [`MetricResult::metric`] for the reason.
    pub fn evaluate_selected(
        &self,
        doc: &Document,
        summary: &str,
        metrics: &[MetricKind],
    ) -> Result<MetricResult, MetricError> {
        let unconditional = self.profile(doc, None, Scenario::Unconditional)?;
        let given_summary = self.given_summary(doc, summary, &unconditional)?;
        let given_document = if metrics.contains(&MetricKind::ShannonScore) {
            Some(self.profile(doc, Some(&doc.text), Scenario::GivenDocument)?)
        } else {
            None
        };
        Ok(MetricResult::new(
            unconditional,
            given_summary,
            given_document,
            self.config,
        ))
    }

    /// Evaluates several candidate summaries of one document, scoring I(D)
    /// and I(D|D) once and sharing them across the results.
    pub fn evaluate_many(
        &self,
        doc: &Document,
        summaries: &[&str],
        metrics: &[MetricKind],
    ) -> Result<Vec<MetricResult>, MetricError> {
        let unconditional = self.profile(doc, None, Scenario::Unconditional)?;
        let given_document = if metrics.contains(&MetricKind::ShannonScore) {
            Some(self.profile(doc, Some(&doc.text), Scenario::GivenDocument)?)
        } else {
            None
        };
        summaries
            .iter()
            .map(|summary| {
                let given_summary = self.given_summary(doc, summary, &unconditional)?;
                Ok(MetricResult::new(
                    unconditional.clone(),
                    given_summary,
                    given_document.clone(),
                    self.config,
                ))
            })
            .collect()
    }
}

pub fn document_info(
    doc: &Document,
    helper: Option<&str>,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
) -> Result<InfoProfile, MetricError> {
    InfoScorer::new(backend, config).document_info(doc, helper)
}

pub fn information_difference(
    doc: &Document,
    summary: &str,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
) -> Result<f64, MetricError> {
    InfoScorer::new(backend, config).information_difference(doc, summary)
}

pub fn shannon_score(
    doc: &Document,
    summary: &str,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
) -> Result<f64, MetricError> {
    InfoScorer::new(backend, config).shannon_score(doc, summary)
}

pub fn blanc_shannon(
    doc: &Document,
    summary: &str,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
) -> Result<f64, MetricError> {
    InfoScorer::new(backend, config).blanc_shannon(doc, summary)
}

pub fn evaluate(
    doc: &Document,
    summary: &str,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
) -> Result<MetricResult, MetricError> {
    InfoScorer::new(backend, config).evaluate(doc, summary)
}
