//! Autoregressive token scoring.
//!
//! A backend turns `(prompt, continuation)` into per-token surprisal of the
//! continuation in nats, optionally with greedy-match flags. Three
//! implementations ship here: a uniform model that ignores context, the
//! reference n-gram model with a prompt cache, and an HTTP client for the
//! token-logprob wire protocol.

mod ngram;
pub mod protocol;
mod remote;
mod tokenize;
mod uniform;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ngram::{NGramConfig, ReferenceBackend};
pub use remote::{RemoteBackend, RemoteConfig};
pub use tokenize::{normalize_piece, pieces};
pub use uniform::UniformBackend;

/// Context limit used by the in-process backends unless configured otherwise.
pub const DEFAULT_CONTEXT_LIMIT: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("continuation is empty")]
    EmptyContinuation,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("protocol error: {message} (response: {excerpt})")]
    Protocol { message: String, excerpt: String },
}

impl BackendError {
    pub(crate) fn protocol(message: impl Into<String>, body: &str) -> Self {
        const MAX: usize = 200;
        let excerpt = match body.char_indices().nth(MAX) {
            Some((cut, _)) => format!("{}…", &body[..cut]),
            None => body.to_string(),
        };
        BackendError::Protocol {
            message: message.into(),
            excerpt,
        }
    }
}

/// One scoring call. Also the JSON body of `POST /v1/score`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub prompt: String,
    pub continuation: String,
    pub want_greedy: bool,
}

impl ScoreRequest {
    pub fn new(prompt: impl Into<String>, continuation: impl Into<String>, want_greedy: bool) -> Self {
        Self {
            prompt: prompt.into(),
            continuation: continuation.into(),
            want_greedy,
        }
    }
}

/// Per-token scores for a continuation, in the backend's own tokenization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenScores {
    pub tokens: Vec<String>,
    /// −ln p(token | context), nats.
    pub surprisals: Vec<f64>,
    pub greedy_correct: Option<Vec<bool>>,
    pub truncated: bool,
    pub model_id: String,
    pub context_limit: usize,
}

impl TokenScores {
    pub fn total(&self) -> f64 {
        self.surprisals.iter().sum()
    }

    pub fn greedy_hits(&self) -> Option<usize> {
        self.greedy_correct
            .as_ref()
            .map(|flags| flags.iter().filter(|&&hit| hit).count())
    }

    /// Checks the structural contract every backend response must satisfy.
    /// `continuation` enables the detokenization round-trip check.
    pub fn validate(&self, want_greedy: bool, continuation: Option<&str>) -> Result<(), String> {
        if self.tokens.len() != self.surprisals.len() {
            return Err(format!(
                "{} tokens but {} surprisals",
                self.tokens.len(),
                self.surprisals.len()
            ));
        }
        if let Some((i, s)) = self
            .surprisals
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || **s < 0.0)
        {
            return Err(format!("surprisal {i} is {s}, expected a finite value >= 0"));
        }
        match (&self.greedy_correct, want_greedy) {
            (Some(flags), true) if flags.len() != self.tokens.len() => {
                return Err(format!("{} tokens but {} greedy flags", self.tokens.len(), flags.len()))
            }
            (None, true) => return Err("greedy flags requested but missing".into()),
            (Some(_), false) => return Err("greedy flags present but not requested".into()),
            _ => {}
        }
        if let Some(text) = continuation {
            if self.tokens.concat() != text {
                return Err("tokens do not reconstruct the continuation".into());
            }
        }
        Ok(())
    }
}

/// Anything that can score a continuation given a prompt.
///
/// Implementations must be deterministic for a fixed request if callers are
/// to rely on exact metric identities.
pub trait ScoringBackend: Send + Sync {
    fn model_id(&self) -> &str;

    /// Maximum prompt + continuation length in tokens.
    fn context_limit(&self) -> usize;

    fn supports_greedy(&self) -> bool;

    fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError>;

    /// Token count of `text` under this backend, when it can be computed
    /// locally. Used to drop upstream sentences before the helper is cut.
    fn token_count(&self, _text: &str) -> Option<usize> {
        None
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for &B {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }
    fn supports_greedy(&self) -> bool {
        (**self).supports_greedy()
    }
    fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError> {
        (**self).score(request)
    }
    fn token_count(&self, text: &str) -> Option<usize> {
        (**self).token_count(text)
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Box<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
    fn context_limit(&self) -> usize {
        (**self).context_limit()
    }
    fn supports_greedy(&self) -> bool {
        (**self).supports_greedy()
    }
    fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError> {
        (**self).score(request)
    }
    fn token_count(&self, text: &str) -> Option<usize> {
        (**self).token_count(text)
    }
}

/// Number of leading prompt tokens to drop so that prompt + continuation fit
/// in `limit`. Oldest tokens go first.
pub(crate) fn prompt_overflow(prompt_len: usize, continuation_len: usize, limit: usize) -> usize {
    let room = limit.saturating_sub(continuation_len);
    prompt_len.saturating_sub(room)
}
