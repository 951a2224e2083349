use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use ureq::Agent;

use super::protocol::{InfoResponse, ScoreResponse, INFO_PATH, LOGPROB_BASE, SCORE_PATH};
use super::{prompt_overflow, BackendError, ScoreRequest, ScoringBackend, TokenScores};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Per-request timeout.
    pub timeout: Duration,
    /// Extra attempts after the first failure.
    pub retries: usize,
    pub retry_backoff: Duration,
    /// Maximum number of requests in flight at once.
    pub max_in_flight: usize,
    /// Reject responses whose tokens do not concatenate to the continuation.
    pub strict_detokenization: bool,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            retries: 3,
            retry_backoff: Duration::from_millis(250),
            max_in_flight: 1,
            strict_detokenization: true,
        }
    }
}

/// Client for a token-logprob server speaking the `/v1` protocol.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: Agent,
    info: InfoResponse,
    gate: Gate,
}

enum Failure {
    Retryable(String),
    Fatal(BackendError),
}

impl RemoteBackend {
    /// Connects and reads `/v1/info`. Fails if the server is unreachable
    /// within the retry budget or declares an unsupported log base.
    pub fn connect(config: RemoteConfig) -> Result<Self, BackendError> {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let endpoint = config.endpoint.trim_end_matches('/').to_string();
        let config = RemoteConfig { endpoint, ..config };
        let gate = Gate::new(config.max_in_flight.max(1));
        let mut backend = Self {
            config,
            agent,
            info: InfoResponse {
                model_id: String::new(),
                context_limit: 0,
                logprob_base: String::new(),
            },
            gate,
        };
        let body = backend.with_retries(|b| b.get_info())?;
        let info: InfoResponse = serde_json::from_str(&body)
            .map_err(|e| BackendError::protocol(format!("malformed info response: {e}"), &body))?;
        if info.logprob_base != LOGPROB_BASE {
            return Err(BackendError::protocol(
                format!("unsupported logprob_base {:?}", info.logprob_base),
                &body,
            ));
        }
        if info.context_limit == 0 {
            return Err(BackendError::protocol("context_limit must be positive", &body));
        }
        backend.info = info;
        Ok(backend)
    }

    pub fn info(&self) -> &InfoResponse {
        &self.info
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.config.endpoint, path)
    }

    fn get_info(&self) -> Result<String, Failure> {
        let response = self.agent.get(&self.url(INFO_PATH)).call();
        read_response(response)
    }

    fn post_score(&self, request: &ScoreRequest) -> Result<String, Failure> {
        let response = self.agent.post(&self.url(SCORE_PATH)).send_json(request);
        read_response(response)
    }

    fn with_retries<T>(&self, mut attempt: impl FnMut(&Self) -> Result<T, Failure>) -> Result<T, BackendError> {
        let mut last = String::new();
        for n in 0..=self.config.retries {
            if n > 0 {
                thread::sleep(self.config.retry_backoff * n as u32);
            }
            match attempt(self) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(msg)) => last = msg,
            }
        }
        Err(BackendError::Unavailable(format!(
            "{} after {} attempt(s): {last}",
            self.config.endpoint,
            self.config.retries + 1
        )))
    }

    /// Drops leading prompt words that cannot survive the server's own
    /// truncation. Every whitespace word is at least one token, so keeping
    /// `limit − continuation words` words keeps everything the server could.
    fn preflight(&self, request: &ScoreRequest) -> (ScoreRequest, bool) {
        let prompt_words: Vec<(usize, &str)> = word_offsets(&request.prompt);
        let cont_words = request.continuation.split_whitespace().count();
        let drop = prompt_overflow(prompt_words.len(), cont_words, self.info.context_limit);
        if drop == 0 {
            return (request.clone(), false);
        }
        let prompt = prompt_words
            .get(drop)
            .map_or(String::new(), |&(offset, _)| request.prompt[offset..].to_string());
        (
            ScoreRequest {
                prompt,
                continuation: request.continuation.clone(),
                want_greedy: request.want_greedy,
            },
            true,
        )
    }
}

fn word_offsets(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, &text[s..i]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &text[s..]));
    }
    out
}

fn read_response(response: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<String, Failure> {
    let mut response = match response {
        Ok(r) => r,
        Err(e) => return Err(Failure::Retryable(e.to_string())),
    };
    let status = response.status().as_u16();
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| Failure::Retryable(format!("reading body: {e}")))?;
    match status {
        200 => Ok(body),
        500..=599 => Err(Failure::Retryable(format!("status {status}"))),
        _ => Err(Failure::Fatal(BackendError::protocol(
            format!("status {status}"),
            &body,
        ))),
    }
}

impl ScoringBackend for RemoteBackend {
    fn model_id(&self) -> &str {
        &self.info.model_id
    }

    fn context_limit(&self) -> usize {
        self.info.context_limit
    }

    fn supports_greedy(&self) -> bool {
        true
    }

    fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError> {
        if request.continuation.trim().is_empty() {
            return Err(BackendError::EmptyContinuation);
        }
        let (request, trimmed) = self.preflight(request);
        let body = {
            let _permit = self.gate.acquire();
            self.with_retries(|b| b.post_score(&request))?
        };
        let response: ScoreResponse = serde_json::from_str(&body)
            .map_err(|e| BackendError::protocol(format!("malformed score response: {e}"), &body))?;
        let mut scores = response.into_token_scores(self.info.context_limit);
        let roundtrip = self
            .config
            .strict_detokenization
            .then_some(request.continuation.as_str());
        scores
            .validate(request.want_greedy, roundtrip)
            .map_err(|msg| BackendError::protocol(msg, &body))?;
        scores.truncated |= trimmed;
        Ok(scores)
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}
