//! JSON wire protocol for token-logprob servers.
//!
//! ```text
//! GET  /v1/info  -> {"model_id": str, "context_limit": int, "logprob_base": "e"}
//! POST /v1/score {"prompt": str, "continuation": str, "want_greedy": bool}
//!                -> {"tokens": [str], "surprisals": [num], "greedy_correct": [bool]?,
//!                    "truncated": bool, "model_id": str}
//! ```
//!
//! `greedy_correct` is present iff `want_greedy` was set. Errors carry
//! `{"error": str}` with status 400 (malformed request), 422 (empty
//! continuation) or 503 (model not ready). Surprisals are written with
//! shortest round-trip formatting, so they decode to the identical f64.
//!
//! [`handle`] implements the server side over any [`ScoringBackend`]; it is
//! transport-agnostic and used by conformance tests.

use serde::{Deserialize, Serialize};

use super::{BackendError, ScoreRequest, ScoringBackend, TokenScores};

pub const INFO_PATH: &str = "/v1/info";
pub const SCORE_PATH: &str = "/v1/score";
pub const LOGPROB_BASE: &str = "e";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoResponse {
    pub model_id: String,
    pub context_limit: usize,
    pub logprob_base: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub tokens: Vec<String>,
    pub surprisals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_correct: Option<Vec<bool>>,
    pub truncated: bool,
    pub model_id: String,
}

impl ScoreResponse {
    pub fn into_token_scores(self, context_limit: usize) -> TokenScores {
        TokenScores {
            tokens: self.tokens,
            surprisals: self.surprisals,
            greedy_correct: self.greedy_correct,
            truncated: self.truncated,
            model_id: self.model_id,
            context_limit,
        }
    }
}

impl From<TokenScores> for ScoreResponse {
    fn from(s: TokenScores) -> Self {
        Self {
            tokens: s.tokens,
            surprisals: s.surprisals,
            greedy_correct: s.greedy_correct,
            truncated: s.truncated,
            model_id: s.model_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

fn error(status: u16, message: impl Into<String>) -> (u16, String) {
    let body = ErrorResponse { error: message.into() };
    (status, serde_json::to_string(&body).expect("error body serializes"))
}

/// Serves one protocol request. Returns `(status, json body)`.
pub fn handle(backend: &dyn ScoringBackend, method: &str, path: &str, body: &[u8]) -> (u16, String) {
    match (method, path) {
        ("GET", INFO_PATH) => {
            let info = InfoResponse {
                model_id: backend.model_id().to_string(),
                context_limit: backend.context_limit(),
                logprob_base: LOGPROB_BASE.to_string(),
            };
            (200, serde_json::to_string(&info).expect("info serializes"))
        }
        ("POST", SCORE_PATH) => {
            let request: ScoreRequest = match serde_json::from_slice(body) {
                Ok(r) => r,
                Err(e) => return error(400, format!("malformed request: {e}")),
            };
            if request.want_greedy && !backend.supports_greedy() {
                return error(400, "greedy flags are not supported by this model");
            }
            match backend.score(&request) {
                Ok(scores) => {
                    let response = ScoreResponse::from(scores);
                    (200, serde_json::to_string(&response).expect("response serializes"))
                }
                Err(BackendError::EmptyContinuation) => error(422, "continuation is empty"),
                Err(BackendError::Unavailable(m)) => error(503, m),
                Err(e) => error(500, e.to_string()),
            }
        }
        (_, INFO_PATH | SCORE_PATH) => error(405, "method not allowed"),
        _ => error(404, "not found"),
    }
}
