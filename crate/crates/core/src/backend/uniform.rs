use super::tokenize::{normalize_piece, pieces};
use super::{prompt_overflow, BackendError, ScoreRequest, ScoringBackend, TokenScores, DEFAULT_CONTEXT_LIMIT};

/// Assigns probability 1/|V| to every token regardless of context.
///
/// Greedy flags come from a fixed hash of the token text, so they are
/// prompt-independent as well. Useful as a helper-insensitive baseline.
#[derive(Debug, Clone)]
pub struct UniformBackend {
    vocab_size: usize,
    context_limit: usize,
    model_id: String,
}

impl UniformBackend {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size >= 1, "vocabulary must be non-empty");
        Self {
            vocab_size,
            context_limit: DEFAULT_CONTEXT_LIMIT,
            model_id: format!("uniform-{vocab_size}"),
        }
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit.max(1);
        self
    }

    fn token_hash(&self, piece: &str) -> u64 {
        // FNV-1a, stable across platforms and releases.
        normalize_piece(piece).bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
        }) % self.vocab_size as u64
    }
}

impl ScoringBackend for UniformBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn supports_greedy(&self) -> bool {
        true
    }

    fn token_count(&self, text: &str) -> Option<usize> {
        Some(pieces(text).len())
    }

    fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError> {
        let tokens = pieces(&request.continuation);
        if tokens.is_empty() {
            return Err(BackendError::EmptyContinuation);
        }
        let surprisal = (self.vocab_size as f64).ln();
        let greedy = request
            .want_greedy
            .then(|| tokens.iter().map(|t| self.token_hash(t) == 0).collect());
        let truncated = prompt_overflow(pieces(&request.prompt).len(), tokens.len(), self.context_limit) > 0;
        Ok(TokenScores {
            surprisals: vec![surprisal; tokens.len()],
            tokens: tokens.into_iter().map(str::to_string).collect(),
            greedy_correct: greedy,
            truncated,
            model_id: self.model_id.clone(),
            context_limit: self.context_limit,
        })
    }
}
