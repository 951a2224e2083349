//! Reference language model: an add-alpha n-gram model interpolated with a
//! cache over the prompt and the already-scored continuation.
//!
//! ```text
//! p(x | ctx) = λ · cache(x | history) + (1 − λ) · (c(h, x) + α) / (c(h) + α·|V|)
//! ```
//!
//! `h` is the last n − 1 tokens of `BOS^(n−1) ++ continuation<i` and `|V|`
//! counts every token that can be predicted (all words, EOS and UNK; never
//! BOS). The cache is an add-one unigram (order 1) or bigram (order 2)
//! distribution over `prompt ++ continuation<i`, so an empty history makes
//! it uniform. The prompt reaches the prediction only through the cache:
//! with λ > 0 the model copies from its prompt, and with λ = 0 it ignores
//! the prompt entirely.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tokenize::{normalize_piece, pieces};
use super::{prompt_overflow, BackendError, ScoreRequest, ScoringBackend, TokenScores, DEFAULT_CONTEXT_LIMIT};

const BOS: u32 = 0;
const EOS: u32 = 1;
const UNK: u32 = 2;
const RESERVED: [&str; 3] = ["<s>", "</s>", "<unk>"];
const MODEL_FORMAT: &str = "shannon-ngram/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGramConfig {
    pub order: usize,
    pub smoothing_alpha: f64,
    /// λ, the cache's share of the interpolated probability.
    pub cache_weight: f64,
    pub cache_order: usize,
}

impl Default for NGramConfig {
    fn default() -> Self {
        Self {
            order: 3,
            smoothing_alpha: 0.1,
            cache_weight: 0.5,
            cache_order: 2,
        }
    }
}

impl NGramConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |msg: &str| Err(BackendError::InvalidConfig(msg.to_string()));
        if self.order < 1 {
            return bad("n-gram order must be >= 1");
        }
        if !(self.smoothing_alpha.is_finite() && self.smoothing_alpha > 0.0) {
            return bad("smoothing alpha must be a positive finite number");
        }
        if !(0.0..1.0).contains(&self.cache_weight) {
            return bad("cache weight must lie in [0, 1)");
        }
        if !matches!(self.cache_order, 1 | 2) {
            return bad("cache order must be 1 or 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    config: NGramConfig,
    context_limit: usize,
    model_id: String,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    counts: HashMap<Vec<u32>, ContextCounts>,
}

impl ReferenceBackend {
    /// Trains on `corpus`, one entry per document.
    pub fn train<S: AsRef<str>>(corpus: &[S], config: NGramConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let tokenized: Vec<Vec<String>> = corpus
            .iter()
            .map(|doc| {
                pieces(doc.as_ref())
                    .into_iter()
                    .map(normalize_piece)
                    .collect::<Vec<_>>()
            })
            .filter(|doc| !doc.is_empty())
            .collect();
        if tokenized.is_empty() {
            return Err(BackendError::EmptyCorpus);
        }

        let mut words: Vec<&String> = tokenized.iter().flatten().collect();
        words.sort_unstable();
        words.dedup();
        let vocab: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().cloned())
            .collect();
        let index = build_index(&vocab);

        let history = config.order - 1;
        let mut counts: HashMap<Vec<u32>, ContextCounts> = HashMap::new();
        for doc in &tokenized {
            let mut ids = vec![BOS; history];
            ids.extend(doc.iter().map(|w| index[w]));
            ids.push(EOS);
            for t in history..ids.len() {
                let entry = counts.entry(ids[t - history..t].to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(ids[t]).or_default() += 1;
            }
        }

        let mut model = Self {
            config,
            context_limit: DEFAULT_CONTEXT_LIMIT,
            model_id: String::new(),
            vocab,
            index,
            counts,
        };
        model.model_id = model.compute_model_id();
        Ok(model)
    }

    pub fn with_context_limit(mut self, limit: usize) -> Self {
        self.context_limit = limit.max(1);
        self
    }

    /// Replaces the prompt-cache parameters, which only act at scoring
    /// time, keeping the trained counts.
    pub fn with_cache(mut self, cache_weight: f64, cache_order: usize) -> Result<Self, BackendError> {
        let config = NGramConfig {
            cache_weight,
            cache_order,
            ..self.config
        };
        config.validate()?;
        self.config = config;
        self.model_id = self.compute_model_id();
        Ok(self)
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    /// Number of predictable tokens (all words plus EOS and UNK).
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() - 1
    }

    pub fn token_id(&self, piece: &str) -> u32 {
        self.index.get(&normalize_piece(piece)).copied().unwrap_or(UNK)
    }

    pub fn token_name(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    /// Full next-token distribution after `prompt` and the already seen
    /// continuation `prefix`, indexed by token id. BOS always has
    /// probability 0. No context truncation is applied.
    pub fn next_token_probabilities(&self, prompt: &str, prefix: &str) -> Vec<f64> {
        let mut state = State::new(self);
        for piece in pieces(prompt) {
            state.prime(self.token_id(piece));
        }
        for piece in pieces(prefix) {
            state.push(self.token_id(piece));
        }
        (0..self.vocab.len() as u32)
            .map(|id| if id == BOS { 0.0 } else { state.prob(id) })
            .collect()
    }

    fn ngram_prob(&self, context: &[u32], token: u32) -> f64 {
        let alpha = self.config.smoothing_alpha;
        let v = self.vocab_size() as f64;
        match self.counts.get(context) {
            Some(c) => {
                let hits = c.next.get(&token).copied().unwrap_or(0) as f64;
                (hits + alpha) / (c.total as f64 + alpha * v)
            }
            None => 1.0 / v,
        }
    }

    fn to_file(&self) -> ModelFile {
        let mut counts: Vec<CountRow> = self
            .counts
            .iter()
            .map(|(context, c)| CountRow {
                context: context.clone(),
                next: c
                    .next
                    .iter()
                    .map(|(&k, &v)| (k, v))
                    .collect::<BTreeMap<_, _>>()
                    .into_iter()
                    .collect(),
            })
            .collect();
        counts.sort_by(|a, b| a.context.cmp(&b.context));
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            config: self.config,
            context_limit: self.context_limit,
            vocab: self.vocab[RESERVED.len()..].to_vec(),
            counts,
        }
    }

    fn compute_model_id(&self) -> String {
        let mut file = self.to_file();
        file.context_limit = 0;
        let bytes = serde_json::to_vec(&file).expect("model file serializes");
        let digest = Sha256::digest(&bytes);
        let fp: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        let c = &self.config;
        format!(
            "ngram-o{}-a{}-l{}-c{}-{}",
            c.order, c.smoothing_alpha, c.cache_weight, c.cache_order, fp
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model file serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        let file: ModelFile =
            serde_json::from_str(json).map_err(|e| BackendError::InvalidConfig(format!("model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(BackendError::InvalidConfig(format!(
                "unknown model format {:?}",
                file.format
            )));
        }
        file.config.validate()?;
        let vocab: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(file.vocab).collect();
        let width = file.config.order - 1;
        let mut counts = HashMap::new();
        for row in file.counts {
            if row.context.len() != width
                || row
                    .context
                    .iter()
                    .chain(row.next.iter().map(|(k, _)| k))
                    .any(|&id| id as usize >= vocab.len())
            {
                return Err(BackendError::InvalidConfig("model file: malformed count row".into()));
            }
            let next: HashMap<u32, u64> = row.next.into_iter().collect();
            let total = next.values().sum();
            counts.insert(row.context, ContextCounts { total, next });
        }
        let mut model = Self {
            config: file.config,
            context_limit: file.context_limit.max(1),
            model_id: String::new(),
            index: build_index(&vocab),
            vocab,
            counts,
        };
        model.model_id = model.compute_model_id();
        Ok(model)
    }
}

fn build_index(vocab: &[String]) -> HashMap<String, u32> {
    vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    config: NGramConfig,
    context_limit: usize,
    vocab: Vec<String>,
    counts: Vec<CountRow>,
}

#[derive(Serialize, Deserialize)]
struct CountRow {
    context: Vec<u32>,
    next: Vec<(u32, u64)>,
}

/// Add-one cache over the token history seen so far in one request.
struct PromptCache {
    order: usize,
    vocab: f64,
    unigrams: HashMap<u32, u64>,
    total: u64,
    bigrams: HashMap<u32, HashMap<u32, u64>>,
    followers: HashMap<u32, u64>,
    last: Option<u32>,
}

impl PromptCache {
    fn new(order: usize, vocab: usize) -> Self {
        Self {
            order,
            vocab: vocab as f64,
            unigrams: HashMap::new(),
            total: 0,
            bigrams: HashMap::new(),
            followers: HashMap::new(),
            last: None,
        }
    }

    fn push(&mut self, token: u32) {
        *self.unigrams.entry(token).or_default() += 1;
        self.total += 1;
        if let Some(prev) = self.last {
            *self.bigrams.entry(prev).or_default().entry(token).or_default() += 1;
            *self.followers.entry(prev).or_default() += 1;
        }
        self.last = Some(token);
    }

    fn prob(&self, token: u32) -> f64 {
        if self.order == 1 {
            let hits = self.unigrams.get(&token).copied().unwrap_or(0) as f64;
            return (hits + 1.0) / (self.total as f64 + self.vocab);
        }
        match self.last {
            None => 1.0 / self.vocab,
            Some(prev) => {
                let hits = self
                    .bigrams
                    .get(&prev)
                    .and_then(|m| m.get(&token))
                    .copied()
                    .unwrap_or(0) as f64;
                let seen = self.followers.get(&prev).copied().unwrap_or(0) as f64;
                (hits + 1.0) / (seen + self.vocab)
            }
        }
    }

    /// Tokens with a non-zero count in the current cache context.
    fn candidates(&self) -> Vec<u32> {
        if self.order == 1 {
            return self.unigrams.keys().copied().collect();
        }
        self.last
            .and_then(|prev| self.bigrams.get(&prev))
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }
}

struct State<'m> {
    model: &'m ReferenceBackend,
    stream: Vec<u32>,
    cache: PromptCache,
}

impl<'m> State<'m> {
    fn new(model: &'m ReferenceBackend) -> Self {
        Self {
            model,
            stream: vec![BOS; model.config.order - 1],
            cache: PromptCache::new(model.config.cache_order, model.vocab_size()),
        }
    }

    /// Adds a prompt token. Prompt tokens reach the prediction only
    /// through the cache.
    fn prime(&mut self, token: u32) {
        self.cache.push(token);
    }

    fn push(&mut self, token: u32) {
        self.stream.push(token);
        self.cache.push(token);
    }

    fn context(&self) -> &[u32] {
        &self.stream[self.stream.len() + 1 - self.model.config.order..]
    }

    fn prob(&self, token: u32) -> f64 {
        let lambda = self.model.config.cache_weight;
        lambda * self.cache.prob(token) + (1.0 - lambda) * self.model.ngram_prob(self.context(), token)
    }

    /// Most probable next token; ties go to the lowest id.
    ///
    /// Every token outside the candidate set has the same probability, so
    /// the lowest-id such token stands in for all of them.
    fn argmax(&self) -> u32 {
        let mut candidates = self.cache.candidates();
        if let Some(c) = self.model.counts.get(self.context()) {
            candidates.extend(c.next.keys().copied());
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut baseline = EOS;
        for &id in &candidates {
            if id == baseline {
                baseline += 1;
            } else if id > baseline {
                break;
            }
        }
        if (baseline as usize) < self.model.vocab.len() {
            candidates.push(baseline);
        }

        let mut best = (f64::NEG_INFINITY, u32::MAX);
        for id in candidates {
            let p = self.prob(id);
            if p > best.0 || (p == best.0 && id < best.1) {
                best = (p, id);
            }
        }
        best.1
    }
}

impl ScoringBackend for ReferenceBackend {
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
        let continuation = pieces(&request.continuation);
        if continuation.is_empty() {
            return Err(BackendError::EmptyContinuation);
        }
        let prompt = pieces(&request.prompt);
        let dropped = prompt_overflow(prompt.len(), continuation.len(), self.context_limit);

        let mut state = State::new(self);
        for piece in &prompt[dropped..] {
            state.prime(self.token_id(piece));
        }

        let mut surprisals = Vec::with_capacity(continuation.len());
        let mut greedy = request.want_greedy.then(|| Vec::with_capacity(continuation.len()));
        for piece in &continuation {
            let token = self.token_id(piece);
            let s = -state.prob(token).ln();
            surprisals.push(if s > 0.0 { s } else { 0.0 });
            if let Some(flags) = greedy.as_mut() {
                flags.push(state.argmax() == token);
            }
            state.push(token);
        }

        Ok(TokenScores {
            tokens: continuation.into_iter().map(str::to_string).collect(),
            surprisals,
            greedy_correct: greedy,
            truncated: dropped > 0,
            model_id: self.model_id.clone(),
            context_limit: self.context_limit,
        })
    }
}
