//! Seeded synthetic corpora for tests, benchmarks and smoke runs.
//!
//! Each document draws its content words from its own topic vocabulary.
//! Vocabularies of different topics are disjoint; only a small set of
//! function words is shared. A document's reference summary is built from
//! short word spans copied out of its own sentences.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ONSETS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const FUNCTION_WORDS: [&str; 8] = ["the", "a", "of", "and", "in", "to", "with", "on"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub sentences_per_doc: usize,
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    pub topic_vocabulary: usize,
    /// Probability that a word slot holds a function word.
    pub function_word_rate: f64,
    /// Copied spans in each reference summary.
    pub summary_spans: usize,
    pub summary_span_words: usize,
    /// Extra sentences per topic in the training corpus.
    pub training_sentences_per_topic: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            documents: 30,
            sentences_per_doc: 5,
            words_per_sentence: (6, 11),
            topic_vocabulary: 24,
            function_word_rate: 0.3,
            summary_spans: 3,
            summary_span_words: 3,
            training_sentences_per_topic: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDoc {
    pub id: String,
    pub text: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<SyntheticDoc>,
    /// Held-out sentences from the same topics, for training a backend.
    pub training: Vec<String>,
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

fn sentence(vocab: &[String], cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Vec<String> {
    let (lo, hi) = cfg.words_per_sentence;
    let n = rng.random_range(lo.max(1)..=hi.max(lo.max(1)));
    (0..n)
        .map(|i| {
            let function = i > 0 && rng.random_bool(cfg.function_word_rate);
            if function {
                FUNCTION_WORDS.choose(rng).unwrap().to_string()
            } else {
                vocab.choose(rng).unwrap().clone()
            }
        })
        .collect()
}

fn render(words: &[String]) -> String {
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        let upper = first.to_ascii_uppercase();
        text.replace_range(..1, &upper);
    }
    text.push('.');
    text
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used: HashSet<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
    let mut documents = Vec::with_capacity(cfg.documents);
    let mut training = Vec::new();

    for d in 0..cfg.documents {
        let mut vocab = Vec::with_capacity(cfg.topic_vocabulary);
        while vocab.len() < cfg.topic_vocabulary.max(1) {
            let w = pseudo_word(&mut rng);
            if used.insert(w.clone()) {
                vocab.push(w);
            }
        }
        let sentences: Vec<Vec<String>> = (0..cfg.sentences_per_doc.max(1))
            .map(|_| sentence(&vocab, cfg, &mut rng))
            .collect();
        let text = sentences.iter().map(|s| render(s)).collect::<Vec<_>>().join(" ");

        let mut order: Vec<usize> = (0..sentences.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(cfg.summary_spans.max(1));
        order.sort_unstable();
        let mut summary_words = Vec::new();
        for i in order {
            let s = &sentences[i];
            let len = cfg.summary_span_words.clamp(1, s.len());
            let start = rng.random_range(0..=s.len() - len);
            summary_words.extend_from_slice(&s[start..start + len]);
        }
        documents.push(SyntheticDoc {
            id: format!("doc{d:03}"),
            text,
            reference: render(&summary_words),
        });

        for _ in 0..cfg.training_sentences_per_topic {
            training.push(render(&sentence(&vocab, cfg, &mut rng)));
        }
    }
    SyntheticCorpus { documents, training }
}
