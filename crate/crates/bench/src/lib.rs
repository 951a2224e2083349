//! Shared fixtures for the benchmarks.

use shannon_core::backend::{NGramConfig, ReferenceBackend};
use shannon_core::synthetic::{generate, SyntheticConfig, SyntheticCorpus};
use shannon_core::text::Document;

/// A seeded synthetic corpus and a reference backend trained on it.
pub fn fixture(documents: usize, sentences_per_doc: usize) -> (SyntheticCorpus, ReferenceBackend) {
    let corpus = generate(&SyntheticConfig {
        documents,
        sentences_per_doc,
        seed: 7,
        ..SyntheticConfig::default()
    });
    let backend = ReferenceBackend::train(&corpus.training, NGramConfig::default()).expect("non-empty corpus");
    (corpus, backend)
}

pub fn document(corpus: &SyntheticCorpus, index: usize) -> Document {
    let d = &corpus.documents[index];
    Document::new(d.id.clone(), d.text.clone()).expect("synthetic documents are non-empty")
}

/// Two length-`n` series with ties, from a fixed linear congruential walk.
pub fn tied_series(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut state = 0x2545_f491_u64;
    let mut next = |m: u64| {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((state >> 33) % m) as f64
    };
    let xs: Vec<f64> = (0..n).map(|_| next(50)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x + next(20)).collect();
    (xs, ys)
}
