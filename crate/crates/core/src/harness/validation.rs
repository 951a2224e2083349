use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{config_hash, HarnessError};
use crate::backend::ScoringBackend;
use crate::metrics::{InfoScorer, MetricKind, ScoringConfig};
use crate::text::Document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Shuffled,
    Wrong,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Original, Variant::Shuffled, Variant::Wrong];
}

/// One value per summary variant. `None` marks an undefined metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Triple {
    pub original: Option<f64>,
    pub shuffled: Option<f64>,
    pub wrong: Option<f64>,
}

impl Triple {
    fn from_fn(mut f: impl FnMut(Variant) -> Option<f64>) -> Self {
        Self {
            original: f(Variant::Original),
            shuffled: f(Variant::Shuffled),
            wrong: f(Variant::Wrong),
        }
    }

    fn all(&self) -> Option<[f64; 3]> {
        Some([self.original?, self.shuffled?, self.wrong?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocValidation {
    pub doc_id: String,
    /// Document whose reference serves as the wrong summary.
    pub wrong_from: String,
    pub shuffled_summary: String,
    pub total_tokens: usize,
    pub unconditional_info: f64,
    /// I(D|S) for each variant.
    pub given_summary_info: Triple,
    pub metrics: BTreeMap<String, Triple>,
    /// Greedy-correct token counts with each variant as helper, when the
    /// backend reports them.
    pub greedy_hits: Option<[usize; 3]>,
    pub unconditional_greedy_hits: Option<usize>,
}

/// How well one metric separates the three variants over the corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separation {
    pub metric: String,
    /// Documents where the metric is defined for all three variants.
    pub documents: usize,
    pub undefined: usize,
    pub mean: Triple,
    pub min_original_minus_wrong: Option<f64>,
    /// Documents with original ≤ wrong.
    pub wrong_violations: usize,
    /// Documents with original ≤ shuffled.
    pub shuffled_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub config_hash: String,
    pub documents: Vec<DocValidation>,
    pub separation: Vec<Separation>,
    /// Corpus greedy-hit totals: without helper, then per variant.
    pub greedy_totals: Option<[usize; 4]>,
    pub total_tokens: usize,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub metrics: Vec<MetricKind>,
    pub seed: u64,
    /// Score a seeded random sample of this many documents.
    pub sample: Option<usize>,
    pub sentence_workers: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            metrics: MetricKind::ALL.to_vec(),
            seed: 0,
            sample: None,
            sentence_workers: 1,
        }
    }
}

/// Random permutation of `0..n` with no fixed point, by rejection.
fn derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

fn shuffle_words(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    words.shuffle(rng);
    words.join(" ")
}

/// Scores each document against its reference summary, a word-shuffled
/// copy of it, and the reference of another document.
///
/// The wrong summaries follow a seeded derangement, so no document is
/// paired with its own reference. The same seed gives the same report.
pub fn baseline_validation(
    inputs: &[(&Document, &str)],
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
    options: &ValidationOptions,
) -> Result<ValidationReport, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let chosen: Vec<usize> = match options.sample {
        Some(m) if m < inputs.len() => {
            let mut picked = index::sample(&mut rng, inputs.len(), m).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..inputs.len()).collect(),
    };
    if chosen.len() < 2 {
        return Err(HarnessError::NeedTwoDocuments(chosen.len()));
    }
    let wrong = derangement(chosen.len(), &mut rng);
    let shuffled: Vec<String> = chosen.iter().map(|&i| shuffle_words(inputs[i].1, &mut rng)).collect();

    let scorer = InfoScorer::new(backend, config).with_workers(options.sentence_workers);
    let mut documents = Vec::with_capacity(chosen.len());
    for (pos, &i) in chosen.iter().enumerate() {
        let (doc, reference) = inputs[i];
        let (wrong_doc, wrong_summary) = inputs[chosen[wrong[pos]]];
        let results = scorer.evaluate_many(doc, &[reference, &shuffled[pos], wrong_summary], &options.metrics)?;
        let variant = |v: Variant| &results[v as usize];
        let metrics = options
            .metrics
            .iter()
            .map(|&m| (m.name().to_string(), Triple::from_fn(|v| variant(v).metric(m).ok())))
            .collect();
        let hits: Vec<Option<usize>> = results.iter().map(|r| r.given_summary.greedy_hits).collect();
        let greedy_hits = match hits[..] {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            _ => None,
        };
        documents.push(DocValidation {
            doc_id: doc.id.clone(),
            wrong_from: wrong_doc.id.clone(),
            shuffled_summary: shuffled[pos].clone(),
            total_tokens: results[0].unconditional.total_tokens,
            unconditional_info: results[0].unconditional.total_info,
            given_summary_info: Triple::from_fn(|v| Some(variant(v).given_summary.total_info)),
            metrics,
            greedy_hits,
            unconditional_greedy_hits: results[0].unconditional.greedy_hits,
        });
    }

    let separation = options
        .metrics
        .iter()
        .map(|m| separation(m.name(), &documents))
        .collect();
    let greedy_totals = documents.iter().try_fold([0usize; 4], |mut acc, d| {
        let hits = d.greedy_hits?;
        acc[0] += d.unconditional_greedy_hits?;
        for (slot, h) in acc[1..].iter_mut().zip(hits) {
            *slot += h;
        }
        Some(acc)
    });
    Ok(ValidationReport {
        seed: options.seed,
        config_hash: config_hash(backend, config),
        total_tokens: documents.iter().map(|d| d.total_tokens).sum(),
        documents,
        separation,
        greedy_totals,
    })
}

fn separation(metric: &str, docs: &[DocValidation]) -> Separation {
    let defined: Vec<[f64; 3]> = docs.iter().filter_map(|d| d.metrics[metric].all()).collect();
    let n = defined.len();
    let mean = |k: usize| (n > 0).then(|| defined.iter().map(|t| t[k]).sum::<f64>() / n as f64);
    Separation {
        metric: metric.to_string(),
        documents: n,
        undefined: docs.len() - n,
        mean: Triple {
            original: mean(0),
            shuffled: mean(1),
            wrong: mean(2),
        },
        min_original_minus_wrong: defined.iter().map(|t| t[0] - t[2]).reduce(f64::min),
        wrong_violations: defined.iter().filter(|t| t[0] <= t[2]).count(),
        shuffled_violations: defined.iter().filter(|t| t[0] <= t[1]).count(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

impl ValidationReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "config {}  seed {}  documents {}",
            self.config_hash,
            self.seed,
            self.documents.len()
        );
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>10} {:>10} {:>10} {:>12} {:>8} {:>8}",
            "metric", "docs", "original", "shuffled", "wrong", "min(o-w)", "o<=w", "o<=shuf"
        );
        for s in &self.separation {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>10} {:>10} {:>10} {:>12} {:>8} {:>8}",
                s.metric,
                s.documents,
                fmt_opt(s.mean.original),
                fmt_opt(s.mean.shuffled),
                fmt_opt(s.mean.wrong),
                fmt_opt(s.min_original_minus_wrong),
                s.wrong_violations,
                s.shuffled_violations
            );
        }
        if let Some([none, original, shuffled, wrong]) = self.greedy_totals {
            let _ = writeln!(
                out,
                "greedy hits over {} tokens: none {none}, original {original}, shuffled {shuffled}, wrong {wrong}",
                self.total_tokens
            );
        }
        out
    }
}
