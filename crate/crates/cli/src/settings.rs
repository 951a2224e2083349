//! Effective configuration: explicit flags, then the `--config` file, then
//! built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Deserialize;
use shannon_core::backend::{
    NGramConfig, ReferenceBackend, RemoteBackend, RemoteConfig, ScoringBackend, UniformBackend,
};
use shannon_core::metrics::{MetricKind, ScoringConfig, Upstream};

use crate::args::{BackendKind, NGramArgs, ScoringArgs};
use crate::exit::input;

/// Vocabulary size of the uniform backend.
pub const UNIFORM_VOCAB: usize = 50_000;

/// Keys accepted in a `--config` TOML file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub timeout: Option<f64>,
    pub retries: Option<usize>,
    pub ngram_model: Option<PathBuf>,
    pub train_corpus: Option<PathBuf>,
    pub ngram_order: Option<usize>,
    pub alpha: Option<f64>,
    pub cache_weight: Option<f64>,
    pub cache_order: Option<usize>,
    pub k: Option<Upstream>,
    pub separator: Option<String>,
    pub epsilon: Option<f64>,
    pub metrics: Option<Vec<MetricKind>>,
    pub concurrency: Option<usize>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.ngram_model, &mut cfg.train_corpus].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))
}

/// Interprets `\n`, `\t` and `\\` in a flag value.
fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// N-gram parameters as given; unset fields fall back to the model file
/// or the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NGramOverrides {
    pub order: Option<usize>,
    pub alpha: Option<f64>,
    pub cache_weight: Option<f64>,
    pub cache_order: Option<usize>,
}

impl NGramOverrides {
    pub fn from_args(args: &NGramArgs, file: &FileConfig) -> Self {
        Self {
            order: args.ngram_order.or(file.ngram_order),
            alpha: args.alpha.or(file.alpha),
            cache_weight: args.cache_weight.or(file.cache_weight),
            cache_order: args.cache_order.or(file.cache_order),
        }
    }

    pub fn config(&self) -> NGramConfig {
        let d = NGramConfig::default();
        NGramConfig {
            order: self.order.unwrap_or(d.order),
            smoothing_alpha: self.alpha.unwrap_or(d.smoothing_alpha),
            cache_weight: self.cache_weight.unwrap_or(d.cache_weight),
            cache_order: self.cache_order.unwrap_or(d.cache_order),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BackendPlan {
    Reference {
        model: Option<PathBuf>,
        corpus: Option<PathBuf>,
        ngram: NGramOverrides,
    },
    Remote(RemoteConfig),
    Uniform,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub backend: BackendPlan,
    pub scoring: ScoringConfig,
    pub metrics: Vec<MetricKind>,
    pub concurrency: usize,
    pub seed: u64,
}

impl Settings {
    pub fn resolve(args: &ScoringArgs, seed: Option<u64>) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let b = &args.backend;
        let kind = b.backend.or(file.backend).unwrap_or(BackendKind::Reference);
        let concurrency = args.concurrency.or(file.concurrency).unwrap_or(1);
        if concurrency == 0 {
            return Err(input("--concurrency must be at least 1"));
        }
        let backend = match kind {
            BackendKind::Reference => BackendPlan::Reference {
                model: b.ngram_model.clone().or(file.ngram_model.clone()),
                corpus: b.train_corpus.clone().or(file.train_corpus.clone()),
                ngram: NGramOverrides::from_args(&b.ngram, &file),
            },
            BackendKind::Remote => {
                let endpoint = b
                    .endpoint
                    .clone()
                    .or(file.endpoint.clone())
                    .ok_or_else(|| input("the remote backend needs --endpoint or SHANNON_ENDPOINT"))?;
                let mut cfg = RemoteConfig::new(endpoint);
                if let Some(secs) = b.timeout.or(file.timeout) {
                    if !(secs.is_finite() && secs > 0.0) {
                        return Err(input("--timeout must be a positive number of seconds"));
                    }
                    cfg.timeout = Duration::from_secs_f64(secs);
                }
                if let Some(r) = b.retries.or(file.retries) {
                    cfg.retries = r;
                }
                cfg.max_in_flight = concurrency;
                BackendPlan::Remote(cfg)
            }
            BackendKind::Uniform => BackendPlan::Uniform,
        };

        let defaults = ScoringConfig::default();
        let epsilon = args.epsilon.or(file.epsilon).unwrap_or(defaults.degeneracy_epsilon);
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(input("--epsilon must be a non-negative number"));
        }
        let scoring = ScoringConfig {
            k_upstream: args.k.or(file.k).unwrap_or(defaults.k_upstream),
            helper_separator: args
                .separator
                .as_deref()
                .map(unescape)
                .or(file.separator.clone())
                .unwrap_or(defaults.helper_separator),
            degeneracy_epsilon: epsilon,
            want_greedy: defaults.want_greedy,
        };
        let mut metrics = args
            .metrics
            .clone()
            .or(file.metrics.clone())
            .unwrap_or(MetricKind::ALL.to_vec());
        dedup(&mut metrics);
        if metrics.is_empty() {
            return Err(input("--metrics must name at least one metric"));
        }
        Ok(Settings {
            backend,
            scoring,
            metrics,
            concurrency,
            seed: seed.or(file.seed).unwrap_or(0),
        })
    }

    /// Builds the backend. A reference backend without a model file or
    /// training corpus is trained on `fallback`, the documents being scored.
    pub fn build_backend(&self, fallback: &[&str]) -> Result<Box<dyn ScoringBackend>> {
        Ok(match &self.backend {
            BackendPlan::Uniform => Box::new(UniformBackend::new(UNIFORM_VOCAB)),
            BackendPlan::Remote(cfg) => Box::new(RemoteBackend::connect(cfg.clone())?),
            BackendPlan::Reference {
                model: Some(path),
                ngram,
                ..
            } => Box::new(load_model(path, ngram)?),
            BackendPlan::Reference {
                model: None,
                corpus,
                ngram,
            } => {
                let documents = match corpus {
                    Some(path) => split_corpus(&read_text(path)?),
                    None => fallback.iter().map(|s| s.to_string()).collect(),
                };
                Box::new(ReferenceBackend::train(&documents, ngram.config())?)
            }
        })
    }
}

fn dedup(metrics: &mut Vec<MetricKind>) {
    let mut seen = Vec::new();
    metrics.retain(|m| {
        let fresh = !seen.contains(m);
        seen.push(*m);
        fresh
    });
}

/// Documents of a plain-text corpus, separated by blank lines.
pub fn split_corpus(text: &str) -> Vec<String> {
    let mut docs = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                docs.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        docs.push(current.join("\n"));
    }
    docs
}

/// Loads a saved model. Order and smoothing are fixed at training time;
/// the cache parameters may be overridden.
fn load_model(path: &Path, ngram: &NGramOverrides) -> Result<ReferenceBackend> {
    let model =
        ReferenceBackend::from_json(&read_text(path)?).with_context(|| format!("model file {}", path.display()))?;
    let saved = *model.config();
    if ngram.order.is_some_and(|o| o != saved.order) || ngram.alpha.is_some_and(|a| a != saved.smoothing_alpha) {
        return Err(input(format!(
            "{} was trained with order {} and alpha {}; retrain to change them",
            path.display(),
            saved.order,
            saved.smoothing_alpha
        )));
    }
    let weight = ngram.cache_weight.unwrap_or(saved.cache_weight);
    let order = ngram.cache_order.unwrap_or(saved.cache_order);
    if (weight, order) == (saved.cache_weight, saved.cache_order) {
        return Ok(model);
    }
    Ok(model.with_cache(weight, order)?)
}
