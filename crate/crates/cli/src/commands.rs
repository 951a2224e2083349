use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::json;
use shannon_core::backend::{ReferenceBackend, ScoringBackend};
use shannon_core::harness::{
    baseline_validation, bias_table, config_hash, correlation_table, parse_dataset, run_metrics, BatchOptions,
    BatchReport, DatasetFormat, EvalDataset, ScoreTable, ValidationOptions,
};
use shannon_core::metrics::{InfoScorer, MetricKind, MetricResult};
use shannon_core::text::Document;
use shannon_core::viz::{render_heatmap, HeatmapSpec};

use crate::args::{
    BatchArgs, BiasArgs, CorrelateArgs, DatasetArgs, OutputFormat, ScoreArgs, TrainArgs, ValidateArgs, VizArgs,
};
use crate::exit::{self, input};
use crate::settings::{read_text, split_corpus, FileConfig, NGramOverrides, Settings};

/// The config-hash header every command prints to standard error.
fn header(command: &str, hash: &str, detail: &str) {
    eprintln!("# shannon {command} config_hash={hash} {detail}");
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

/// Prints `value` as JSON or `text` and optionally copies it to `out`.
fn emit(format: OutputFormat, value: &impl Serialize, text: impl FnOnce() -> String, out: Option<&Path>) -> Result<()> {
    let rendered = match format {
        OutputFormat::Json => serde_json::to_string_pretty(value)? + "\n",
        OutputFormat::Text => text(),
    };
    print!("{rendered}");
    if let Some(path) = out {
        write_file(path, &rendered)?;
    }
    Ok(())
}

fn file_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "doc".to_string(), |s| s.to_string_lossy().into_owned())
}

/// pairs-jsonl unless the first record carries annotations.
fn infer_format(text: &str) -> DatasetFormat {
    let first = text.lines().find(|l| !l.trim().is_empty());
    let annotated = first
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("annotations").is_some());
    if annotated {
        DatasetFormat::SummevalJsonl
    } else {
        DatasetFormat::PairsJsonl
    }
}

fn load(data: &DatasetArgs) -> Result<EvalDataset> {
    let text = read_text(&data.dataset)?;
    let format = data.dataset_format.unwrap_or_else(|| infer_format(&text));
    Ok(parse_dataset(text.as_bytes(), format)?)
}

fn document_texts(dataset: &EvalDataset) -> Vec<&str> {
    dataset.documents.values().map(|d| d.text.as_str()).collect()
}

fn backend_detail(backend: &dyn ScoringBackend, settings: &Settings) -> String {
    format!("model={} k={}", backend.model_id(), settings.scoring.k_upstream)
}

/// Defined metric values and the reasons for undefined ones.
fn split_metrics(
    result: &MetricResult,
    metrics: &[MetricKind],
) -> (BTreeMap<&'static str, f64>, BTreeMap<&'static str, String>, u8) {
    let mut values = BTreeMap::new();
    let mut undefined = BTreeMap::new();
    let mut code = exit::OK;
    for &m in metrics {
        match result.metric(m) {
            Ok(v) => {
                values.insert(m.name(), v);
            }
            Err(e) => {
                if code == exit::OK {
                    code = exit::for_metric(&e);
                }
                undefined.insert(m.name(), e.to_string());
            }
        }
    }
    (values, undefined, code)
}

pub fn score(a: &ScoreArgs) -> Result<u8> {
    let settings = Settings::resolve(&a.scoring, None)?;
    let doc = Document::new(file_id(&a.doc), read_text(&a.doc)?.trim())?;
    let summary = read_text(&a.summary)?;
    let summary = summary.trim();
    let backend = settings.build_backend(&[&doc.text])?;
    let hash = config_hash(&*backend, &settings.scoring);
    header("score", &hash, &backend_detail(&*backend, &settings));

    let scorer = InfoScorer::new(&*backend, &settings.scoring).with_workers(settings.concurrency);
    let result = scorer.evaluate_selected(&doc, summary, &settings.metrics)?;
    let (values, undefined, code) = split_metrics(&result, &settings.metrics);
    let mut information = BTreeMap::from([
        ("unconditional", result.unconditional.total_info),
        ("given_summary", result.given_summary.total_info),
    ]);
    if let Some(p) = &result.given_document {
        information.insert("given_document", p.total_info);
    }
    let payload = json!({
        "doc_id": doc.id,
        "config_hash": hash,
        "model_id": backend.model_id(),
        "metrics": values,
        "undefined": undefined,
        "information": information,
        "tokens": result.unconditional.total_tokens,
    });
    emit(
        a.format,
        &payload,
        || {
            let mut out = String::new();
            for (name, v) in &values {
                let _ = writeln!(out, "{name:<14} {v:.6}");
            }
            for (name, e) in &undefined {
                let _ = writeln!(out, "{name:<14} undefined: {e}");
            }
            out
        },
        None,
    )?;
    for (name, e) in &undefined {
        eprintln!("warning: {name} is undefined: {e}");
    }
    Ok(code)
}

fn render_batch(report: &BatchReport) -> String {
    let mut out = format!(
        "config {}: {} pairs, {} already scored, {} written, {} failed, {} remaining\n",
        report.config_hash,
        report.total_pairs,
        report.already_done,
        report.written,
        report.failures.len(),
        report.remaining
    );
    for f in &report.failures {
        let _ = writeln!(out, "  failed {}/{}: {}", f.doc_id, f.system_id, f.message);
    }
    out
}

pub fn batch(a: &BatchArgs) -> Result<u8> {
    let settings = Settings::resolve(&a.scoring, None)?;
    let dataset = load(&a.data)?;
    let backend = settings.build_backend(&document_texts(&dataset))?;
    let hash = config_hash(&*backend, &settings.scoring);
    header("batch", &hash, &backend_detail(&*backend, &settings));
    let options = BatchOptions {
        metrics: settings.metrics.clone(),
        concurrency: settings.concurrency,
        sentence_workers: 1,
        max_consecutive_failures: a.max_failures,
        limit: a.limit,
    };
    let report = run_metrics(&dataset, &settings.scoring, &*backend, &options, &a.out)?;
    for f in &report.failures {
        eprintln!(
            "warning: {}/{} not scored, rerun to retry: {}",
            f.doc_id, f.system_id, f.message
        );
    }
    emit(a.format, &report, || render_batch(&report), None)?;
    Ok(exit::OK)
}

pub fn correlate(a: &CorrelateArgs) -> Result<u8> {
    let dataset = load(&a.data)?;
    let scores = ScoreTable::load(&a.scores)?;
    let table = correlation_table(&dataset, &scores, a.level, a.method);
    header(
        "correlate",
        table.config_hash.as_deref().unwrap_or("none"),
        &format!("level={} method={}", a.level, a.method),
    );
    emit(a.format, &table, || table.render_text(), a.out.as_deref())?;
    Ok(exit::OK)
}

pub fn validate(a: &ValidateArgs) -> Result<u8> {
    let settings = Settings::resolve(&a.scoring, a.seed)?;
    let dataset = load(&a.data)?;
    let backend = settings.build_backend(&document_texts(&dataset))?;
    let hash = config_hash(&*backend, &settings.scoring);
    header(
        "validate",
        &hash,
        &format!("{} seed={}", backend_detail(&*backend, &settings), settings.seed),
    );
    let options = ValidationOptions {
        metrics: settings.metrics.clone(),
        seed: settings.seed,
        sample: a.sample,
        sentence_workers: settings.concurrency,
    };
    let report = baseline_validation(&dataset.with_references(), &settings.scoring, &*backend, &options)?;
    emit(a.format, &report, || report.render_text(), a.out.as_deref())?;
    Ok(exit::OK)
}

pub fn bias(a: &BiasArgs) -> Result<u8> {
    let dataset = load(&a.data)?;
    let scores = ScoreTable::load(&a.scores)?;
    let table = bias_table(&dataset, &scores, a.method);
    header(
        "bias",
        table.config_hash.as_deref().unwrap_or("none"),
        &format!("method={}", a.method),
    );
    emit(a.format, &table, || table.render_text(), a.out.as_deref())?;
    Ok(exit::OK)
}

pub fn viz(a: &VizArgs) -> Result<u8> {
    if a.label.len() > a.summary.len() {
        return Err(input("more --label values than --summary files"));
    }
    let settings = Settings::resolve(&a.scoring, None)?;
    let doc = Document::new(file_id(&a.doc), read_text(&a.doc)?.trim())?;
    let summaries: Vec<String> = a
        .summary
        .iter()
        .map(|p| read_text(p).map(|s| s.trim().to_string()))
        .collect::<Result<_>>()?;
    let labels: Vec<String> = a
        .summary
        .iter()
        .enumerate()
        .map(|(i, p)| a.label.get(i).cloned().unwrap_or_else(|| file_id(p)))
        .collect();
    let backend = settings.build_backend(&[&doc.text])?;
    let hash = config_hash(&*backend, &settings.scoring);
    header("viz", &hash, &backend_detail(&*backend, &settings));

    let refs: Vec<&str> = summaries.iter().map(String::as_str).collect();
    let scorer = InfoScorer::new(&*backend, &settings.scoring).with_workers(settings.concurrency);
    let results = scorer.evaluate_many(&doc, &refs, &settings.metrics)?;

    let mut spec =
        HeatmapSpec::new(doc.id.clone(), doc.text.clone()).scenario("I(D)", results[0].unconditional.clone());
    if let Some(p) = &results[0].given_document {
        spec = spec.scenario("I(D|D)", p.clone());
    }
    let mut per_summary = Vec::new();
    for (label, result) in labels.iter().zip(&results) {
        spec = spec.scenario(format!("I(D|S) {label}"), result.given_summary.clone());
        let (values, undefined, _) = split_metrics(result, &settings.metrics);
        for (name, v) in &values {
            spec = spec.metric(format!("{name} [{label}]"), *v);
        }
        per_summary.push(json!({ "label": label, "metrics": values, "undefined": undefined }));
    }
    if let Some(anchor) = a.anchor {
        if !(anchor.is_finite() && anchor > 0.0) {
            return Err(input("--anchor must be a positive number of nats"));
        }
        spec = spec.with_anchor(anchor);
    }
    write_file(&a.out, &render_heatmap(&spec)?)?;
    let payload = json!({
        "doc_id": doc.id,
        "config_hash": hash,
        "out": a.out.display().to_string(),
        "anchor": spec.effective_anchor(),
        "summaries": per_summary,
    });
    emit(OutputFormat::Json, &payload, String::new, None)?;
    Ok(exit::OK)
}

pub fn train_ngram(a: &TrainArgs) -> Result<u8> {
    let mut documents = Vec::new();
    if let Some(path) = &a.train_corpus {
        documents.extend(split_corpus(&read_text(path)?));
    }
    if let Some(path) = &a.dataset {
        let data = DatasetArgs {
            dataset: path.clone(),
            dataset_format: a.dataset_format,
        };
        documents.extend(document_texts(&load(&data)?).into_iter().map(str::to_string));
    }
    let config = NGramOverrides::from_args(&a.ngram, &FileConfig::default()).config();
    let model = ReferenceBackend::train(&documents, config)?;
    write_file(&a.out, &model.to_json())?;
    header("train-ngram", "n/a", &format!("model={}", model.model_id()));
    let payload = json!({
        "model_id": model.model_id(),
        "vocab_size": model.vocab_size(),
        "documents": documents.len(),
        "out": a.out.display().to_string(),
    });
    emit(OutputFormat::Json, &payload, String::new, None)?;
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_inference() {
        assert_eq!(
            infer_format("\n{\"doc_id\":\"d\",\"annotations\":{}}\n"),
            DatasetFormat::SummevalJsonl
        );
        assert_eq!(
            infer_format("{\"doc_id\":\"d\",\"summary\":\"s\"}"),
            DatasetFormat::PairsJsonl
        );
        assert_eq!(infer_format(""), DatasetFormat::PairsJsonl);
    }
}
