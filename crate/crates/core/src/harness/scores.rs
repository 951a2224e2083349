use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;

use serde::{Deserialize, Serialize};

use super::{config_hash, EvalDataset, HarnessError};
use crate::backend::{BackendError, ScoringBackend};
use crate::metrics::{InfoScorer, MetricError, MetricKind, MetricResult, ScoringConfig};

/// One line of a score file. Exactly one of `value` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub doc_id: String,
    pub system_id: String,
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub metrics: Vec<MetricKind>,
    /// Pairs scored concurrently.
    pub concurrency: usize,
    /// Sentences of one pair scored concurrently.
    pub sentence_workers: usize,
    /// The batch aborts once more than this many pairs in a row fail with
    /// a transient backend error.
    pub max_consecutive_failures: usize,
    /// Stop after this many pending pairs have been processed.
    pub limit: Option<usize>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            metrics: MetricKind::ALL.to_vec(),
            concurrency: 1,
            sentence_workers: 1,
            max_consecutive_failures: 5,
            limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFailure {
    pub doc_id: String,
    pub system_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub config_hash: String,
    pub total_pairs: usize,
    /// Pairs whose requested metrics were all in the file already.
    pub already_done: usize,
    /// Pairs written during this run.
    pub written: usize,
    /// Pairs skipped because of a transient backend error. They are not
    /// written, so a later run retries them.
    pub failures: Vec<PairFailure>,
    /// Pairs left unprocessed because of `limit`.
    pub remaining: usize,
}

enum Outcome {
    Scored(Box<MetricResult>),
    Failed(MetricError),
}

fn is_transient(error: &MetricError) -> bool {
    matches!(
        error.backend_error(),
        Some(BackendError::Unavailable(_) | BackendError::Protocol { .. })
    )
}

/// Reads the records of a score file, ignoring a torn final line. Returns
/// the records and the byte length of the intact prefix.
fn read_records(path: &Path) -> Result<(Vec<ScoreRecord>, u64), HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    let intact = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let text = String::from_utf8_lossy(&bytes[..intact]);
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ScoreRecord = serde_json::from_str(line).map_err(|e| HarnessError::ScoreFile {
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((records, intact as u64))
}

fn records_for(
    entry: (&str, &str),
    metrics: &[MetricKind],
    outcome: &Outcome,
    hash: &str,
    done: &HashSet<(String, String, String)>,
) -> Vec<ScoreRecord> {
    metrics
        .iter()
        .filter(|m| !done.contains(&(entry.0.to_string(), entry.1.to_string(), m.name().to_string())))
        .map(|&m| {
            let value = match outcome {
                Outcome::Scored(result) => result.metric(m).map_err(|e| e.to_string()),
                Outcome::Failed(e) => Err(e.to_string()),
            };
            let (value, error) = match value {
                Ok(v) if v.is_finite() => (Some(v), None),
                Ok(v) => (None, Some(format!("non-finite value {v}"))),
                Err(e) => (None, Some(e)),
            };
            ScoreRecord {
                doc_id: entry.0.to_string(),
                system_id: entry.1.to_string(),
                metric: m.name().to_string(),
                value,
                error,
                config_hash: hash.to_string(),
            }
        })
        .collect()
}

/// Scores every entry of `dataset` and appends one record per requested
/// metric to the JSONL file at `out`.
///
/// Records are written in dataset order whatever the concurrency, so
/// deterministic backends give byte-identical files. An existing file is
/// resumed: a torn final line is dropped, pairs already present are
/// skipped, and a file written under another configuration is refused.
pub fn run_metrics(
    dataset: &EvalDataset,
    config: &ScoringConfig,
    backend: &dyn ScoringBackend,
    options: &BatchOptions,
    out: &Path,
) -> Result<BatchReport, HarnessError> {
    let hash = config_hash(backend, config);
    let mut metrics: Vec<MetricKind> = Vec::new();
    for &m in &options.metrics {
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }

    let mut done = HashSet::new();
    if out.exists() {
        let (records, intact) = read_records(out)?;
        if let Some(other) = records.iter().find(|r| r.config_hash != hash) {
            return Err(HarnessError::ConfigMismatch {
                expected: hash,
                found: other.config_hash.clone(),
            });
        }
        let file = OpenOptions::new()
            .write(true)
            .open(out)
            .map_err(|e| HarnessError::io(out, e))?;
        file.set_len(intact).map_err(|e| HarnessError::io(out, e))?;
        done.extend(records.into_iter().map(|r| (r.doc_id, r.system_id, r.metric)));
    }

    let is_done = |doc: &str, sys: &str| {
        metrics
            .iter()
            .all(|m| done.contains(&(doc.to_string(), sys.to_string(), m.name().to_string())))
    };
    let mut pending: Vec<usize> = (0..dataset.entries.len())
        .filter(|&i| {
            let e = &dataset.entries[i];
            !is_done(&e.doc_id, &e.system_id)
        })
        .collect();
    let already_done = dataset.entries.len() - pending.len();
    let remaining = options.limit.map_or(0, |l| pending.len().saturating_sub(l));
    pending.truncate(pending.len() - remaining);

    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| HarnessError::io(out, e))?;
    let mut report = BatchReport {
        config_hash: hash.clone(),
        total_pairs: dataset.entries.len(),
        already_done,
        written: 0,
        failures: Vec::new(),
        remaining,
    };

    let scorer = InfoScorer::new(backend, config).with_workers(options.sentence_workers);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut consecutive = 0;
    let mut outcome_err = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Outcome)>();
        for _ in 0..options.concurrency.max(1).min(pending.len().max(1)) {
            let tx = tx.clone();
            let (pending, next, abort, scorer, metrics) = (&pending, &next, &abort, &scorer, &metrics);
            scope.spawn(move || loop {
                let pos = next.fetch_add(1, Ordering::Relaxed);
                if pos >= pending.len() || abort.load(Ordering::Relaxed) {
                    break;
                }
                let entry = &dataset.entries[pending[pos]];
                let doc = &dataset.documents[&entry.doc_id];
                let outcome = match scorer.evaluate_selected(doc, &entry.summary, metrics) {
                    Ok(r) => Outcome::Scored(Box::new(r)),
                    Err(e) => Outcome::Failed(e),
                };
                if tx.send((pos, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffer = BTreeMap::new();
        let mut expected = 0;
        'recv: for (pos, outcome) in rx {
            buffer.insert(pos, outcome);
            while let Some(outcome) = buffer.remove(&expected) {
                let entry = &dataset.entries[pending[expected]];
                expected += 1;
                if let Outcome::Failed(e) = &outcome {
                    if is_transient(e) {
                        consecutive += 1;
                        report.failures.push(PairFailure {
                            doc_id: entry.doc_id.clone(),
                            system_id: entry.system_id.clone(),
                            message: e.to_string(),
                        });
                        if consecutive > options.max_consecutive_failures {
                            abort.store(true, Ordering::Relaxed);
                            outcome_err = Some(HarnessError::AbortBatch {
                                consecutive,
                                last: e.to_string(),
                            });
                            break 'recv;
                        }
                        continue;
                    }
                }
                consecutive = 0;
                let mut lines = String::new();
                for record in records_for(entry.key(), &metrics, &outcome, &hash, &done) {
                    lines.push_str(&serde_json::to_string(&record).expect("record serializes"));
                    lines.push('\n');
                }
                if let Err(e) = file.write_all(lines.as_bytes()).and_then(|_| file.flush()) {
                    abort.store(true, Ordering::Relaxed);
                    outcome_err = Some(HarnessError::io(out, e));
                    break 'recv;
                }
                report.written += 1;
            }
        }
    });

    match outcome_err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Metric values of a score file keyed by (doc_id, system_id, metric).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable {
    pub config_hash: Option<String>,
    values: BTreeMap<(String, String), BTreeMap<String, Result<f64, String>>>,
}

impl ScoreTable {
    /// Loads a score file. A torn final line is ignored; records from more
    /// than one configuration are refused.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let (records, _) = read_records(path)?;
        Self::from_records(records)
    }

    pub fn from_records(records: impl IntoIterator<Item = ScoreRecord>) -> Result<Self, HarnessError> {
        let mut table = ScoreTable::default();
        let mut hashes = BTreeSet::new();
        for r in records {
            hashes.insert(r.config_hash.clone());
            let value = match (r.value, r.error) {
                (Some(v), _) => Ok(v),
                (None, Some(e)) => Err(e),
                (None, None) => Err("record has neither value nor error".to_string()),
            };
            table
                .values
                .entry((r.doc_id, r.system_id))
                .or_default()
                .insert(r.metric, value);
        }
        if hashes.len() > 1 {
            return Err(HarnessError::MixedConfigs(hashes.into_iter().collect()));
        }
        table.config_hash = hashes.into_iter().next();
        Ok(table)
    }

    pub fn get(&self, doc_id: &str, system_id: &str, metric: &str) -> Option<Result<f64, &str>> {
        let by_metric = self.values.get(&(doc_id.to_string(), system_id.to_string()))?;
        by_metric
            .get(metric)
            .map(|v| v.as_ref().copied().map_err(String::as_str))
    }

    pub fn metrics(&self) -> BTreeSet<&str> {
        self.values
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{ScoreRequest, TokenScores, UniformBackend};
    use crate::harness::{parse_dataset, DatasetFormat};
    use std::sync::atomic::AtomicUsize;

    fn toy() -> EvalDataset {
        let text = (0..6)
            .map(|i| {
                format!(
                    "{{\"doc_id\":\"d{i}\",\"document\":\"Alpha beta {i}. Gamma delta.\",\"summary\":\"beta {i}\"}}"
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        parse_dataset(text.as_bytes(), DatasetFormat::PairsJsonl).unwrap()
    }

    #[test]
    fn writes_one_record_per_metric_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scores.jsonl");
        let ds = toy();
        let report = run_metrics(
            &ds,
            &ScoringConfig::default(),
            &UniformBackend::new(7),
            &BatchOptions::default(),
            &out,
        )
        .unwrap();
        assert_eq!(report.written, 6);
        let (records, _) = read_records(&out).unwrap();
        assert_eq!(records.len(), 18);
        assert_eq!(records[0].doc_id, "d0");
        assert_eq!(records[0].metric, "shannon_score");
        assert!(records[0].error.as_deref().unwrap().contains("degenerate"));
        assert_eq!(records[1].value, Some(0.0));
        let table = ScoreTable::load(&out).unwrap();
        assert_eq!(table.config_hash.as_deref(), Some(report.config_hash.as_str()));
        assert_eq!(table.get("d3", "system", "info_diff"), Some(Ok(0.0)));
    }

    #[test]
    fn refuses_a_file_from_another_config() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scores.jsonl");
        let ds = toy();
        let options = BatchOptions::default();
        run_metrics(&ds, &ScoringConfig::default(), &UniformBackend::new(7), &options, &out).unwrap();
        let err = run_metrics(&ds, &ScoringConfig::default(), &UniformBackend::new(8), &options, &out).unwrap_err();
        assert!(matches!(err, HarnessError::ConfigMismatch { .. }));
    }

    #[test]
    fn mixed_hashes_are_rejected_on_load() {
        let record = |hash: &str| ScoreRecord {
            doc_id: "d".into(),
            system_id: "s".into(),
            metric: "info_diff".into(),
            value: Some(1.0),
            error: None,
            config_hash: hash.into(),
        };
        assert!(matches!(
            ScoreTable::from_records([record("a"), record("b")]),
            Err(HarnessError::MixedConfigs(h)) if h == ["a", "b"]
        ));
    }

    struct Flaky {
        inner: UniformBackend,
        calls: AtomicUsize,
        fail_from: usize,
    }

    impl ScoringBackend for Flaky {
        fn model_id(&self) -> &str {
            "flaky"
        }
        fn context_limit(&self) -> usize {
            1024
        }
        fn supports_greedy(&self) -> bool {
            true
        }
        fn score(&self, request: &ScoreRequest) -> Result<TokenScores, BackendError> {
            if self.calls.fetch_add(1, Ordering::SeqCst) >= self.fail_from {
                return Err(BackendError::Unavailable("down".into()));
            }
            self.inner.score(request)
        }
    }

    #[test]
    fn consecutive_failures_abort_and_keep_progress() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("scores.jsonl");
        let ds = toy();
        let backend = Flaky {
            inner: UniformBackend::new(7),
            calls: AtomicUsize::new(0),
            fail_from: 12,
        };
        let options = BatchOptions {
            max_consecutive_failures: 2,
            ..BatchOptions::default()
        };
        let err = run_metrics(&ds, &ScoringConfig::default(), &backend, &options, &out).unwrap_err();
        assert!(matches!(err, HarnessError::AbortBatch { consecutive: 3, .. }), "{err}");
        let table = ScoreTable::load(&out).unwrap();
        assert!(table.get("d0", "system", "info_diff").is_some());
        assert!(table.get("d5", "system", "info_diff").is_none());
    }
}
