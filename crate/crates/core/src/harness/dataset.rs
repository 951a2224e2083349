use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::text::{Document, SummaryText};

/// Default system id for pairs-jsonl lines that do not name one.
pub const DEFAULT_SYSTEM_ID: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    SummevalJsonl,
    PairsJsonl,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summeval-jsonl" | "summeval" => Ok(DatasetFormat::SummevalJsonl),
            "pairs-jsonl" | "pairs" => Ok(DatasetFormat::PairsJsonl),
            _ => Err(format!(
                "unknown dataset format {s:?} (expected summeval-jsonl or pairs-jsonl)"
            )),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::SummevalJsonl => "summeval-jsonl",
            DatasetFormat::PairsJsonl => "pairs-jsonl",
        })
    }
}

/// One system summary of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub doc_id: String,
    pub system_id: String,
    pub summary: String,
    /// Dimension → one rating per annotator.
    pub annotations: BTreeMap<String, Vec<f64>>,
}

impl Entry {
    pub fn key(&self) -> (&str, &str) {
        (&self.doc_id, &self.system_id)
    }

    pub fn summary_text(&self) -> SummaryText {
        SummaryText::new(
            format!("{}/{}", self.doc_id, self.system_id),
            &self.system_id,
            &self.summary,
        )
    }

    pub fn mean_rating(&self, dimension: &str) -> Option<f64> {
        let ratings = self.annotations.get(dimension).filter(|r| !r.is_empty())?;
        Some(ratings.iter().sum::<f64>() / ratings.len() as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalDataset {
    pub documents: BTreeMap<String, Document>,
    pub entries: Vec<Entry>,
    pub dimensions: BTreeSet<String>,
    /// Reference summaries by document id (pairs-jsonl `ref_summary`).
    pub references: BTreeMap<String, String>,
}

impl EvalDataset {
    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn systems(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.system_id.as_str()).collect()
    }

    /// Documents that have a reference summary, in id order.
    pub fn with_references(&self) -> Vec<(&Document, &str)> {
        self.references
            .iter()
            .filter_map(|(id, r)| self.documents.get(id).map(|d| (d, r.as_str())))
            .collect()
    }
}

#[derive(Deserialize)]
struct Line {
    doc_id: Option<String>,
    system_id: Option<String>,
    document: Option<String>,
    sentences: Option<Vec<String>>,
    summary: Option<String>,
    ref_summary: Option<String>,
    annotations: Option<BTreeMap<String, Vec<f64>>>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<EvalDataset, HarnessError> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_dataset(BufReader::new(file), format)
}

/// Parses a JSONL dataset. Line numbers in errors are 1-based.
///
/// A document's text may appear on any line carrying its `doc_id`; later
/// copies must be identical. Every referenced `doc_id` must get a text.
pub fn parse_dataset(reader: impl BufRead, format: DatasetFormat) -> Result<EvalDataset, HarnessError> {
    let mut dataset = EvalDataset::default();
    let mut referenced: BTreeMap<String, usize> = BTreeMap::new();
    let mut keys = BTreeSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = line.map_err(|e| HarnessError::Schema {
            line: number,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| HarnessError::Schema { line: number, message };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        let doc_id = parsed.doc_id.ok_or_else(|| schema("missing field \"doc_id\"".into()))?;

        if let Some(text) = parsed.document {
            let doc = match &parsed.sentences {
                Some(sentences) => Document::from_sentences(&doc_id, text, sentences),
                None => Document::new(&doc_id, text),
            }
            .map_err(|e| schema(format!("document {doc_id:?}: {e}")))?;
            match dataset.documents.get(&doc_id) {
                Some(existing) if existing.text != doc.text || existing.sentences() != doc.sentences() => {
                    return Err(HarnessError::Integrity(format!(
                        "line {number}: conflicting text for document {doc_id:?}"
                    )));
                }
                Some(_) => {}
                None => {
                    dataset.documents.insert(doc_id.clone(), doc);
                }
            }
        }

        let (system_id, summary, annotations) = match format {
            DatasetFormat::SummevalJsonl => {
                let system = parsed
                    .system_id
                    .ok_or_else(|| schema("missing field \"system_id\"".into()))?;
                let summary = parsed
                    .summary
                    .ok_or_else(|| schema("missing field \"summary\"".into()))?;
                let annotations = parsed
                    .annotations
                    .ok_or_else(|| schema("missing field \"annotations\"".into()))?;
                if let Some((dim, _)) = annotations.iter().find(|(_, v)| v.is_empty()) {
                    return Err(schema(format!("annotation list {dim:?} is empty")));
                }
                if annotations.values().flatten().any(|v| !v.is_finite()) {
                    return Err(schema("annotations must be finite numbers".into()));
                }
                (system, Some(summary), annotations)
            }
            DatasetFormat::PairsJsonl => {
                if parsed.summary.is_none() && parsed.ref_summary.is_none() {
                    return Err(schema("missing field \"summary\"".into()));
                }
                if let Some(reference) = parsed.ref_summary {
                    dataset.references.insert(doc_id.clone(), reference);
                }
                let system = parsed.system_id.unwrap_or_else(|| DEFAULT_SYSTEM_ID.to_string());
                (system, parsed.summary, BTreeMap::new())
            }
        };

        referenced.entry(doc_id.clone()).or_insert(number);
        if let Some(summary) = summary {
            if !keys.insert((doc_id.clone(), system_id.clone())) {
                return Err(HarnessError::Integrity(format!(
                    "line {number}: duplicate entry for document {doc_id:?}, system {system_id:?}"
                )));
            }
            dataset.dimensions.extend(annotations.keys().cloned());
            dataset.entries.push(Entry {
                doc_id,
                system_id,
                summary,
                annotations,
            });
        }
    }

    if let Some((id, line)) = referenced.iter().find(|(id, _)| !dataset.documents.contains_key(*id)) {
        return Err(HarnessError::Integrity(format!(
            "document {id:?} (first referenced on line {line}) has no text"
        )));
    }
    Ok(dataset)
}
