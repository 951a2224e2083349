use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalDataset, ScoreTable};
use crate::correlation::{system_level, CorrelationError, CorrelationMethod, GridCell, PairedSeries};
use crate::text::{summary_stats, SummaryStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationLevel {
    /// Per-system means, one point per system.
    System,
    /// One point per (document, system) pair.
    Summary,
}

impl FromStr for CorrelationLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "system" => Ok(CorrelationLevel::System),
            "summary" => Ok(CorrelationLevel::Summary),
            _ => Err(format!("unknown correlation level {s:?} (expected system or summary)")),
        }
    }
}

impl fmt::Display for CorrelationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationLevel::System => "system",
            CorrelationLevel::Summary => "summary",
        })
    }
}

/// A table cell: a coefficient or the reason it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<Result<f64, CorrelationError>> for Cell {
    fn from(r: Result<f64, CorrelationError>) -> Self {
        match r {
            Ok(v) => Cell {
                value: Some(v),
                error: None,
            },
            Err(e) => Cell {
                value: None,
                error: Some(e.to_string()),
            },
        }
    }
}

impl Cell {
    fn display(&self) -> String {
        self.value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
    }
}

/// Correlation of each metric with each human dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub level: CorrelationLevel,
    pub method: CorrelationMethod,
    pub config_hash: Option<String>,
    pub metrics: Vec<String>,
    /// Dimension → metric → coefficient.
    pub rows: BTreeMap<String, BTreeMap<String, Cell>>,
}

fn metric_value(scores: &ScoreTable, doc: &str, sys: &str, metric: &str) -> Option<f64> {
    scores.get(doc, sys, metric).and_then(Result::ok)
}

fn summary_series(
    dataset: &EvalDataset,
    mut x: impl FnMut(usize) -> Option<f64>,
    mut y: impl FnMut(usize) -> Option<f64>,
) -> Result<PairedSeries, CorrelationError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut missing = Vec::new();
    for (i, e) in dataset.entries.iter().enumerate() {
        match (x(i), y(i)) {
            (Some(a), Some(b)) => {
                xs.push(a);
                ys.push(b);
            }
            _ => missing.push((e.system_id.clone(), e.doc_id.clone())),
        }
    }
    if !missing.is_empty() {
        return Err(CorrelationError::IncompleteGrid { missing });
    }
    PairedSeries::new(xs, ys)
}

/// Correlates every metric in `scores` with every annotation dimension.
/// A missing score or rating makes that cell an incomplete-grid error.
pub fn correlation_table(
    dataset: &EvalDataset,
    scores: &ScoreTable,
    level: CorrelationLevel,
    method: CorrelationMethod,
) -> CorrelationTable {
    let metrics: Vec<String> = scores.metrics().into_iter().map(str::to_string).collect();
    let mut rows = BTreeMap::new();
    for dim in &dataset.dimensions {
        let mut row = BTreeMap::new();
        for metric in &metrics {
            let coefficient = match level {
                CorrelationLevel::System => {
                    let cells: Vec<GridCell<'_>> = dataset
                        .entries
                        .iter()
                        .map(|e| GridCell {
                            system_id: &e.system_id,
                            doc_id: &e.doc_id,
                            metric: metric_value(scores, &e.doc_id, &e.system_id, metric),
                            ratings: e.annotations.get(dim).map_or(&[][..], Vec::as_slice),
                        })
                        .collect();
                    system_level(&cells)
                        .and_then(|agg| agg.paired())
                        .and_then(|s| method.apply(&s))
                }
                CorrelationLevel::Summary => summary_series(
                    dataset,
                    |i| {
                        let e = &dataset.entries[i];
                        metric_value(scores, &e.doc_id, &e.system_id, metric)
                    },
                    |i| dataset.entries[i].mean_rating(dim),
                )
                .and_then(|s| method.apply(&s)),
            };
            row.insert(metric.clone(), Cell::from(coefficient));
        }
        rows.insert(dim.clone(), row);
    }
    CorrelationTable {
        level,
        method,
        config_hash: scores.config_hash.clone(),
        metrics,
        rows,
    }
}

/// Summary-level correlation of each metric and each human dimension with
/// the extractive statistics of the summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub method: CorrelationMethod,
    pub config_hash: Option<String>,
    pub columns: Vec<String>,
    /// Row label (`metric` or `human:<dimension>`) → statistic → coefficient.
    pub rows: BTreeMap<String, BTreeMap<String, Cell>>,
    /// Entries left out because their summary has no words.
    pub excluded: usize,
}

/// Value of one bias-table row for the entry at an index.
type ValueSource<'a> = Box<dyn Fn(usize) -> Option<f64> + 'a>;

pub fn bias_table(dataset: &EvalDataset, scores: &ScoreTable, method: CorrelationMethod) -> BiasTable {
    let stats: Vec<Option<SummaryStats>> = dataset
        .entries
        .iter()
        .map(|e| summary_stats(&dataset.documents[&e.doc_id], &e.summary_text()).ok())
        .collect();
    let kept = EvalDataset {
        entries: dataset
            .entries
            .iter()
            .zip(&stats)
            .filter(|(_, s)| s.is_some())
            .map(|(e, _)| e.clone())
            .collect(),
        ..EvalDataset::default()
    };
    let stats: Vec<SummaryStats> = stats.into_iter().flatten().collect();

    let mut sources: Vec<(String, ValueSource<'_>)> = Vec::new();
    for metric in scores.metrics() {
        let kept = &kept;
        sources.push((
            metric.to_string(),
            Box::new(move |i| {
                let e = &kept.entries[i];
                metric_value(scores, &e.doc_id, &e.system_id, metric)
            }),
        ));
    }
    for dim in &dataset.dimensions {
        let kept = &kept;
        sources.push((
            format!("human:{dim}"),
            Box::new(move |i| kept.entries[i].mean_rating(dim)),
        ));
    }

    let rows = sources
        .iter()
        .map(|(label, source)| {
            let row = SummaryStats::FIELDS
                .iter()
                .map(|&field| {
                    let series = summary_series(&kept, source, |i| stats[i].field(field));
                    (field.to_string(), Cell::from(series.and_then(|s| method.apply(&s))))
                })
                .collect();
            (label.clone(), row)
        })
        .collect();
    BiasTable {
        method,
        config_hash: scores.config_hash.clone(),
        columns: SummaryStats::FIELDS.iter().map(|f| f.to_string()).collect(),
        rows,
        excluded: dataset.entries.len() - kept.entries.len(),
    }
}

/// Renders a labelled grid with right-aligned numeric columns.
fn render_grid(title: &str, columns: &[String], rows: &BTreeMap<String, BTreeMap<String, Cell>>) -> String {
    let label_width = rows.keys().map(String::len).chain([title.len()]).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|c| c.len().max(7)).collect();
    let mut out = format!("{title:<label_width$}");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    for (label, row) in rows {
        let _ = write!(out, "{label:<label_width$}");
        for (c, w) in columns.iter().zip(&widths) {
            let text = row.get(c).map_or_else(|| "n/a".to_string(), Cell::display);
            let _ = write!(out, "  {text:>w$}");
        }
        out.push('\n');
    }
    let errors: Vec<String> = rows
        .iter()
        .flat_map(|(label, row)| {
            row.iter()
                .filter_map(move |(c, cell)| cell.error.as_ref().map(|e| format!("{label} / {c}: {e}")))
        })
        .collect();
    if !errors.is_empty() {
        out.push_str("\nundefined cells:\n");
        for e in errors {
            let _ = writeln!(out, "  {e}");
        }
    }
    out
}

impl CorrelationTable {
    pub fn render_text(&self) -> String {
        let mut out = format!("{} correlation, {} level", self.method, self.level);
        if let Some(hash) = &self.config_hash {
            let _ = write!(out, ", config {hash}");
        }
        out.push_str("\n\n");
        out + &render_grid("dimension", &self.metrics, &self.rows)
    }
}

impl BiasTable {
    pub fn render_text(&self) -> String {
        let mut out = format!("{} correlation with summary statistics, summary level", self.method);
        if let Some(hash) = &self.config_hash {
            let _ = write!(out, ", config {hash}");
        }
        if self.excluded > 0 {
            let _ = write!(out, " ({} empty summaries excluded)", self.excluded);
        }
        out.push_str("\n\n");
        out + &render_grid("score", &self.columns, &self.rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{parse_dataset, DatasetFormat, ScoreRecord};

    fn dataset() -> EvalDataset {
        let mut lines = Vec::new();
        for d in 0..3 {
            for (s, rating) in [("A", 1), ("B", 2), ("C", 3)] {
                let doc = if s == "A" {
                    format!(",\"document\":\"Doc {d} has words. More words here.\"")
                } else {
                    String::new()
                };
                lines.push(format!(
                    "{{\"doc_id\":\"d{d}\",\"system_id\":\"{s}\"{doc},\"summary\":\"words {s} here {d}\",\"annotations\":{{\"quality\":[{rating}, {}]}}}}",
                    rating + d
                ));
            }
        }
        parse_dataset(lines.join("\n").as_bytes(), DatasetFormat::SummevalJsonl).unwrap()
    }

    fn scores(ds: &EvalDataset, skip: Option<(&str, &str)>) -> ScoreTable {
        let records = ds
            .entries
            .iter()
            .filter(|e| Some(e.key()) != skip)
            .map(|e| ScoreRecord {
                doc_id: e.doc_id.clone(),
                system_id: e.system_id.clone(),
                metric: "info_diff".into(),
                value: Some(e.mean_rating("quality").unwrap() * 2.0),
                error: None,
                config_hash: "h".into(),
            });
        ScoreTable::from_records(records).unwrap()
    }

    #[test]
    fn perfectly_aligned_scores_correlate_at_one() {
        let ds = dataset();
        for level in [CorrelationLevel::System, CorrelationLevel::Summary] {
            let t = correlation_table(&ds, &scores(&ds, None), level, CorrelationMethod::KendallTauB);
            assert_eq!(t.rows["quality"]["info_diff"].value, Some(1.0));
            assert!(t.render_text().contains("1.0000"));
        }
    }

    #[test]
    fn missing_cell_is_reported_not_fatal() {
        let ds = dataset();
        let t = correlation_table(
            &ds,
            &scores(&ds, Some(("d1", "B"))),
            CorrelationLevel::System,
            CorrelationMethod::Spearman,
        );
        let cell = &t.rows["quality"]["info_diff"];
        assert!(cell.value.is_none());
        assert!(cell.error.as_ref().unwrap().contains("incomplete grid"));
        assert!(t.render_text().contains("undefined cells"));
    }

    #[test]
    fn bias_table_has_every_statistic() {
        let ds = dataset();
        let t = bias_table(&ds, &scores(&ds, None), CorrelationMethod::KendallTauB);
        assert_eq!(t.columns.len(), 10);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.contains_key("human:quality"));
        assert_eq!(t.excluded, 0);
        let text = t.render_text();
        assert!(text.contains("compression"));
    }

    #[test]
    fn levels_parse() {
        assert_eq!("System".parse(), Ok(CorrelationLevel::System));
        assert!("corpus".parse::<CorrelationLevel>().is_err());
    }
}
