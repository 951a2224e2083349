//! Correlation coefficients with exact tie handling, and system-level
//! aggregation of per-summary scores.
//!
//! Kendall tau-b and Spearman rho are computed from exact integer counts
//! (concordance counts, doubled mid-ranks) and converted to floating point
//! only in the final division.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("correlation undefined: {0}")]
    Undefined(String),
    #[error("incomplete grid: {} missing (system, document) cell(s), first {:?}", missing.len(), missing.first())]
    IncompleteGrid { missing: Vec<(String, String)> },
}

/// Two equal-length, finite series with at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PairedSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, CorrelationError> {
        if xs.len() != ys.len() {
            return Err(CorrelationError::LengthMismatch(xs.len(), ys.len()));
        }
        if xs.len() < 2 {
            return Err(CorrelationError::TooFewPoints(xs.len()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(CorrelationError::NonFinite);
        }
        Ok(Self { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn swapped(&self) -> Self {
        Self {
            xs: self.ys.clone(),
            ys: self.xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMethod {
    KendallTauB,
    Spearman,
    Pearson,
}

impl CorrelationMethod {
    pub fn apply(self, series: &PairedSeries) -> Result<f64, CorrelationError> {
        match self {
            CorrelationMethod::KendallTauB => kendall_tau_b(series),
            CorrelationMethod::Spearman => spearman_rho(series),
            CorrelationMethod::Pearson => pearson_r(series),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CorrelationMethod::KendallTauB => "kendall-tau-b",
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::Pearson => "pearson",
        }
    }
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorrelationMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "kendall-tau-b" | "kendall" | "tau-b" | "kendall-tau" => Ok(CorrelationMethod::KendallTauB),
            "spearman" | "spearman-rho" => Ok(CorrelationMethod::Spearman),
            "pearson" | "pearson-r" => Ok(CorrelationMethod::Pearson),
            _ => Err(format!("unknown correlation method {s:?}")),
        }
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Sum of t(t−1)/2 over runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    sorted.chunk_by(|a, b| a == b).map(|run| pairs(run.len() as u64)).sum()
}

/// Merge sort that returns the number of inversions (pairs i < j with
/// `v[i] > v[j]`).
fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]).is_lt() {
            merged.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Kendall tau-b, `(C − D) / sqrt((n0 − n1)(n0 − n2))`, in O(n log n).
pub fn kendall_tau_b(series: &PairedSeries) -> Result<f64, CorrelationError> {
    let n = series.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        series.xs[a]
            .total_cmp(&series.xs[b])
            .then(series.ys[a].total_cmp(&series.ys[b]))
    });

    let xs_sorted: Vec<f64> = order.iter().map(|&i| series.xs[i]).collect();
    let joint: Vec<(f64, f64)> = order.iter().map(|&i| (series.xs[i], series.ys[i])).collect();
    let n0 = pairs(n as u64);
    let n1 = tied_pairs(&xs_sorted);
    let n3 = tied_pairs(&joint);

    let mut ys: Vec<f64> = order.iter().map(|&i| series.ys[i]).collect();
    let discordant = count_inversions(&mut ys);
    let n2 = tied_pairs(&ys);

    if n0 == n1 || n0 == n2 {
        return Err(CorrelationError::Undefined("one side is constant".into()));
    }
    let c_minus_d = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * discordant as i64;
    Ok(c_minus_d as f64 / (((n0 - n1) as f64) * ((n0 - n2) as f64)).sqrt())
}

/// Doubled mid-ranks (1-based), so ties stay integral: a value with `l`
/// strictly smaller and `e` equal values (itself included) gets `2l + e + 1`.
pub fn doubled_mid_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (2 * start + (end - start) + 1) as u64;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Average ranks for ties, 1-based.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    doubled_mid_ranks(values).into_iter().map(|r| r as f64 / 2.0).collect()
}

/// Spearman rho: Pearson correlation of mid-ranks.
pub fn spearman_rho(series: &PairedSeries) -> Result<f64, CorrelationError> {
    let rx = doubled_mid_ranks(&series.xs);
    let ry = doubled_mid_ranks(&series.ys);
    let n = series.len() as i128;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for (&a, &b) in rx.iter().zip(&ry) {
        let (a, b) = (a as i128, b as i128);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let cov = n * sxy - sx * sy;
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0 || vy == 0 {
        return Err(CorrelationError::Undefined("one side is constant".into()));
    }
    Ok(cov as f64 / ((vx as f64) * (vy as f64)).sqrt())
}

/// Pearson product-moment correlation.
pub fn pearson_r(series: &PairedSeries) -> Result<f64, CorrelationError> {
    let n = series.len() as f64;
    let mx = series.xs.iter().sum::<f64>() / n;
    let my = series.ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in series.xs.iter().zip(&series.ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::Undefined("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One (system, document) cell: the metric value and the per-annotator
/// ratings of one human dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell<'a> {
    pub system_id: &'a str,
    pub doc_id: &'a str,
    pub metric: Option<f64>,
    pub ratings: &'a [f64],
}

/// Per-system means of a metric and of one human dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAggregate {
    pub metric: BTreeMap<String, f64>,
    pub human: BTreeMap<String, f64>,
}

impl SystemAggregate {
    /// Metric means against human means, in system-id order.
    pub fn paired(&self) -> Result<PairedSeries, CorrelationError> {
        PairedSeries::new(
            self.metric.values().copied().collect(),
            self.human.values().copied().collect(),
        )
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Averages annotators per summary, then summaries per system.
///
/// Every system must have a metric value and at least one rating for every
/// document that appears anywhere in `cells`. Documents are summed in id
/// order, so the result does not depend on the order of `cells`.
pub fn system_level(cells: &[GridCell<'_>]) -> Result<SystemAggregate, CorrelationError> {
    let systems: BTreeSet<&str> = cells.iter().map(|c| c.system_id).collect();
    let docs: BTreeSet<&str> = cells.iter().map(|c| c.doc_id).collect();
    let mut grid: BTreeMap<(&str, &str), (f64, f64)> = BTreeMap::new();
    for c in cells {
        if let (Some(m), false) = (c.metric, c.ratings.is_empty()) {
            grid.insert((c.system_id, c.doc_id), (m, mean(c.ratings.iter().copied())));
        }
    }
    let missing: Vec<(String, String)> = systems
        .iter()
        .flat_map(|s| docs.iter().map(move |d| (*s, *d)))
        .filter(|key| !grid.contains_key(key))
        .map(|(s, d)| (s.to_string(), d.to_string()))
        .collect();
    if !missing.is_empty() {
        return Err(CorrelationError::IncompleteGrid { missing });
    }

    let mut aggregate = SystemAggregate {
        metric: BTreeMap::new(),
        human: BTreeMap::new(),
    };
    for s in systems {
        let row = grid.range((s, "")..).take_while(|((sys, _), _)| *sys == s);
        let (m, h): (Vec<f64>, Vec<f64>) = row.map(|(_, &v)| v).unzip();
        aggregate.metric.insert(s.to_string(), mean(m));
        aggregate.human.insert(s.to_string(), mean(h));
    }
    Ok(aggregate)
}
