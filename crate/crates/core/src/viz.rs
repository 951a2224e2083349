//! Self-contained HTML heatmaps of per-token information.
//!
//! Each scenario is one row of the document's tokens. A token's background
//! runs linearly from white (0 nats) to the full hue at the anchor
//! surprisal and stays saturated above it.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::metrics::InfoProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VizError {
    #[error("heatmap needs at least one scenario")]
    NoScenarios,
    #[error("scenario label {0:?} appears more than once")]
    DuplicateLabel(String),
    #[error("scenario {0:?} has no tokens")]
    EmptyProfile(String),
}

/// Default hue: a dark red.
pub const DEFAULT_HUE: [u8; 3] = [178, 24, 43];

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSpec {
    pub doc_id: String,
    pub doc_text: String,
    /// Rows in display order, as (label, profile).
    pub scenarios: Vec<(String, InfoProfile)>,
    /// Surprisal (nats) at full saturation. Defaults to the 99th
    /// percentile over every token of every scenario.
    pub anchor: Option<f64>,
    /// Metric values shown in the legend.
    pub metrics: Vec<(String, f64)>,
    pub hue: [u8; 3],
}

impl HeatmapSpec {
    pub fn new(doc_id: impl Into<String>, doc_text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            doc_text: doc_text.into(),
            scenarios: Vec::new(),
            anchor: None,
            metrics: Vec::new(),
            hue: DEFAULT_HUE,
        }
    }

    pub fn scenario(mut self, label: impl Into<String>, profile: InfoProfile) -> Self {
        self.scenarios.push((label.into(), profile));
        self
    }

    pub fn metric(mut self, name: impl Into<String>, value: f64) -> Self {
        self.metrics.push((name.into(), value));
        self
    }

    pub fn with_anchor(mut self, anchor: f64) -> Self {
        self.anchor = Some(anchor);
        self
    }

    fn surprisals(&self) -> impl Iterator<Item = f64> + '_ {
        self.scenarios
            .iter()
            .flat_map(|(_, p)| p.per_sentence.iter().flat_map(|s| s.surprisals.iter().copied()))
    }

    /// The anchor in effect: the explicit one, else the nearest-rank 99th
    /// percentile of all surprisals.
    pub fn effective_anchor(&self) -> f64 {
        self.anchor.unwrap_or_else(|| {
            let mut all: Vec<f64> = self.surprisals().collect();
            if all.is_empty() {
                return 0.0;
            }
            all.sort_by(f64::total_cmp);
            let rank = (99 * all.len()).div_ceil(100);
            all[rank.max(1) - 1]
        })
    }
}

/// Fraction of full saturation for a surprisal.
pub fn intensity(surprisal: f64, anchor: f64) -> f64 {
    if anchor.is_nan() || surprisal.is_nan() || anchor <= 0.0 || surprisal <= 0.0 {
        return 0.0;
    }
    (surprisal / anchor).min(1.0)
}

/// Linear blend from white to `hue`.
pub fn shade(intensity: f64, hue: [u8; 3]) -> [u8; 3] {
    hue.map(|c| (255.0 + (f64::from(c) - 255.0) * intensity).round() as u8)
}

pub fn escape_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

const STYLE: &str = "body{font-family:Georgia,serif;margin:2em;max-width:60em;color:#222}\
h1{font-size:1.3em}h2{font-size:1.05em;margin:1.2em 0 .3em}\
.row{white-space:pre-wrap;line-height:1.7;border:1px solid #ddd;padding:.6em}\
.tok{border-radius:2px}\
table{border-collapse:collapse;margin:.5em 0}td,th{padding:.2em .8em;text-align:left;border-bottom:1px solid #eee}\
.scale{display:inline-block;width:12em;height:.9em;vertical-align:middle;border:1px solid #ccc}\
.note{color:#666;font-size:.9em}";

/// Renders `spec` as a standalone HTML page. The output depends only on
/// the spec.
pub fn render_heatmap(spec: &HeatmapSpec) -> Result<String, VizError> {
    if spec.scenarios.is_empty() {
        return Err(VizError::NoScenarios);
    }
    let mut labels = BTreeSet::new();
    for (label, profile) in &spec.scenarios {
        if !labels.insert(label.as_str()) {
            return Err(VizError::DuplicateLabel(label.clone()));
        }
        if profile.total_tokens == 0 {
            return Err(VizError::EmptyProfile(label.clone()));
        }
    }
    let anchor = spec.effective_anchor();
    let title = escape_html(&format!("Token information: {}", spec.doc_id));

    let mut html = String::new();
    let _ = write!(
        html,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{title}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<h1>{title}</h1>\n"
    );

    html.push_str(
        "<section class=\"legend\">\n<table>\n<tr><th>scenario</th><th>total (nats)</th><th>tokens</th></tr>\n",
    );
    for (label, profile) in &spec.scenarios {
        let _ = writeln!(
            html,
            "<tr><td>{}</td><td>{:.4}</td><td>{}</td></tr>",
            escape_html(label),
            profile.total_info,
            profile.total_tokens
        );
    }
    html.push_str("</table>\n");
    if !spec.metrics.is_empty() {
        html.push_str("<table>\n<tr><th>metric</th><th>value</th></tr>\n");
        for (name, value) in &spec.metrics {
            let _ = writeln!(html, "<tr><td>{}</td><td>{value:.4}</td></tr>", escape_html(name));
        }
        html.push_str("</table>\n");
    }
    let _ = writeln!(
        html,
        "<p>0 nats <span class=\"scale\" style=\"background:linear-gradient(to right,#ffffff,{})\"></span> {anchor:.3} nats or more</p>",
        hex(spec.hue)
    );
    let models: BTreeSet<&str> = spec
        .scenarios
        .iter()
        .flat_map(|(_, p)| p.per_sentence.iter().map(|s| s.model_id.as_str()))
        .collect();
    let models: Vec<String> = models.into_iter().map(escape_html).collect();
    let _ = writeln!(
        html,
        "<p class=\"note\">Darker background means more information. Tokens are shaded at the granularity of the scoring backend's tokenizer ({}).</p>\n</section>",
        models.join(", ")
    );

    for (label, profile) in &spec.scenarios {
        let _ = write!(html, "<section>\n<h2>{}</h2>\n<div class=\"row\">", escape_html(label));
        for (i, sentence) in profile.per_sentence.iter().enumerate() {
            if i > 0 {
                html.push(' ');
            }
            for (token, &s) in sentence.tokens.iter().zip(&sentence.surprisals) {
                let color = hex(shade(intensity(s, anchor), spec.hue));
                let _ = write!(
                    html,
                    "<span class=\"tok\" style=\"background:{color}\" title=\"{s:.3}\">{}</span>",
                    escape_html(token)
                );
            }
        }
        html.push_str("</div>\n</section>\n");
    }
    html.push_str("</body>\n</html>\n");
    Ok(html)
}
