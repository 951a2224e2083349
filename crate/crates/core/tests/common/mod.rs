#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use proptest::prelude::*;
use shannon_core::backend::TokenScores;
use shannon_core::metrics::{InfoProfile, Scenario};
use shannon_core::text::{Fragment, WordSequence};
use shannon_core::viz::{escape_html, render_heatmap, HeatmapSpec};

/// Kendall tau-b by direct pair enumeration.
pub fn kendall_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    let (mut concordant, mut discordant, mut untied_x, mut untied_y) = (0i64, 0i64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = xs[i].partial_cmp(&xs[j]).unwrap() as i64;
            let dy = ys[i].partial_cmp(&ys[j]).unwrap() as i64;
            if dx != 0 {
                untied_x += 1;
            }
            if dy != 0 {
                untied_y += 1;
            }
            match dx * dy {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    if untied_x == 0 || untied_y == 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((untied_x as f64) * (untied_y as f64)).sqrt())
}

/// Twice the 1-based average rank, by counting smaller and equal values.
fn counted_doubled_ranks(values: &[f64]) -> Vec<i128> {
    values
        .iter()
        .map(|v| {
            let less = values.iter().filter(|w| *w < v).count() as i128;
            let equal = values.iter().filter(|w| *w == v).count() as i128;
            2 * less + equal + 1
        })
        .collect()
}

/// Spearman rho from counted ranks and pairwise rank differences:
/// sum over i < j of (xi − xj)(yi − yj) equals n·Σxy − Σx·Σy.
pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let rx = counted_doubled_ranks(xs);
    let ry = counted_doubled_ranks(ys);
    let (mut cov, mut vx, mut vy) = (0i128, 0i128, 0i128);
    for i in 0..rx.len() {
        for j in i + 1..rx.len() {
            let (dx, dy) = (rx[i] - rx[j], ry[i] - ry[j]);
            cov += dx * dy;
            vx += dx * dx;
            vy += dy * dy;
        }
    }
    if vx == 0 || vy == 0 {
        return None;
    }
    Some(cov as f64 / ((vx as f64) * (vy as f64)).sqrt())
}

/// Greedy extractive fragments by naive scanning: at each summary position
/// take the longest run shared with the document (earliest document start
/// on ties), or skip the word if it does not occur.
pub fn fragments_oracle(doc: &[String], summary: &[String]) -> Vec<Fragment> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < summary.len() {
        let mut best = (0, 0);
        for j in 0..doc.len() {
            let mut len = 0;
            while i + len < summary.len() && j + len < doc.len() && summary[i + len] == doc[j + len] {
                len += 1;
            }
            if len > best.1 {
                best = (j, len);
            }
        }
        if best.1 == 0 {
            i += 1;
        } else {
            out.push(Fragment {
                doc_start: best.0,
                sum_start: i,
                length: best.1,
            });
            i += best.1;
        }
    }
    out
}

pub fn words(items: &[&str]) -> WordSequence {
    items.iter().map(|s| s.to_string()).collect()
}

pub type Handler = dyn Fn(&str, &str, &str) -> (u16, String) + Send + Sync;

/// A tiny HTTP/1.1 server on an ephemeral port that answers every request
/// with `handler(method, path, body)` and closes the connection.
pub fn serve(handler: Arc<Handler>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            thread::spawn(move || {
                let _ = answer(stream, &*handler);
            });
        }
    });
    format!("http://{addr}")
}

fn answer(stream: TcpStream, handler: &Handler) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let (status, response) = handler(&method, &path, &String::from_utf8_lossy(&body));
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response}",
        response.len()
    )?;
    stream.flush()
}

/// Calls `f` on every series of `n` (x, y) points with values in 1..=4, up
/// to joint reordering of the points: each series is enumerated once, in
/// non-decreasing (x, y) order.
pub fn for_each_canonical_series(n: usize, mut f: impl FnMut(&[f64], &[f64])) {
    let mut codes = vec![0usize; n];
    let mut xs = vec![0.0; n];
    let mut ys = vec![0.0; n];
    loop {
        for (i, &c) in codes.iter().enumerate() {
            xs[i] = (c / 4 + 1) as f64;
            ys[i] = (c % 4 + 1) as f64;
        }
        f(&xs, &ys);
        let mut i = n;
        while i > 0 && codes[i - 1] == 15 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        codes[i - 1] += 1;
        let v = codes[i - 1];
        codes[i..].fill(v);
    }
}

/// Compares both rank coefficients with their oracles on the canonical
/// sweep for n = 2..=max_n. Returns the number of series checked and a
/// description of every mismatch.
pub fn sweep_rank_correlations(max_n: usize) -> (usize, Vec<String>) {
    use shannon_core::correlation::{kendall_tau_b, spearman_rho, PairedSeries};
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for n in 2..=max_n {
        for_each_canonical_series(n, |xs, ys| {
            checked += 1;
            let series = PairedSeries::new(xs.to_vec(), ys.to_vec()).unwrap();
            let pairs = [
                ("kendall", kendall_tau_b(&series).ok(), kendall_oracle(xs, ys)),
                ("spearman", spearman_rho(&series).ok(), spearman_oracle(xs, ys)),
            ];
            for (name, got, want) in pairs {
                if got != want {
                    mismatches.push(format!("{name} {xs:?} {ys:?}: {got:?} != {want:?}"));
                }
            }
        });
    }
    (checked, mismatches)
}

/// A pairs-jsonl dataset built from a synthetic corpus: per document a
/// "reference" entry (its own reference summary) and a "lead" entry (its
/// first sentence), plus `ref_summary` for validation.
pub fn synthetic_pairs_jsonl(corpus: &shannon_core::synthetic::SyntheticCorpus) -> String {
    let mut out = String::new();
    for d in &corpus.documents {
        let lead = d.text.split_inclusive(". ").next().unwrap().trim();
        let first = serde_json::json!({
            "doc_id": d.id, "system_id": "reference", "document": d.text,
            "summary": d.reference, "ref_summary": d.reference,
        });
        let second = serde_json::json!({ "doc_id": d.id, "system_id": "lead", "summary": lead });
        out.push_str(&format!("{first}\n{second}\n"));
    }
    out
}

/// Word sequences of up to `max` words over a four-letter vocabulary.
pub fn word_seq(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..=max)
        .prop_map(|w| w.into_iter().map(str::to_string).collect())
}

pub fn toy_sentence(tokens: &[&str], surprisals: &[f64]) -> TokenScores {
    TokenScores {
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        surprisals: surprisals.to_vec(),
        greedy_correct: None,
        truncated: false,
        model_id: "toy-model".into(),
        context_limit: 64,
    }
}

/// A fixed two-sentence heatmap with four scenarios.
pub fn toy_heatmap_spec() -> HeatmapSpec {
    let tokens: [&[&str]; 2] = [&["The", " cat", " sat", "."], &["It", " purred", "."]];
    let profile = |scenario, a: [f64; 4], b: [f64; 3]| {
        InfoProfile::from_sentences(scenario, vec![toy_sentence(tokens[0], &a), toy_sentence(tokens[1], &b)])
    };
    HeatmapSpec::new("toy-1", "The cat sat. It purred.")
        .scenario(
            "I(D)",
            profile(Scenario::Unconditional, [3.2, 5.1, 4.0, 0.7], [2.9, 6.3, 0.5]),
        )
        .scenario(
            "I(D|S)",
            profile(Scenario::GivenSummary, [1.1, 0.9, 3.8, 0.6], [2.7, 6.0, 0.4]),
        )
        .scenario(
            "I(D|D)",
            profile(Scenario::GivenDocument, [0.4, 0.2, 0.3, 0.1], [0.5, 0.6, 0.0]),
        )
        .scenario(
            "I(D|S') shuffled",
            profile(Scenario::GivenSummary, [2.0, 1.5, 4.0, 0.7], [2.9, 6.2, 0.5]),
        )
        .metric("info_diff", 7.2)
        .metric("shannon_score", 7.2 / 20.6)
        .metric("blanc_shannon", 0.0)
}

/// Every tag of the page, in order.
pub fn tags(html: &str) -> Vec<&str> {
    html.split('<').skip(1).map(|s| &s[..s.find('>').unwrap()]).collect()
}

pub fn unescape(text: &str) -> String {
    text.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&")
}

/// Concatenations of markup-breaking fragments.
pub fn adversarial() -> impl Strategy<Value = String> {
    let fragment = prop::sample::select(vec![
        "<script>alert(1)</script>",
        "</span>",
        "<div>",
        "\"",
        "'",
        "&",
        "&amp;",
        "&lt;",
        "<!--",
        "-->",
        "]]>",
        "<img src=x onerror=alert(1)>",
        "javascript:",
        "\" onmouseover=\"x",
        "' style='",
        ">",
        "<",
        "é",
        "\u{202e}",
        "\n",
        " ",
        "plain",
        "</section>",
        "<style>",
        "{",
        "}",
    ]);
    prop::collection::vec(fragment, 1..6).prop_map(|f| f.concat())
}

/// Hostile strings in every text slot leave the tag structure of the page
/// unchanged and appear only in escaped form.
pub fn injection_property(doc_id: &str, label: &str, token: &str, metric: &str) -> Result<(), TestCaseError> {
    let profile =
        |t: &str| InfoProfile::from_sentences(Scenario::Unconditional, vec![toy_sentence(&[t, " ok"], &[1.0, 2.0])]);
    let hostile = HeatmapSpec::new(doc_id, "")
        .scenario(label, profile(token))
        .metric(metric, 1.0);
    let benign = HeatmapSpec::new("x", "").scenario("x", profile("x")).metric("x", 1.0);
    let hostile_html = render_heatmap(&hostile).unwrap();
    let benign_html = render_heatmap(&benign).unwrap();
    prop_assert_eq!(tags(&hostile_html), tags(&benign_html));
    for s in [doc_id, label, token, metric] {
        prop_assert_eq!(unescape(&escape_html(s)), s);
        prop_assert!(hostile_html.contains(&escape_html(s)));
    }
    Ok(())
}
