//! Text normalization, sentence segmentation and the extractive summary
//! statistics (coverage, density, compression, novel/repeated n-grams).
//!
//! Everything here is a pure function of its input. Sentence spans are byte
//! offsets into the owning text.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("document is empty or whitespace-only")]
    EmptyDocument,
    #[error("summary has no words")]
    EmptySummary,
    #[error("pre-segmented sentence {index} does not occur in order in the document text")]
    SentenceMismatch { index: usize },
}

/// Lowercased tokens that end with a period but never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "gen.", "gov.", "sen.", "rep.", "col.", "lt.",
    "sgt.", "capt.", "cmdr.", "adm.", "rev.", "hon.", "pres.", "vs.", "etc.", "e.g.", "i.e.", "u.s.", "u.k.", "u.n.",
    "inc.", "ltd.", "co.", "corp.", "jan.", "feb.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.",
    "dec.", "no.", "fig.", "approx.", "dept.", "est.",
];

const TERMINAL: &[char] = &['.', '!', '?'];
const CLOSING: &[char] = &['"', '\'', ')', ']', '}', '”', '’', '»'];
const OPENING: &[char] = &['"', '\'', '(', '[', '{', '“', '‘', '«'];

/// Characters stripped from the edges of a word. Interior occurrences are kept,
/// and symbols such as `%` or `$` are never stripped.
const EDGE_PUNCT: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', '`', '(', ')', '[', ']', '{', '}', '<', '>', '«', '»', '“', '”', '‘', '’',
    '„', '…', '–', '—', '-', '*', '_',
];

/// A trimmed, non-empty sentence span `[start, end)` in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub start: usize,
    pub end: usize,
}

impl Sentence {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// A source document together with its sentence segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    sentences: Vec<Sentence>,
}

impl Document {
    /// Segments `text` with [`split_sentences`].
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, TextError> {
        let text = text.into();
        let sentences = split_sentences(&text)?;
        Ok(Self {
            id: id.into(),
            text,
            sentences,
        })
    }

    /// Uses caller-supplied sentences instead of the built-in segmenter. Each
    /// sentence must occur in `text`, in order, and together they must cover
    /// every non-whitespace character.
    pub fn from_sentences<S: AsRef<str>>(
        id: impl Into<String>,
        text: impl Into<String>,
        sentences: &[S],
    ) -> Result<Self, TextError> {
        let text = text.into();
        let mut spans = Vec::with_capacity(sentences.len());
        let mut cursor = 0;
        for (index, sentence) in sentences.iter().enumerate() {
            let trimmed = sentence.as_ref().trim();
            if trimmed.is_empty() {
                continue;
            }
            let rest = &text[cursor..];
            let offset = rest.find(trimmed).ok_or(TextError::SentenceMismatch { index })?;
            if !rest[..offset].trim().is_empty() {
                return Err(TextError::SentenceMismatch { index });
            }
            let start = cursor + offset;
            let end = start + trimmed.len();
            spans.push(Sentence { start, end });
            cursor = end;
        }
        if spans.is_empty() {
            return Err(TextError::EmptyDocument);
        }
        if !text[cursor..].trim().is_empty() {
            return Err(TextError::SentenceMismatch { index: sentences.len() });
        }
        Ok(Self {
            id: id.into(),
            text,
            sentences: spans,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence_text(&self, index: usize) -> &str {
        self.sentences[index].text(&self.text)
    }

    /// Source text from the start of sentence `first` to the end of sentence
    /// `last` (inclusive), with the original whitespace between them.
    pub fn span_text(&self, first: usize, last: usize) -> &str {
        &self.text[self.sentences[first].start..self.sentences[last].end]
    }
}

/// A summary produced by some system for some document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryText {
    pub id: String,
    pub system_id: String,
    pub text: String,
}

impl SummaryText {
    pub fn new(id: impl Into<String>, system_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            system_id: system_id.into(),
            text: text.into(),
        }
    }
}

/// Deterministic rule-based sentence segmentation.
///
/// A boundary falls after `.`, `!` or `?` (plus any closing quotes or
/// brackets) when whitespace follows and the next word starts with an
/// uppercase letter or digit, optionally behind an opening quote. A blank
/// line always splits. Tokens in the abbreviation list never end a sentence.
pub fn split_sentences(text: &str) -> Result<Vec<Sentence>, TextError> {
    if text.trim().is_empty() {
        return Err(TextError::EmptyDocument);
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);

    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            let run_start = i;
            let mut newlines = 0;
            while i < chars.len() && chars[i].1.is_whitespace() {
                if chars[i].1 == '\n' {
                    newlines += 1;
                }
                i += 1;
            }
            if newlines >= 2 {
                cuts.push(byte_at(run_start));
            }
            continue;
        }
        if TERMINAL.contains(&c) {
            let mut j = i + 1;
            while j < chars.len() && TERMINAL.contains(&chars[j].1) {
                j += 1;
            }
            while j < chars.len() && CLOSING.contains(&chars[j].1) {
                j += 1;
            }
            let boundary = j;
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k > j && k < chars.len() && starts_sentence(&chars[k..]) {
                let is_abbrev = c == '.' && j == i + 1 && is_abbreviation(text, byte_at(i) + 1);
                if !is_abbrev {
                    cuts.push(byte_at(boundary));
                }
            }
            i = boundary;
            continue;
        }
        i += 1;
    }

    let mut sentences = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        if let Some(span) = trimmed_span(text, start, cut) {
            sentences.push(span);
        }
        start = cut;
    }
    Ok(sentences)
}

fn starts_sentence(rest: &[(usize, char)]) -> bool {
    let mut it = rest.iter().map(|&(_, c)| c).skip_while(|c| OPENING.contains(c));
    matches!(it.next(), Some(c) if c.is_uppercase() || c.is_ascii_digit())
}

/// `end` is the byte just past the period.
fn is_abbreviation(text: &str, end: usize) -> bool {
    let head = &text[..end];
    let start = head
        .rfind(char::is_whitespace)
        .map_or(0, |p| p + head[p..].chars().next().map_or(1, char::len_utf8));
    let word = head[start..].trim_start_matches(OPENING).to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn trimmed_span(text: &str, start: usize, end: usize) -> Option<Sentence> {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        None
    } else {
        let s = start + lead;
        Some(Sentence {
            start: s,
            end: s + trimmed.len(),
        })
    }
}

/// Lowercased words with edge punctuation removed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSequence {
    pub words: Vec<String>,
}

impl WordSequence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn ngrams(&self, n: usize) -> impl Iterator<Item = &[String]> {
        self.words.windows(n)
    }
}

impl<S: Into<String>> FromIterator<S> for WordSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

pub fn word_tokens(text: &str) -> WordSequence {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(EDGE_PUNCT).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// A contiguous run of summary words copied verbatim from the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub doc_start: usize,
    pub sum_start: usize,
    pub length: usize,
}

/// Greedy left-to-right fragment extraction.
///
/// At each summary position the longest contiguous match anywhere in the
/// document is taken (earliest document position on ties) and the cursor
/// jumps past it; without a match the cursor advances by one word.
pub fn extractive_fragments(doc: &WordSequence, summary: &WordSequence) -> Vec<Fragment> {
    let (d, s) = (&doc.words, &summary.words);
    if d.is_empty() || s.is_empty() {
        return Vec::new();
    }
    // lcp[i][j]: length of the common run starting at summary i, document j.
    let width = d.len() + 1;
    let mut lcp = vec![0u32; (s.len() + 1) * width];
    for i in (0..s.len()).rev() {
        for j in (0..d.len()).rev() {
            if s[i] == d[j] {
                lcp[i * width + j] = lcp[(i + 1) * width + j + 1] + 1;
            }
        }
    }

    let mut fragments = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let row = &lcp[i * width..i * width + d.len()];
        let (best_j, best_len) = row
            .iter()
            .enumerate()
            .fold((0, 0u32), |best, (j, &len)| if len > best.1 { (j, len) } else { best });
        if best_len == 0 {
            i += 1;
        } else {
            fragments.push(Fragment {
                doc_start: best_j,
                sum_start: i,
                length: best_len as usize,
            });
            i += best_len as usize;
        }
    }
    fragments
}

/// The n-gram orders reported by [`SummaryStats`].
pub const NGRAM_ORDERS: [usize; 3] = [1, 2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub length: usize,
    pub compression: f64,
    pub coverage: f64,
    pub density: f64,
    /// Indexed by n − 1.
    pub novel: [f64; 3],
    /// Indexed by n − 1.
    pub repeat: [f64; 3],
}

impl SummaryStats {
    pub const FIELDS: [&'static str; 10] = [
        "length",
        "compression",
        "coverage",
        "density",
        "novel_1",
        "novel_2",
        "novel_3",
        "repeat_1",
        "repeat_2",
        "repeat_3",
    ];

    pub fn novel_n(&self, n: usize) -> f64 {
        self.novel[n - 1]
    }

    pub fn repeat_n(&self, n: usize) -> f64 {
        self.repeat[n - 1]
    }

    /// Looks a statistic up by its name in [`Self::FIELDS`].
    pub fn field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "length" => self.length as f64,
            "compression" => self.compression,
            "coverage" => self.coverage,
            "density" => self.density,
            "novel_1" => self.novel[0],
            "novel_2" => self.novel[1],
            "novel_3" => self.novel[2],
            "repeat_1" => self.repeat[0],
            "repeat_2" => self.repeat[1],
            "repeat_3" => self.repeat[2],
            _ => return None,
        })
    }
}

pub fn summary_stats(doc: &Document, summary: &SummaryText) -> Result<SummaryStats, TextError> {
    stats_from_words(&word_tokens(&doc.text), &word_tokens(&summary.text))
}

/// Same as [`summary_stats`] over already tokenized word sequences.
///
/// Summaries shorter than n have no n-grams; their novel_n and repeat_n are 0.
pub fn stats_from_words(doc: &WordSequence, summary: &WordSequence) -> Result<SummaryStats, TextError> {
    if summary.is_empty() {
        return Err(TextError::EmptySummary);
    }
    let len = summary.len() as f64;
    let fragments = extractive_fragments(doc, summary);
    let covered: usize = fragments.iter().map(|f| f.length).sum();
    let squared: usize = fragments.iter().map(|f| f.length * f.length).sum();

    let mut novel = [0.0; 3];
    let mut repeat = [0.0; 3];
    for n in NGRAM_ORDERS {
        let doc_grams: HashSet<&[String]> = doc.ngrams(n).collect();
        let occurrences = summary.ngrams(n).count();
        let distinct: HashSet<&[String]> = summary.ngrams(n).collect();
        if occurrences > 0 {
            let unseen = distinct.iter().filter(|g| !doc_grams.contains(*g)).count();
            novel[n - 1] = unseen as f64 / distinct.len() as f64;
            repeat[n - 1] = 1.0 - distinct.len() as f64 / occurrences as f64;
        }
    }

    Ok(SummaryStats {
        length: summary.len(),
        compression: doc.len() as f64 / len,
        coverage: covered as f64 / len,
        density: squared as f64 / len,
        novel,
        repeat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(text: &str) -> Vec<&str> {
        split_sentences(text).unwrap().iter().map(|s| s.text(text)).collect()
    }

    fn words(s: &str) -> WordSequence {
        s.split_whitespace().collect()
    }

    #[test]
    fn splits_on_terminal_periods() {
        assert_eq!(texts("A b. C d."), ["A b.", "C d."]);
    }

    #[test]
    fn abbreviation_does_not_split() {
        assert_eq!(texts("Mr. Smith ran. He won."), ["Mr. Smith ran.", "He won."]);
        assert_eq!(
            texts("The U.S. Senate voted. It passed."),
            ["The U.S. Senate voted.", "It passed."]
        );
    }

    #[test]
    fn blank_line_always_splits() {
        assert_eq!(texts("One line\n\nTwo line"), ["One line", "Two line"]);
        assert_eq!(texts("no caps\n \n here"), ["no caps", "here"]);
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(
            texts("It cost 3.5 dollars. then more"),
            ["It cost 3.5 dollars. then more"]
        );
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        assert_eq!(
            texts("He said \"stop.\" Then \"Go!\" she said. 2 left?! Yes"),
            ["He said \"stop.\"", "Then \"Go!\" she said.", "2 left?!", "Yes"]
        );
    }

    #[test]
    fn empty_text_is_an_error() {
        assert_eq!(split_sentences(""), Err(TextError::EmptyDocument));
        assert_eq!(split_sentences(" \n\t"), Err(TextError::EmptyDocument));
        assert_eq!(Document::new("d", "  ").unwrap_err(), TextError::EmptyDocument);
    }

    #[test]
    fn presegmented_sentences_locate_in_text() {
        let doc = Document::from_sentences("d", "First one.  second one", &["First one.", "second one"]).unwrap();
        assert_eq!(doc.len(), 2);
        assert_eq!(doc.sentence_text(1), "second one");
        assert_eq!(doc.span_text(0, 1), "First one.  second one");
        let err = Document::from_sentences("d", "First one. second", &["second", "First one."]);
        assert!(matches!(err, Err(TextError::SentenceMismatch { .. })));
        let err = Document::from_sentences("d", "First one. extra", &["First one."]);
        assert!(matches!(err, Err(TextError::SentenceMismatch { index: 1 })));
    }

    #[test]
    fn word_tokens_examples() {
        assert_eq!(word_tokens("The cat, sat.").words, ["the", "cat", "sat"]);
        assert!(word_tokens("").is_empty());
        assert_eq!(word_tokens("U.S. GDP grew 3%").words, ["u.s", "gdp", "grew", "3%"]);
        assert_eq!(word_tokens("-- \"hi\" ...").words, ["hi"]);
    }

    #[test]
    fn fragment_examples() {
        let f = extractive_fragments(&words("the cat sat on the mat"), &words("the cat sat"));
        assert_eq!(
            f,
            [Fragment {
                doc_start: 0,
                sum_start: 0,
                length: 3
            }]
        );
        assert!(extractive_fragments(&words("a b"), &words("c")).is_empty());
        let f = extractive_fragments(&words("a b a b c"), &words("a b c"));
        assert_eq!(
            f,
            [Fragment {
                doc_start: 2,
                sum_start: 0,
                length: 3
            }]
        );
    }

    #[test]
    fn fragment_search_is_not_fooled_by_overlapping_prefix() {
        // A skip-ahead scan would stop at the length-2 match at 0.
        let f = extractive_fragments(&words("a a a b"), &words("a a b"));
        assert_eq!(
            f,
            [Fragment {
                doc_start: 1,
                sum_start: 0,
                length: 3
            }]
        );
    }

    #[test]
    fn stats_worked_example() {
        let doc = Document::new("d", "the cat sat on the mat").unwrap();
        let st = summary_stats(&doc, &SummaryText::new("s", "sys", "the cat sat")).unwrap();
        assert_eq!(st.length, 3);
        assert_eq!(st.compression, 2.0);
        assert_eq!(st.coverage, 1.0);
        assert_eq!(st.density, 3.0);
        assert_eq!(st.novel_n(1), 0.0);
        assert_eq!(st.repeat_n(1), 0.0);
    }

    #[test]
    fn stats_disjoint_and_repeated() {
        let doc = Document::new("d", "the cat sat").unwrap();
        let st = summary_stats(&doc, &SummaryText::new("s", "sys", "dogs bark loudly")).unwrap();
        assert_eq!((st.coverage, st.density, st.novel_n(1)), (0.0, 0.0, 1.0));

        let st = summary_stats(&doc, &SummaryText::new("s", "sys", "a a a")).unwrap();
        assert_eq!(st.repeat_n(1), 1.0 - 1.0 / 3.0);
        assert_eq!(st.repeat_n(2), 0.5);
        assert_eq!(st.repeat_n(3), 0.0);
    }

    #[test]
    fn short_summary_has_zero_higher_order_stats() {
        let doc = Document::new("d", "x y z").unwrap();
        let st = summary_stats(&doc, &SummaryText::new("s", "sys", "q")).unwrap();
        assert_eq!(st.novel, [1.0, 0.0, 0.0]);
        assert_eq!(st.repeat, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_summary_is_an_error() {
        let doc = Document::new("d", "x y z").unwrap();
        let err = summary_stats(&doc, &SummaryText::new("s", "sys", " ... ")).unwrap_err();
        assert_eq!(err, TextError::EmptySummary);
    }

    #[test]
    fn field_lookup_matches_struct() {
        let doc = Document::new("d", "the cat sat on the mat").unwrap();
        let st = summary_stats(&doc, &SummaryText::new("s", "sys", "the dog sat on it")).unwrap();
        for name in SummaryStats::FIELDS {
            assert!(st.field(name).is_some(), "{name}");
        }
        assert_eq!(st.field("novel_2"), Some(st.novel_n(2)));
        assert_eq!(st.field("bogus"), None);
    }
}
