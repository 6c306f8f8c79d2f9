//! HTML to token conversion and TF-IDF tag extraction.
//!
//! Tokens are runs of letters, lowercased, at least two long and made only
//! of ISO basic Latin letters. A word containing any other letter is
//! dropped whole rather than split.
//!
//! Tag weight for token `t` in a document of `L` tokens against a background
//! corpus of `N` documents:
//!
//! ```text
//! tf(t)  = count(t) / L
//! idf(t) = ln((N + 1) / (df(t) + 1)) + 1      (df = 0 for unseen tokens)
//! w(t)   = tf(t) * idf(t)
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TAGS_PER_PAGE: usize = 5;

/// Elements whose content is never visible text.
const SKIPPED_ELEMENTS: [&str; 5] = ["script", "style", "noscript", "template", "svg"];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub source_url: String,
    pub tokens: Vec<String>,
    pub token_count: usize,
}

impl CleanDocument {
    pub fn from_tokens(source_url: impl Into<String>, tokens: Vec<String>) -> Self {
        Self {
            source_url: source_url.into(),
            token_count: tokens.len(),
            tokens,
        }
    }

    pub fn with_source(mut self, source_url: impl Into<String>) -> Self {
        self.source_url = source_url.into();
        self
    }

    /// Distinct tokens in lexicographic order.
    pub fn distinct_tokens(&self) -> Vec<String> {
        let mut v = self.tokens.clone();
        v.sort();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTag {
    pub tag: String,
    pub weight: f64,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

/// Background document frequencies plus the stopword list. Immutable once
/// built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusModel {
    document_count: u64,
    doc_frequency: HashMap<String, u64>,
    stopwords: HashSet<String>,
}

impl CorpusModel {
    pub fn new(
        document_count: u64,
        doc_frequency: HashMap<String, u64>,
        stopwords: HashSet<String>,
    ) -> Result<Self, String> {
        if document_count == 0 {
            return Err("document count must be at least 1".into());
        }
        if let Some((t, df)) = doc_frequency
            .iter()
            .find(|(_, &df)| df == 0 || df > document_count)
        {
            return Err(format!("df({t}) = {df} outside 1..={document_count}"));
        }
        Ok(Self {
            document_count,
            doc_frequency,
            stopwords,
        })
    }

    /// Counts, for each token, the documents containing it.
    pub fn from_documents<'a>(
        docs: impl IntoIterator<Item = &'a [String]>,
        stopwords: HashSet<String>,
    ) -> Result<Self, String> {
        let mut n = 0u64;
        let mut df: HashMap<String, u64> = HashMap::new();
        for doc in docs {
            n += 1;
            let distinct: HashSet<&String> = doc.iter().collect();
            for t in distinct {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        Self::new(n, df, stopwords)
    }

    /// Loads a `N=<int>` + `token<TAB>df` frequency table and a
    /// one-word-per-line stopword file.
    pub fn load(frequency_table: &Path, stopword_file: &Path) -> Result<Self, CorpusError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| CorpusError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        let freq_text = read(frequency_table)?;
        let stop_text = read(stopword_file)?;
        let path = frequency_table.display().to_string();
        let malformed = |line: usize, message: String| CorpusError::Malformed {
            path: path.clone(),
            line,
            message,
        };

        let mut lines = freq_text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| malformed(1, "missing N=<int> header".into()))?;
        let document_count: u64 = header
            .trim()
            .strip_prefix("N=")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| malformed(1, format!("expected N=<positive int>, got {header:?}")))?;

        let mut doc_frequency = HashMap::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (token, df) = line
                .split_once('\t')
                .ok_or_else(|| malformed(line_no, format!("expected token<TAB>df, got {line:?}")))?;
            let df: u64 = df
                .trim()
                .parse()
                .map_err(|_| malformed(line_no, format!("bad df {df:?}")))?;
            if df == 0 || df > document_count {
                return Err(malformed(
                    line_no,
                    format!("df {df} for {token:?} outside 1..={document_count}"),
                ));
            }
            if doc_frequency.insert(token.to_string(), df).is_some() {
                return Err(malformed(line_no, format!("duplicate token {token:?}")));
            }
        }
        let stopwords = stop_text
            .lines()
            .map(|l| l.trim().to_ascii_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        Ok(Self {
            document_count,
            doc_frequency,
            stopwords,
        })
    }

    /// Serializes the frequency table in the format `load` reads, tokens in
    /// lexicographic order.
    pub fn frequency_table(&self) -> String {
        let sorted: BTreeMap<&String, &u64> = self.doc_frequency.iter().collect();
        let mut out = format!("N={}\n", self.document_count);
        for (t, df) in sorted {
            let _ = writeln!(out, "{t}\t{df}");
        }
        out
    }

    pub fn document_count(&self) -> u64 {
        self.document_count
    }

    pub fn df(&self, token: &str) -> u64 {
        self.doc_frequency.get(token).copied().unwrap_or(0)
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn idf(&self, token: &str) -> f64 {
        let n = self.document_count as f64;
        let df = self.df(token) as f64;
        ((n + 1.0) / (df + 1.0)).ln() + 1.0
    }
}

fn is_tag_token(t: &str) -> bool {
    t.len() >= 2 && t.bytes().all(|b| b.is_ascii_lowercase())
}

/// Top `k` non-stopword tokens by TF-IDF weight; ties go to the
/// lexicographically smaller token.
pub fn extract_tags(doc: &CleanDocument, model: &CorpusModel, k: usize) -> Vec<WeightedTag> {
    if doc.tokens.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &doc.tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let len = doc.tokens.len() as f64;
    let mut scored: Vec<WeightedTag> = counts
        .into_iter()
        .filter(|(t, _)| is_tag_token(t) && !model.is_stopword(t))
        .map(|(t, c)| WeightedTag {
            tag: t.to_string(),
            weight: (c as f64 / len) * model.idf(t),
        })
        .collect();
    scored.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.tag.cmp(&b.tag))
    });
    scored.truncate(k);
    scored
}

/// Decodes `raw` (declared charset, else UTF-8, replacement on error) and
/// reduces it to tokens.
pub fn strip_html(raw: &[u8], declared_charset: Option<&str>) -> CleanDocument {
    let encoding = declared_charset
        .and_then(|c| encoding_rs::Encoding::for_label(c.trim().as_bytes()))
        .unwrap_or(encoding_rs::UTF_8);
    let (text, _, _) = encoding.decode(raw);
    let visible = visible_text(&text);
    let decoded = html_escape::decode_html_entities(&visible);
    CleanDocument::from_tokens(String::new(), tokenize(&decoded))
}

/// Splits on every non-letter, lowercases, keeps `[a-z]{2,}` words only.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|w| w.len() >= 2 && w.bytes().all(|b| b.is_ascii_alphabetic()))
        .map(|w| w.to_ascii_lowercase())
        .collect()
}

fn starts_with_ci(hay: &str, needle: &str) -> bool {
    hay.len() >= needle.len()
        && hay.as_bytes()[..needle.len()].eq_ignore_ascii_case(needle.as_bytes())
}

/// Text outside tags, with comments and script-like elements removed. Each
/// tag becomes a single space.
fn visible_text(html: &str) -> String {
    let mut out = String::with_capacity(html.len() / 2);
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        rest = &rest[lt..];
        if rest.starts_with("<!--") {
            rest = match rest[4..].find("-->") {
                Some(end) => &rest[4 + end + 3..],
                None => "",
            };
            out.push(' ');
            continue;
        }
        let after = &rest[1..];
        let next = after.chars().next();
        let is_tag = matches!(next, Some(c) if c.is_ascii_alphabetic() || c == '/' || c == '!' || c == '?');
        if !is_tag {
            out.push('<');
            rest = after;
            continue;
        }
        let Some(gt) = tag_end(rest) else {
            rest = "";
            break;
        };
        let skipped = SKIPPED_ELEMENTS.iter().find(|name| {
            starts_with_ci(after, name)
                && after[name.len()..]
                    .chars()
                    .next()
                    .is_none_or(|c| c.is_whitespace() || c == '>' || c == '/')
        });
        let self_closing = rest[..gt].ends_with("/>");
        rest = &rest[gt + 1..];
        if let (Some(name), false) = (skipped, self_closing) {
            let close = format!("</{name}");
            rest = match find_ci(rest, &close) {
                Some(pos) => match rest[pos..].find('>') {
                    Some(g) => &rest[pos + g + 1..],
                    None => "",
                },
                None => "",
            };
        }
        out.push(' ');
    }
    out.push_str(rest);
    out
}

/// Index of the `>` closing the tag at the start of `s`, honoring quotes.
fn tag_end(s: &str) -> Option<usize> {
    let mut quote: Option<char> = None;
    for (i, c) in s.char_indices().skip(1) {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '>' => return Some(i),
            None => {}
        }
    }
    None
}

fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.len() > h.len() {
        return None;
    }
    (0..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}
