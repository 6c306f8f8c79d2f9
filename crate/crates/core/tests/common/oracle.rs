//! Brute-force reference implementations, written without touching the
//! library's text pipeline or index.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

/// Tokens of the visible text of a simple HTML page.
pub fn visible_tokens(html: &str) -> Vec<String> {
    let mut text = html.to_string();
    for (open, close) in [("<script", "</script>"), ("<style", "</style>"), ("<!--", "-->")] {
        while let Some(start) = text.find(open) {
            let end = text[start..].find(close).map_or(text.len(), |e| start + e + close.len());
            text.replace_range(start..end, " ");
        }
    }
    let mut plain = String::with_capacity(text.len());
    let mut in_tag = false;
    for c in text.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                plain.push(' ');
            }
            _ if !in_tag => plain.push(c),
            _ => {}
        }
    }
    words(&plain)
}

/// Maximal ASCII letter runs of length two or more, lowercased.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphabetic())
        .filter(|w| w.len() >= 2)
        .map(|w| w.to_ascii_lowercase())
        .collect()
}

/// Every candidate's weight, best first, ties by token.
pub fn rank_tags(
    tokens: &[String],
    df: &HashMap<String, u64>,
    n_docs: u64,
    stopwords: &HashSet<String>,
) -> Vec<(String, f64)> {
    let total = tokens.len() as f64;
    let mut scored: Vec<(String, f64)> = Vec::new();
    let mut done = HashSet::new();
    for t in tokens {
        if stopwords.contains(t) || !done.insert(t) {
            continue;
        }
        let count = tokens.iter().filter(|x| *x == t).count() as f64;
        let d = *df.get(t).unwrap_or(&0) as f64;
        let idf = ((n_docs as f64 + 1.0) / (d + 1.0)).ln() + 1.0;
        scored.push((t.clone(), count / total * idf));
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

pub fn top_tags(
    tokens: &[String],
    df: &HashMap<String, u64>,
    n_docs: u64,
    stopwords: &HashSet<String>,
    k: usize,
) -> Vec<String> {
    rank_tags(tokens, df, n_docs, stopwords)
        .into_iter()
        .take(k)
        .map(|(t, _)| t)
        .collect()
}

pub struct Background {
    pub n_docs: u64,
    pub df: HashMap<String, u64>,
    pub stopwords: HashSet<String>,
}

impl Background {
    pub fn load(freq: &Path, stop: &Path) -> Self {
        let text = std::fs::read_to_string(freq).unwrap();
        let mut lines = text.lines();
        let n_docs = lines.next().unwrap().strip_prefix("N=").unwrap().trim().parse().unwrap();
        let df = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let (t, d) = l.split_once('\t').unwrap();
                (t.to_string(), d.trim().parse().unwrap())
            })
            .collect();
        let stopwords = std::fs::read_to_string(stop)
            .unwrap()
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        Self {
            n_docs,
            df,
            stopwords,
        }
    }
}

/// Linear-scan cosine search over raw-count TF-IDF vectors.
pub struct BruteIndex {
    docs: Vec<(String, HashMap<String, f64>)>,
    df: HashMap<String, usize>,
}

impl BruteIndex {
    pub fn new(docs: Vec<(String, Vec<String>)>) -> Self {
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut out = Vec::new();
        for (url, tokens) in docs {
            let mut counts: HashMap<String, f64> = HashMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1.0;
            }
            for t in counts.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            out.push((url, counts));
        }
        Self { docs: out, df }
    }

    fn idf(&self, t: &str) -> f64 {
        let n = self.docs.len() as f64;
        ((n + 1.0) / (*self.df.get(t).unwrap_or(&0) as f64 + 1.0)).ln() + 1.0
    }

    pub fn search(&self, query: &str, max: usize) -> Vec<String> {
        self.scored(query).into_iter().take(max).map(|(u, _)| u).collect()
    }

    /// Every matching document with its cosine, best first, ties by URL.
    pub fn scored(&self, query: &str) -> Vec<(String, f64)> {
        let mut q: HashMap<String, f64> = HashMap::new();
        for t in words(query) {
            *q.entry(t).or_default() += 1.0;
        }
        let qv: HashMap<&str, f64> = q.iter().map(|(t, c)| (t.as_str(), c * self.idf(t))).collect();
        let qn = qv.values().map(|w| w * w).sum::<f64>().sqrt();
        let mut scored: Vec<(f64, &str)> = Vec::new();
        for (url, counts) in &self.docs {
            let dot: f64 = counts
                .iter()
                .filter_map(|(t, c)| qv.get(t.as_str()).map(|qw| qw * c * self.idf(t)))
                .sum();
            if dot <= 0.0 {
                continue;
            }
            let dn = counts
                .iter()
                .map(|(t, c)| (c * self.idf(t)).powi(2))
                .sum::<f64>()
                .sqrt();
            scored.push((dot / (dn * qn), url.as_str()));
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        scored.into_iter().map(|(s, u)| (u.to_string(), s)).collect()
    }
}

/// Host of an `http://host/path` URL.
pub fn host_of(url: &str) -> &str {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.split('/').next().unwrap_or(rest)
}

/// Blacklisted domains confirmed within `iterations` rounds of
/// probe, extract, search, starting from `seeds`.
pub fn reachable_blacklisted(
    pages: &HashMap<String, String>,
    blacklist: &HashSet<String>,
    background: &Background,
    seeds: &[String],
    iterations: u32,
    k: usize,
    results: usize,
) -> BTreeSet<String> {
    let index = BruteIndex::new(
        pages
            .iter()
            .map(|(u, html)| (u.clone(), visible_tokens(html)))
            .collect(),
    );
    let mut seen: HashSet<String> = seeds.iter().cloned().collect();
    let mut searched: HashSet<String> = HashSet::new();
    let mut frontier: Vec<String> = seeds.to_vec();
    let mut poisoned = BTreeSet::new();
    for _ in 0..iterations {
        let mut tags = Vec::new();
        for url in &frontier {
            let host = host_of(url);
            if !blacklist.contains(host) {
                continue;
            }
            poisoned.insert(host.to_string());
            let Some(html) = pages.get(url) else { continue };
            tags.extend(top_tags(
                &visible_tokens(html),
                &background.df,
                background.n_docs,
                &background.stopwords,
                k,
            ));
        }
        let mut next = Vec::new();
        for t in tags {
            if !searched.insert(t.clone()) {
                continue;
            }
            for u in index.search(&t, results) {
                if seen.insert(u.clone()) {
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    poisoned
}
