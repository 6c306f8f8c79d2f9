//! In-process search engine over the simulation corpus.
//!
//! Documents and queries are TF-IDF vectors (raw term count times
//! `ln((N+1)/(df+1)) + 1`); results are ranked by cosine similarity, ties by
//! ascending document id. Document ids follow lexicographic URL order, so an
//! index built twice from the same corpus is identical.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use async_trait::async_trait;

use super::SearchBackend;
use crate::sim::{read_corpus, SimError};
use crate::store::SearchEvent;
use crate::textproc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc_id: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedIndex {
    urls: Vec<String>,
    inverted: BTreeMap<String, Vec<Posting>>,
    norms: Vec<f64>,
}

impl SimulatedIndex {
    /// Indexes every document of a corpus directory.
    pub fn build(corpus_dir: &Path) -> Result<Self, SimError> {
        let docs = read_corpus(corpus_dir)?;
        if docs.is_empty() {
            return Err(SimError::EmptyCorpus(corpus_dir.display().to_string()));
        }
        Ok(Self::from_documents(docs.into_iter().map(|d| {
            let tokens = textproc::strip_html(&d.html, None).tokens;
            (d.url, tokens)
        })))
    }

    /// Documents are sorted by URL before ids are assigned.
    pub fn from_documents(docs: impl IntoIterator<Item = (String, Vec<String>)>) -> Self {
        let mut docs: Vec<(String, Vec<String>)> = docs.into_iter().collect();
        docs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut inverted: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut urls = Vec::with_capacity(docs.len());
        let mut doc_counts = Vec::with_capacity(docs.len());
        for (id, (url, tokens)) in docs.into_iter().enumerate() {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_default() += 1;
            }
            for (t, &c) in &counts {
                inverted.entry(t.clone()).or_default().push(Posting {
                    doc_id: id as u32,
                    count: c,
                });
            }
            urls.push(url);
            doc_counts.push(counts);
        }
        let n = urls.len() as f64;
        let idf_of = |df: usize| ((n + 1.0) / (df as f64 + 1.0)).ln() + 1.0;
        let norms = doc_counts
            .iter()
            .map(|counts| {
                counts
                    .iter()
                    .map(|(t, &c)| {
                        let w = c as f64 * idf_of(inverted[t].len());
                        w * w
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Self {
            urls,
            inverted,
            norms,
        }
    }

    pub fn document_count(&self) -> usize {
        self.urls.len()
    }

    pub fn url(&self, doc_id: u32) -> Option<&str> {
        self.urls.get(doc_id as usize).map(String::as_str)
    }

    pub fn postings(&self, token: &str) -> &[Posting] {
        self.inverted.get(token).map_or(&[], Vec::as_slice)
    }

    pub fn idf(&self, token: &str) -> f64 {
        let n = self.urls.len() as f64;
        ((n + 1.0) / (self.postings(token).len() as f64 + 1.0)).ln() + 1.0
    }

    /// Ranked `(doc_id, cosine)` pairs for a free-text query.
    pub fn rank(&self, query: &str, max_results: usize) -> Vec<(u32, f64)> {
        let mut qcounts: BTreeMap<String, u32> = BTreeMap::new();
        for t in textproc::tokenize(query) {
            *qcounts.entry(t).or_default() += 1;
        }
        let qweights: Vec<(&str, f64)> = qcounts
            .iter()
            .filter(|(t, _)| self.inverted.contains_key(t.as_str()))
            .map(|(t, &c)| (t.as_str(), c as f64 * self.idf(t)))
            .collect();
        let qnorm = qcounts
            .iter()
            .map(|(t, &c)| {
                let w = c as f64 * self.idf(t);
                w * w
            })
            .sum::<f64>()
            .sqrt();
        if qweights.is_empty() || qnorm == 0.0 {
            return Vec::new();
        }
        let mut dots: HashMap<u32, f64> = HashMap::new();
        for (t, qw) in &qweights {
            let idf = self.idf(t);
            for p in self.postings(t) {
                *dots.entry(p.doc_id).or_default() += qw * p.count as f64 * idf;
            }
        }
        let mut scored: Vec<(u32, f64)> = dots
            .into_iter()
            .map(|(d, dot)| (d, dot / (qnorm * self.norms[d as usize])))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(max_results);
        scored
    }
}

/// [`SearchBackend`] over a [`SimulatedIndex`].
#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    index: std::sync::Arc<SimulatedIndex>,
}

impl SimulatedBackend {
    pub fn new(index: SimulatedIndex) -> Self {
        Self {
            index: std::sync::Arc::new(index),
        }
    }

    pub fn index(&self) -> &SimulatedIndex {
        &self.index
    }
}

#[async_trait]
impl SearchBackend for SimulatedBackend {
    fn name(&self) -> &str {
        "sim"
    }

    async fn search(&self, tag: &str, max_results: usize) -> SearchEvent {
        let urls = self
            .index
            .rank(tag, max_results)
            .into_iter()
            .map(|(d, _)| self.index.urls[d as usize].clone());
        SearchEvent::from_urls(tag, "sim", urls, None)
    }
}
