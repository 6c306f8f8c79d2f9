//! In-memory materialization of the journal.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::records::*;
use super::StoreError;
use crate::dnsprobe::Verdict;
use crate::urlnorm;

/// Result of applying a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ack {
    Written,
    /// Duplicate URL or tag; nothing was written.
    AlreadyKnown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreState {
    pub(crate) urls: Vec<UrlRecord>,
    pub(crate) tags: Vec<TagRecord>,
    pub(crate) verdicts: BTreeMap<String, DomainVerdict>,
    pub(crate) searches: Vec<SearchEvent>,
    pub(crate) pages: BTreeMap<String, PageText>,
    #[serde(default)]
    pub(crate) last_phase: Option<PhaseMark>,

    #[serde(skip)]
    url_index: HashMap<String, usize>,
    #[serde(skip)]
    tag_index: HashMap<(String, String), usize>,
    #[serde(skip)]
    unchecked: BTreeSet<usize>,
    #[serde(skip)]
    pending_tags: BTreeSet<usize>,
    #[serde(skip)]
    unsearched: BTreeSet<usize>,
    #[serde(skip)]
    searches_by_tag: HashMap<String, usize>,
}

fn is_tag_token(t: &str) -> bool {
    t.len() >= 2 && t.bytes().all(|b| b.is_ascii_lowercase())
}

impl StoreState {
    /// Rebuilds every secondary index from the primary vectors.
    pub(crate) fn reindex(&mut self) {
        self.url_index.clear();
        self.unchecked.clear();
        self.pending_tags.clear();
        for i in 0..self.urls.len() {
            self.url_index.insert(self.urls[i].url.clone(), i);
            self.index_url_status(i);
        }
        self.tag_index.clear();
        self.unsearched.clear();
        for (i, t) in self.tags.iter().enumerate() {
            self.tag_index
                .insert((t.tag.clone(), t.source_url.clone()), i);
            if !t.searched {
                self.unsearched.insert(i);
            }
        }
        self.searches_by_tag.clear();
        for (i, s) in self.searches.iter().enumerate() {
            if s.error.is_none() {
                self.searches_by_tag.entry(s.tag.clone()).or_insert(i);
            }
        }
    }

    fn index_url_status(&mut self, i: usize) {
        let r = &self.urls[i];
        if r.status == UrlStatus::Unchecked {
            self.unchecked.insert(i);
        } else {
            self.unchecked.remove(&i);
        }
        if r.status == UrlStatus::Filtered && !r.tags_extracted {
            self.pending_tags.insert(i);
        } else {
            self.pending_tags.remove(&i);
        }
    }

    /// Checks type invariants without mutating anything.
    pub(crate) fn validate(&self, record: &Record) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::Invariant(m));
        match record {
            Record::Url(u) => {
                match urlnorm::normalize(&u.url) {
                    Ok(n) if n.url == u.url => {}
                    _ => return bad(format!("url not normalized: {}", u.url)),
                }
                if u.status != UrlStatus::Unchecked && u.last_checked.is_none() {
                    return bad(format!("{}: checked status without last_checked", u.url));
                }
                if let Some(p) = &u.discovered_via {
                    if p.rank == 0 {
                        return bad(format!("{}: rank must start at 1", u.url));
                    }
                }
                if u.status.is_filtered() {
                    self.require_poisoned(&u.url, &u.collapsed_domain)?;
                }
            }
            Record::UrlUpdate(up) => {
                let Some(&i) = self.url_index.get(&up.url) else {
                    return bad(format!("update for unknown url {}", up.url));
                };
                if up.status != UrlStatus::Unchecked && up.last_checked.is_none() {
                    return bad(format!("{}: checked status without last_checked", up.url));
                }
                if up.status.is_filtered() && !self.urls[i].status.is_filtered() {
                    self.require_poisoned(&up.url, &self.urls[i].collapsed_domain)?;
                }
            }
            Record::Tag(t) => {
                if !is_tag_token(&t.tag) {
                    return bad(format!("tag {:?} is not [a-z]{{2,}}", t.tag));
                }
                if !(t.weight.is_finite() && t.weight >= 0.0) {
                    return bad(format!("tag {:?} has weight {}", t.tag, t.weight));
                }
            }
            Record::TagSearched(ts) => {
                if !self
                    .tag_index
                    .contains_key(&(ts.tag.clone(), ts.source_url.clone()))
                {
                    return bad(format!("searched mark for unknown tag {:?}", ts.tag));
                }
            }
            Record::Verdict(v) => {
                if v.expires_at <= v.decided_at {
                    return bad(format!("{}: expires_at not after decided_at", v.collapsed_domain));
                }
                if v.verdict == Verdict::Poisoned
                    && !v.evidence.iter().any(|e| e.is_response() && e.id_matched)
                {
                    return bad(format!(
                        "{}: poisoned verdict without matched response",
                        v.collapsed_domain
                    ));
                }
            }
            Record::Search(s) => {
                if s.result_count as usize != s.results.len() {
                    return bad(format!("search {:?}: result_count mismatch", s.tag));
                }
                for (i, hit) in s.results.iter().enumerate() {
                    if hit.rank as usize != i + 1 {
                        return bad(format!("search {:?}: ranks not 1..n", s.tag));
                    }
                }
            }
            Record::Page(p) => {
                if !self.url_index.contains_key(&p.url) {
                    return bad(format!("page text for unknown url {}", p.url));
                }
            }
            Record::Phase(m) => {
                if m.iteration == 0 {
                    return bad("phase iteration must start at 1".into());
                }
                if let Some(last) = &self.last_phase {
                    if (m.iteration, m.phase) < (last.iteration, last.phase) {
                        return bad(format!(
                            "phase {:?} of iteration {} after {:?} of iteration {}",
                            m.phase, m.iteration, last.phase, last.iteration
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn require_poisoned(&self, url: &str, domain: &str) -> Result<(), StoreError> {
        match self.verdicts.get(domain) {
            Some(v) if v.verdict == Verdict::Poisoned => Ok(()),
            _ => Err(StoreError::Invariant(format!(
                "{url}: marked filtered without a poisoned verdict for {domain}"
            ))),
        }
    }

    /// Whether applying `record` would change state (duplicates would not).
    pub(crate) fn is_duplicate(&self, record: &Record) -> bool {
        match record {
            Record::Url(u) => self.url_index.contains_key(&u.url),
            Record::Tag(t) => self
                .tag_index
                .contains_key(&(t.tag.clone(), t.source_url.clone())),
            _ => false,
        }
    }

    /// Applies a validated record. Replay uses this directly.
    pub(crate) fn apply(&mut self, record: Record) -> Ack {
        if self.is_duplicate(&record) {
            return Ack::AlreadyKnown;
        }
        match record {
            Record::Url(u) => {
                let i = self.urls.len();
                self.url_index.insert(u.url.clone(), i);
                self.urls.push(u);
                self.index_url_status(i);
            }
            Record::UrlUpdate(up) => {
                if let Some(&i) = self.url_index.get(&up.url) {
                    let r = &mut self.urls[i];
                    r.status = up.status;
                    r.last_checked = up.last_checked;
                    r.tags_extracted = up.tags_extracted;
                    self.index_url_status(i);
                }
            }
            Record::Tag(t) => {
                let i = self.tags.len();
                self.tag_index
                    .insert((t.tag.clone(), t.source_url.clone()), i);
                if !t.searched {
                    self.unsearched.insert(i);
                }
                self.tags.push(t);
            }
            Record::TagSearched(ts) => {
                if let Some(&i) = self.tag_index.get(&(ts.tag, ts.source_url)) {
                    self.tags[i].searched = true;
                    self.unsearched.remove(&i);
                }
            }
            Record::Verdict(v) => {
                self.verdicts.insert(v.collapsed_domain.clone(), v);
            }
            Record::Search(s) => {
                if s.error.is_none() {
                    self.searches_by_tag
                        .entry(s.tag.clone())
                        .or_insert(self.searches.len());
                }
                self.searches.push(s);
            }
            Record::Page(p) => {
                self.pages.insert(p.url.clone(), p);
            }
            Record::Phase(m) => {
                self.last_phase = Some(m);
            }
        }
        Ack::Written
    }

    pub fn urls(&self) -> &[UrlRecord] {
        &self.urls
    }

    pub fn tags(&self) -> &[TagRecord] {
        &self.tags
    }

    pub fn searches(&self) -> &[SearchEvent] {
        &self.searches
    }

    pub fn verdicts(&self) -> &BTreeMap<String, DomainVerdict> {
        &self.verdicts
    }

    pub fn pages(&self) -> &BTreeMap<String, PageText> {
        &self.pages
    }

    /// Most recent phase entered by the engine.
    pub fn last_phase(&self) -> Option<&PhaseMark> {
        self.last_phase.as_ref()
    }

    pub fn pending_tag_count(&self) -> usize {
        self.pending_tags.len()
    }

    pub fn unsearched_count(&self) -> usize {
        self.unsearched.len()
    }

    pub fn url(&self, url: &str) -> Option<&UrlRecord> {
        self.url_index.get(url).map(|&i| &self.urls[i])
    }

    pub fn verdict(&self, domain: &str) -> Option<&DomainVerdict> {
        self.verdicts.get(domain)
    }

    pub fn tag(&self, tag: &str, source_url: &str) -> Option<&TagRecord> {
        self.tag_index
            .get(&(tag.to_string(), source_url.to_string()))
            .map(|&i| &self.tags[i])
    }

    /// First successful search event recorded for this tag string, if any.
    pub fn search_for_tag(&self, tag: &str) -> Option<&SearchEvent> {
        self.searches_by_tag.get(tag).map(|&i| &self.searches[i])
    }

    pub fn unchecked_urls(&self, limit: usize) -> Vec<UrlRecord> {
        self.unchecked
            .iter()
            .take(limit)
            .map(|&i| self.urls[i].clone())
            .collect()
    }

    pub fn unchecked_count(&self) -> usize {
        self.unchecked.len()
    }

    /// Filtered URLs whose landing page has not yet been mined for tags.
    pub fn pending_tag_urls(&self, limit: usize) -> Vec<UrlRecord> {
        self.pending_tags
            .iter()
            .take(limit)
            .map(|&i| self.urls[i].clone())
            .collect()
    }

    pub fn unsearched_tags(&self, limit: usize) -> Vec<TagRecord> {
        self.unsearched
            .iter()
            .take(limit)
            .map(|&i| self.tags[i].clone())
            .collect()
    }
}
