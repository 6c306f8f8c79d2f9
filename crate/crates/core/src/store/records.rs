use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::dnsprobe::{ProbeResult, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UrlStatus {
    Unchecked,
    /// Domain poisoned; landing page pending or fetched.
    Filtered,
    Unfiltered,
    /// Domain poisoned but the landing page could not be retrieved.
    FetchFailed,
}

impl UrlStatus {
    /// Filtered for counting purposes, whether or not the fetch succeeded.
    pub fn is_filtered(self) -> bool {
        matches!(self, UrlStatus::Filtered | UrlStatus::FetchFailed)
    }
}

/// Which search surfaced a URL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub tag: String,
    /// Collapsed domain of the page the tag was extracted from.
    pub base_domain: String,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlRecord {
    pub url: String,
    pub domain: String,
    pub collapsed_domain: String,
    pub status: UrlStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discovered_via: Option<Provenance>,
    pub first_seen: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_checked: Option<DateTime<Utc>>,
    pub tags_extracted: bool,
}

impl UrlRecord {
    pub fn is_seed(&self) -> bool {
        self.discovered_via.is_none()
    }
}

/// State change for an existing URL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrlUpdate {
    pub url: String,
    pub status: UrlStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_checked: Option<DateTime<Utc>>,
    pub tags_extracted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRecord {
    pub tag: String,
    pub source_url: String,
    pub source_domain: String,
    pub weight: f64,
    pub searched: bool,
    pub created: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSearched {
    pub tag: String,
    pub source_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainVerdict {
    pub collapsed_domain: String,
    pub verdict: Verdict,
    pub evidence: Vec<ProbeResult>,
    pub decided_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

impl DomainVerdict {
    pub fn is_expired(&self, now: DateTime<Utc>) -> bool {
        now >= self.expires_at
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: u32,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchEvent {
    pub tag: String,
    pub backend: String,
    pub queried_at: DateTime<Utc>,
    pub results: Vec<SearchHit>,
    pub result_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SearchEvent {
    pub fn from_urls(
        tag: &str,
        backend: &str,
        urls: impl IntoIterator<Item = String>,
        error: Option<String>,
    ) -> Self {
        let results: Vec<SearchHit> = urls
            .into_iter()
            .enumerate()
            .map(|(i, url)| SearchHit {
                rank: i as u32 + 1,
                url,
            })
            .collect();
        Self {
            tag: tag.to_string(),
            backend: backend.to_string(),
            queried_at: Utc::now(),
            result_count: results.len() as u32,
            results,
            error,
        }
    }

    pub fn failed(tag: &str, backend: &str, error: impl Into<String>) -> Self {
        Self::from_urls(tag, backend, Vec::new(), Some(error.into()))
    }
}

/// Cleaned text of a fetched filtered page, kept as its distinct tokens for
/// after-the-fact tag frequency scans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageText {
    pub url: String,
    pub fetched_at: DateTime<Utc>,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Probe,
    Tag,
    Search,
}

/// Written when the engine enters a phase, so a restart resumes there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMark {
    pub iteration: u32,
    pub phase: Phase,
    pub at: DateTime<Utc>,
}

/// One journal line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Record {
    Url(UrlRecord),
    UrlUpdate(UrlUpdate),
    Tag(TagRecord),
    TagSearched(TagSearched),
    Verdict(DomainVerdict),
    Search(SearchEvent),
    Page(PageText),
    Phase(PhaseMark),
}

impl From<UrlRecord> for Record {
    fn from(r: UrlRecord) -> Self {
        Record::Url(r)
    }
}

impl From<UrlUpdate> for Record {
    fn from(r: UrlUpdate) -> Self {
        Record::UrlUpdate(r)
    }
}

impl From<TagRecord> for Record {
    fn from(r: TagRecord) -> Self {
        Record::Tag(r)
    }
}

impl From<TagSearched> for Record {
    fn from(r: TagSearched) -> Self {
        Record::TagSearched(r)
    }
}

impl From<DomainVerdict> for Record {
    fn from(r: DomainVerdict) -> Self {
        Record::Verdict(r)
    }
}

impl From<SearchEvent> for Record {
    fn from(r: SearchEvent) -> Self {
        Record::Search(r)
    }
}

impl From<PageText> for Record {
    fn from(r: PageText) -> Self {
        Record::Page(r)
    }
}

impl From<PhaseMark> for Record {
    fn from(r: PhaseMark) -> Self {
        Record::Phase(r)
    }
}
