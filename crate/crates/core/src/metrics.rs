//! Hit rates, discovery power and CSV reports, all recomputed from the store.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dnsprobe::Verdict;
use crate::store::{counts_of, Counts, StoreState, UrlStatus};
use crate::urlnorm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub urls_crawled: u64,
    pub domains_crawled: u64,
    pub filtered_urls: u64,
    pub poisoned_domains: u64,
    pub filtered_per_1000_urls: f64,
    pub poisoned_per_1000_domains: f64,
}

/// `1000 * part / whole` rounded to 2 decimals; 0 when `whole` is 0.
pub fn per_thousand(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    (100_000.0 * part as f64 / whole as f64).round() / 100.0
}

impl RunMetrics {
    pub fn from_counts(c: Counts) -> Self {
        Self {
            urls_crawled: c.urls_crawled,
            domains_crawled: c.domains_crawled,
            filtered_urls: c.filtered_urls,
            poisoned_domains: c.poisoned_domains,
            filtered_per_1000_urls: per_thousand(c.filtered_urls, c.urls_crawled),
            poisoned_per_1000_domains: per_thousand(c.poisoned_domains, c.domains_crawled),
        }
    }
}

pub fn compute_run_metrics(state: &StoreState) -> RunMetrics {
    RunMetrics::from_counts(counts_of(state))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryPower {
    pub base_domain: String,
    /// Tags from this domain whose searches returned at least one filtered
    /// URL on another domain.
    pub productive_tags: u64,
    /// All distinct tags extracted from this domain's pages.
    pub tags_used: u64,
    /// Distinct filtered URLs on other domains first surfaced by this
    /// domain's tags.
    pub discovered_filtered_urls: u64,
    pub crawled_urls_of_base: u64,
}

/// One row per poisoned domain, ordered by discovered URLs descending, then
/// domain name. Self-discovery never counts.
pub fn compute_discovery_power(state: &StoreState) -> Vec<DiscoveryPower> {
    let mut tags_of: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for t in state.tags() {
        tags_of.entry(t.source_domain.as_str()).or_default().insert(t.tag.as_str());
    }
    // Filtered URLs returned by each tag string, with their domains.
    let mut hits_of: HashMap<&str, HashSet<&str>> = HashMap::new();
    for ev in state.searches().iter().filter(|e| e.error.is_none()) {
        let domains = hits_of.entry(ev.tag.as_str()).or_default();
        for hit in &ev.results {
            let Ok(n) = urlnorm::normalize(&hit.url) else {
                continue;
            };
            if let Some(u) = state.url(&n.url) {
                if u.status.is_filtered() {
                    domains.insert(u.collapsed_domain.as_str());
                }
            }
        }
    }
    let mut discovered: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut crawled: HashMap<&str, u64> = HashMap::new();
    for u in state.urls() {
        if u.status != UrlStatus::Unchecked {
            *crawled.entry(u.collapsed_domain.as_str()).or_default() += 1;
        }
        if let Some(p) = &u.discovered_via {
            if u.status.is_filtered() && p.base_domain != u.collapsed_domain {
                discovered
                    .entry(p.base_domain.as_str())
                    .or_default()
                    .insert(u.url.as_str());
            }
        }
    }
    let mut rows: Vec<DiscoveryPower> = state
        .verdicts()
        .values()
        .filter(|v| v.verdict == Verdict::Poisoned)
        .map(|v| {
            let base = v.collapsed_domain.as_str();
            let tags = tags_of.get(base);
            let productive = tags.map_or(0, |ts| {
                ts.iter()
                    .filter(|t| {
                        hits_of
                            .get(*t)
                            .is_some_and(|ds| ds.iter().any(|d| *d != base))
                    })
                    .count()
            });
            DiscoveryPower {
                base_domain: base.to_string(),
                productive_tags: productive as u64,
                tags_used: tags.map_or(0, |t| t.len() as u64),
                discovered_filtered_urls: discovered.get(base).map_or(0, |s| s.len() as u64),
                crawled_urls_of_base: crawled.get(base).copied().unwrap_or(0),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.discovered_filtered_urls
            .cmp(&a.discovered_filtered_urls)
            .then_with(|| a.base_domain.cmp(&b.base_domain))
    });
    rows
}

/// Popular-domain ranking used to hide well-known sites from a report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExclusionList {
    domains: HashSet<String>,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("exclusion list line {line}: {message}")]
    BadExclusion { line: u64, message: String },
    #[error("report kind {0} needs an exclusion list")]
    MissingExclusion(ReportKind),
    #[error("unknown report kind {0:?}")]
    UnknownKind(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExclusionList {
    /// Parses `rank,domain` rows and keeps those ranked `top_n` or better.
    /// A header row is allowed.
    pub fn parse(text: &str, top_n: u64) -> Result<Self, MetricsError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut domains = HashSet::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let line = row.position().map_or(i as u64 + 1, |p| p.line());
            if row.len() < 2 {
                return Err(MetricsError::BadExclusion {
                    line,
                    message: "expected rank,domain".into(),
                });
            }
            let rank: u64 = match row[0].parse() {
                Ok(r) => r,
                Err(_) if i == 0 => continue,
                Err(_) => {
                    return Err(MetricsError::BadExclusion {
                        line,
                        message: format!("rank {:?} is not a number", &row[0]),
                    })
                }
            };
            if rank <= top_n {
                domains.insert(row[1].trim_end_matches('.').to_ascii_lowercase());
            }
        }
        Ok(Self { domains })
    }

    pub fn load(path: &Path, top_n: u64) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, top_n)
    }

    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    /// True for a listed domain or any subdomain of one.
    pub fn contains(&self, domain: &str) -> bool {
        let mut d = domain;
        loop {
            if self.domains.contains(d) {
                return true;
            }
            match d.split_once('.') {
                Some((_, rest)) if !rest.is_empty() => d = rest,
                _ => return false,
            }
        }
    }
}

/// Filtered URL count per collapsed domain, count descending then name.
pub fn top_domains(state: &StoreState, exclude: Option<&ExclusionList>) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for u in state.urls().iter().filter(|u| u.status.is_filtered()) {
        if exclude.is_some_and(|x| x.contains(&u.collapsed_domain)) {
            continue;
        }
        *counts.entry(u.collapsed_domain.as_str()).or_default() += 1;
    }
    sorted_counts(counts)
}

/// For every tag ever extracted, the number of fetched filtered pages whose
/// text contains it.
pub fn tag_frequencies(state: &StoreState) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = state.tags().iter().map(|t| (t.tag.as_str(), 0)).collect();
    for page in state.pages().values() {
        let filtered = state
            .url(&page.url)
            .is_some_and(|u| u.status == UrlStatus::Filtered);
        if !filtered {
            continue;
        }
        let tokens: HashSet<&str> = page.tokens.iter().map(String::as_str).collect();
        for (tag, n) in counts.iter_mut() {
            if tokens.contains(tag) {
                *n += 1;
            }
        }
    }
    sorted_counts(counts)
}

fn sorted_counts(counts: BTreeMap<&str, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = counts.into_iter().map(|(k, n)| (k.to_string(), n)).collect();
    // BTreeMap order is already by name; a stable sort keeps it for ties.
    v.sort_by_key(|e| std::cmp::Reverse(e.1));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Summary,
    TopDomains,
    TopDomainsExcludingList,
    TopTags,
    DiscoveryPower,
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] = [
        ReportKind::Summary,
        ReportKind::TopDomains,
        ReportKind::TopDomainsExcludingList,
        ReportKind::TopTags,
        ReportKind::DiscoveryPower,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Summary => "summary",
            ReportKind::TopDomains => "top_domains",
            ReportKind::TopDomainsExcludingList => "top_domains_excluding_list",
            ReportKind::TopTags => "top_tags",
            ReportKind::DiscoveryPower => "discovery_power",
        }
    }
}

impl std::fmt::Display for ReportKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(MetricsError::UnknownKind(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub urls_crawled: u64,
    pub domains_crawled: u64,
    pub filtered_urls: u64,
    pub poisoned_domains: u64,
    pub filtered_per_1000_urls: String,
    pub poisoned_per_1000_domains: String,
}

impl From<RunMetrics> for SummaryRow {
    fn from(m: RunMetrics) -> Self {
        Self {
            urls_crawled: m.urls_crawled,
            domains_crawled: m.domains_crawled,
            filtered_urls: m.filtered_urls,
            poisoned_domains: m.poisoned_domains,
            filtered_per_1000_urls: format!("{:.2}", m.filtered_per_1000_urls),
            poisoned_per_1000_domains: format!("{:.2}", m.poisoned_per_1000_domains),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainRow {
    pub domain: String,
    pub filtered_urls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRow {
    pub tag: String,
    pub filtered_pages: u64,
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<String, MetricsError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Renders one report as CSV with a header row. `limit` caps the number of
/// data rows for the ranked kinds.
pub fn report(
    state: &StoreState,
    kind: ReportKind,
    exclude: Option<&ExclusionList>,
    limit: Option<usize>,
) -> Result<String, MetricsError> {
    let cap = limit.unwrap_or(usize::MAX);
    match kind {
        ReportKind::Summary => to_csv(
            [SummaryRow::from(compute_run_metrics(state))],
            &[
                "urls_crawled",
                "domains_crawled",
                "filtered_urls",
                "poisoned_domains",
                "filtered_per_1000_urls",
                "poisoned_per_1000_domains",
            ],
        ),
        ReportKind::TopDomains | ReportKind::TopDomainsExcludingList => {
            let exclude = match kind {
                ReportKind::TopDomainsExcludingList => {
                    Some(exclude.ok_or(MetricsError::MissingExclusion(kind))?)
                }
                _ => None,
            };
            to_csv(
                top_domains(state, exclude)
                    .into_iter()
                    .take(cap)
                    .map(|(domain, filtered_urls)| DomainRow {
                        domain,
                        filtered_urls,
                    }),
                &["domain", "filtered_urls"],
            )
        }
        ReportKind::TopTags => to_csv(
            tag_frequencies(state)
                .into_iter()
                .take(cap)
                .map(|(tag, filtered_pages)| TagRow { tag, filtered_pages }),
            &["tag", "filtered_pages"],
        ),
        ReportKind::DiscoveryPower => to_csv(
            compute_discovery_power(state).into_iter().take(cap),
            &[
                "base_domain",
                "productive_tags",
                "tags_used",
                "discovered_filtered_urls",
                "crawled_urls_of_base",
            ],
        ),
    }
}

/// Domain category lookup, for plugging in an external classifier.
pub trait DomainCategorizer {
    fn categorize(&self, domain: &str) -> Vec<String>;
}
