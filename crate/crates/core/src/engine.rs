//! The recursive discovery loop.
//!
//! Each iteration runs three phases over incremental frontiers kept by the
//! store: probe the domains of unchecked URLs, extract tags from newly
//! filtered pages, and search for unsearched tags. Entering a phase is
//! journaled, so a killed run picks up in the phase it was in and finishes
//! with the same store contents (timestamps aside) as an uninterrupted one.
//!
//! Work inside a phase runs concurrently, but results are appended in
//! frontier order, so the journal is independent of network timing.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use chrono::Utc;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info, warn};

use crate::dnsprobe::{ProbeError, ProbeOutcome, Prober, Verdict};
use crate::fetch::{FetchResult, Fetcher};
use crate::metrics::{compute_run_metrics, RunMetrics};
use crate::search::{self, SearchBackend, DEFAULT_RESULTS_PER_SEARCH};
use crate::store::{
    Ack, DomainVerdict, PageText, Phase, PhaseMark, Provenance, Record, Store, StoreError,
    StoreState, TagRecord, TagSearched, UrlRecord, UrlStatus, UrlUpdate,
};
use crate::textproc::{self, CorpusModel, DEFAULT_TAGS_PER_PAGE};
use crate::urlnorm;

/// All subdomains of `suffix` count as the single domain `suffix`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollapseRule {
    pub suffix: String,
}

impl CollapseRule {
    pub fn new(suffix: &str) -> Self {
        Self {
            suffix: suffix.trim().trim_matches('.').to_ascii_lowercase(),
        }
    }

    fn matches(&self, host: &str) -> bool {
        !self.suffix.is_empty()
            && (host == self.suffix
                || host
                    .strip_suffix(self.suffix.as_str())
                    .is_some_and(|p| p.ends_with('.')))
    }
}

/// Applies the broadest matching rule; idempotent.
pub fn collapse_domain(host: &str, rules: &[CollapseRule]) -> String {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    rules
        .iter()
        .filter(|r| r.matches(&host))
        .min_by(|a, b| a.suffix.len().cmp(&b.suffix.len()).then(a.suffix.cmp(&b.suffix)))
        .map_or(host.clone(), |r| r.suffix.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    SearchQueries,
    Iterations,
    Urls,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// All frontiers empty and no verdict due for a re-check.
    Fixpoint,
    /// A full iteration wrote nothing although work remains (for instance
    /// every probe hit a socket error).
    Stalled,
    Budget(BudgetKind),
    /// The search backend failed; state is persisted and the failed tag is
    /// retried on the next run.
    BackendFailure(String),
}

/// Budgets apply to the whole store, not to one invocation, so a resumed
/// run stops where the uninterrupted one would have.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Budgets {
    pub max_search_queries: Option<u64>,
    pub max_iterations: Option<u32>,
    pub max_urls: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tags_per_page: usize,
    pub results_per_search: usize,
    pub verdict_ttl: Duration,
    pub budgets: Budgets,
    pub collapse_rules: Vec<CollapseRule>,
    /// Drop search results whose domain is already in the store.
    pub skip_known_domains: bool,
    /// Frontier records handled per journal batch.
    pub batch_size: usize,
    /// Concurrent probes, fetches or searches within a batch.
    pub concurrency: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tags_per_page: DEFAULT_TAGS_PER_PAGE,
            results_per_search: DEFAULT_RESULTS_PER_SEARCH,
            verdict_ttl: Duration::from_secs(7 * 24 * 3600),
            budgets: Budgets::default(),
            collapse_rules: Vec::new(),
            skip_known_domains: false,
            batch_size: 64,
            concurrency: 16,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.tags_per_page == 0 {
            return bad("tags_per_page must be at least 1");
        }
        if self.results_per_search == 0 {
            return bad("results_per_search must be at least 1");
        }
        if self.verdict_ttl.is_zero() {
            return bad("verdict_ttl must be positive");
        }
        if chrono::Duration::from_std(self.verdict_ttl).is_err() {
            return bad("verdict_ttl is too large");
        }
        if self.batch_size == 0 || self.concurrency == 0 {
            return bad("batch_size and concurrency must be at least 1");
        }
        if self.budgets.max_iterations == Some(0) {
            return bad("max_iterations must be at least 1");
        }
        if self.budgets.max_urls == Some(0) {
            return bad("max_urls must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("no valid seed URLs in {0}")]
    NoSeeds(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Poisoning check for one collapsed domain.
#[async_trait]
pub trait DomainChecker: Send + Sync {
    async fn check(&self, domain: &str) -> Result<ProbeOutcome, ProbeError>;
}

#[async_trait]
impl DomainChecker for Prober {
    async fn check(&self, domain: &str) -> Result<ProbeOutcome, ProbeError> {
        self.probe_domain(domain).await
    }
}

/// Landing-page retrieval.
#[async_trait]
pub trait PageSource: Send + Sync {
    async fn get(&self, url: &str) -> FetchResult;
}

#[async_trait]
impl PageSource for Fetcher {
    async fn get(&self, url: &str) -> FetchResult {
        self.fetch(url).await
    }
}

/// Everything the loop talks to besides the store.
pub struct Components<'a> {
    pub checker: &'a dyn DomainChecker,
    pub pages: &'a dyn PageSource,
    pub search: &'a dyn SearchBackend,
    pub model: &'a CorpusModel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IterationStats {
    pub iteration: u32,
    pub domains_probed: usize,
    pub urls_checked: usize,
    pub urls_filtered: usize,
    pub pages_fetched: usize,
    pub fetch_failures: usize,
    pub tags_added: usize,
    pub searches_issued: usize,
    pub urls_discovered: usize,
    /// Journal records written, phase marks excluded.
    pub records_written: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub stop: StopReason,
    /// Last iteration that ran at least one phase.
    pub iterations: u32,
    pub history: Vec<IterationStats>,
    pub metrics: RunMetrics,
}

/// Parses a seed list: one URL per line, `#` lines are comments. Malformed
/// lines are logged and skipped; duplicates after normalization collapse.
pub fn parse_seeds(text: &str, rules: &[CollapseRule]) -> Vec<UrlRecord> {
    let now = Utc::now();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match urlnorm::normalize(line) {
            Ok(n) => {
                if seen.insert(n.url.clone()) {
                    out.push(UrlRecord {
                        collapsed_domain: collapse_domain(&n.host, rules),
                        domain: n.host,
                        url: n.url,
                        status: UrlStatus::Unchecked,
                        discovered_via: None,
                        first_seen: now,
                        last_checked: None,
                        tags_extracted: false,
                    });
                }
            }
            Err(e) => warn!(line = i + 1, text = line, error = %e, "skipping seed"),
        }
    }
    out
}

pub fn load_seeds(path: &Path, rules: &[CollapseRule]) -> Result<Vec<UrlRecord>, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|source| EngineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let seeds = parse_seeds(&text, rules);
    if seeds.is_empty() {
        return Err(EngineError::NoSeeds(path.display().to_string()));
    }
    Ok(seeds)
}

/// Inserts seeds not already in the store; returns how many were new.
pub fn add_seeds(store: &mut Store, seeds: Vec<UrlRecord>) -> Result<usize, EngineError> {
    let acks = store.append_batch(seeds.into_iter().map(Record::from))?;
    Ok(acks.iter().filter(|a| **a == Ack::Written).count())
}

fn is_fixpoint(state: &StoreState) -> bool {
    let now = Utc::now();
    state.unchecked_count() == 0
        && state.pending_tag_count() == 0
        && state.unsearched_count() == 0
        && !state.verdicts().values().any(|v| v.is_expired(now))
}

const PHASES: [Phase; 3] = [Phase::Probe, Phase::Tag, Phase::Search];

/// Runs the loop until a fixpoint, a budget, a stall or a backend failure.
pub async fn run_loop(
    store: &mut Store,
    parts: &Components<'_>,
    config: &RunConfig,
) -> Result<RunReport, EngineError> {
    config.validate()?;
    let (mut iteration, mut start) = match store.state().last_phase() {
        Some(m) => (m.iteration, m.phase),
        None => (1, Phase::Probe),
    };
    let mut resumed_mark = store.state().last_phase().is_some();
    if resumed_mark {
        info!(iteration, phase = ?start, "resuming");
    }
    let mut run = Run {
        store,
        parts,
        config,
    };
    let mut history = Vec::new();
    let mut last_entered = iteration.saturating_sub(1);
    let stop = 'outer: loop {
        // A resumed Probe mark means these checks already passed.
        if start == Phase::Probe && !resumed_mark {
            if config.budgets.max_iterations.is_some_and(|m| iteration > m) {
                break StopReason::Budget(BudgetKind::Iterations);
            }
            if is_fixpoint(run.store.state()) {
                break StopReason::Fixpoint;
            }
        }
        let mut stats = IterationStats {
            iteration,
            ..Default::default()
        };
        last_entered = iteration;
        let whole_iteration = start == Phase::Probe;
        for phase in PHASES.into_iter().skip_while(|p| *p != start) {
            if !resumed_mark {
                run.store.append(PhaseMark {
                    iteration,
                    phase,
                    at: Utc::now(),
                })?;
            }
            resumed_mark = false;
            info!(iteration, ?phase, "phase");
            let outcome = match phase {
                Phase::Probe => run.probe_phase(&mut stats).await.map(|_| None),
                Phase::Tag => run.tag_phase(&mut stats).await.map(|_| None),
                Phase::Search => run.search_phase(&mut stats).await,
            }?;
            if let Some(stop) = outcome {
                history.push(stats);
                break 'outer stop;
            }
        }
        info!(
            iteration,
            probed = stats.domains_probed,
            filtered = stats.urls_filtered,
            tags = stats.tags_added,
            searches = stats.searches_issued,
            discovered = stats.urls_discovered,
            "iteration done"
        );
        let idle = stats.records_written == 0;
        history.push(stats);
        // The resumed tail of an iteration may legitimately have nothing left.
        if idle && whole_iteration && !is_fixpoint(run.store.state()) {
            break StopReason::Stalled;
        }
        iteration += 1;
        start = Phase::Probe;
    };
    info!(?stop, iterations = last_entered, "run stopped");
    Ok(RunReport {
        stop,
        iterations: last_entered,
        history,
        metrics: compute_run_metrics(run.store.state()),
    })
}

struct Run<'s, 'c> {
    store: &'s mut Store,
    parts: &'c Components<'c>,
    config: &'c RunConfig,
}

impl Run<'_, '_> {
    fn append(&mut self, records: Vec<Record>, stats: &mut IterationStats) -> Result<(), StoreError> {
        if records.is_empty() {
            return Ok(());
        }
        let acks = self.store.append_batch(records)?;
        stats.records_written += acks.iter().filter(|a| **a == Ack::Written).count() as u64;
        Ok(())
    }

    fn verdict_record(&self, domain: &str, outcome: ProbeOutcome) -> DomainVerdict {
        let now = Utc::now();
        let ttl = chrono::Duration::from_std(self.config.verdict_ttl).expect("validated");
        DomainVerdict {
            collapsed_domain: domain.to_string(),
            verdict: outcome.verdict,
            evidence: outcome.evidence,
            decided_at: now,
            expires_at: now + ttl,
        }
    }

    async fn probe_many(&self, domains: Vec<String>) -> Vec<(String, Result<ProbeOutcome, ProbeError>)> {
        let checker = self.parts.checker;
        stream::iter(domains)
            .map(|d| async move {
                let r = checker.check(&d).await;
                (d, r)
            })
            .buffered(self.config.concurrency)
            .collect()
            .await
    }

    async fn probe_phase(&mut self, stats: &mut IterationStats) -> Result<(), EngineError> {
        self.recheck_expired(stats).await?;
        let frontier = self.store.state().unchecked_urls(usize::MAX);
        for chunk in frontier.chunks(self.config.batch_size) {
            let now = Utc::now();
            let mut seen = HashSet::new();
            let to_probe: Vec<String> = chunk
                .iter()
                .map(|u| u.collapsed_domain.as_str())
                .filter(|d| seen.insert(*d))
                .filter(|d| self.store.state().verdict(d).is_none_or(|v| v.is_expired(now)))
                .map(str::to_string)
                .collect();
            stats.domains_probed += to_probe.len();
            let mut records: Vec<Record> = Vec::new();
            let mut unprobeable = HashSet::new();
            let mut retry_later = HashSet::new();
            for (domain, result) in self.probe_many(to_probe).await {
                match result {
                    Ok(outcome) => {
                        debug!(%domain, verdict = ?outcome.verdict, "probed");
                        records.push(self.verdict_record(&domain, outcome).into());
                    }
                    Err(ProbeError::InvalidDomain(e)) => {
                        warn!(%domain, error = %e, "cannot probe, marking unfiltered");
                        unprobeable.insert(domain);
                    }
                    Err(e) => {
                        warn!(%domain, error = %e, "probe failed, will retry");
                        retry_later.insert(domain);
                    }
                }
            }
            self.append(records, stats)?;
            let mut updates: Vec<Record> = Vec::new();
            let checked_at = Utc::now();
            for u in chunk {
                if retry_later.contains(&u.collapsed_domain) {
                    continue;
                }
                let poisoned = !unprobeable.contains(&u.collapsed_domain)
                    && self
                        .store
                        .state()
                        .verdict(&u.collapsed_domain)
                        .is_some_and(|v| v.verdict == Verdict::Poisoned);
                stats.urls_checked += 1;
                if poisoned {
                    stats.urls_filtered += 1;
                }
                updates.push(
                    UrlUpdate {
                        url: u.url.clone(),
                        status: if poisoned {
                            UrlStatus::Filtered
                        } else {
                            UrlStatus::Unfiltered
                        },
                        last_checked: Some(checked_at),
                        tags_extracted: false,
                    }
                    .into(),
                );
            }
            self.append(updates, stats)?;
        }
        Ok(())
    }

    /// Re-probes domains whose verdict has expired and moves their checked
    /// URLs to the new status. Re-confirmed filtered pages are queued for a
    /// fresh tag extraction.
    async fn recheck_expired(&mut self, stats: &mut IterationStats) -> Result<(), EngineError> {
        let now = Utc::now();
        let expired: Vec<String> = self
            .store
            .state()
            .verdicts()
            .values()
            .filter(|v| v.is_expired(now))
            .map(|v| v.collapsed_domain.clone())
            .collect();
        if expired.is_empty() {
            return Ok(());
        }
        info!(domains = expired.len(), "re-checking expired verdicts");
        stats.domains_probed += expired.len();
        let expired_set: HashSet<&str> = expired.iter().map(String::as_str).collect();
        let mut checked: HashMap<String, Vec<UrlRecord>> = HashMap::new();
        for u in self.store.state().urls() {
            if u.status != UrlStatus::Unchecked && expired_set.contains(u.collapsed_domain.as_str()) {
                checked.entry(u.collapsed_domain.clone()).or_default().push(u.clone());
            }
        }
        for (domain, result) in self.probe_many(expired.clone()).await {
            let outcome = match result {
                Ok(o) => o,
                Err(e) => {
                    warn!(%domain, error = %e, "re-check failed, keeping old verdict");
                    continue;
                }
            };
            let poisoned = outcome.verdict == Verdict::Poisoned;
            let mut records: Vec<Record> = vec![self.verdict_record(&domain, outcome).into()];
            let checked_at = Utc::now();
            for u in checked.remove(&domain).unwrap_or_default() {
                let (status, tags_extracted) = if poisoned {
                    (UrlStatus::Filtered, false)
                } else {
                    (UrlStatus::Unfiltered, u.tags_extracted)
                };
                if !poisoned && u.status == UrlStatus::Unfiltered {
                    continue;
                }
                records.push(
                    UrlUpdate {
                        url: u.url,
                        status,
                        last_checked: Some(checked_at),
                        tags_extracted,
                    }
                    .into(),
                );
            }
            self.append(records, stats)?;
        }
        Ok(())
    }

    async fn tag_phase(&mut self, stats: &mut IterationStats) -> Result<(), EngineError> {
        let frontier = self.store.state().pending_tag_urls(usize::MAX);
        let pages = self.parts.pages;
        for chunk in frontier.chunks(self.config.batch_size) {
            let fetched: Vec<FetchResult> = stream::iter(chunk)
                .map(|u| pages.get(&u.url))
                .buffered(self.config.concurrency)
                .collect()
                .await;
            for (u, page) in chunk.iter().zip(fetched) {
                let mut records: Vec<Record> = Vec::new();
                let body = page.body.as_deref().filter(|_| page.is_ok());
                let status = match body {
                    Some(body) => {
                        stats.pages_fetched += 1;
                        let doc = textproc::strip_html(body, page.charset.as_deref())
                            .with_source(u.url.clone());
                        let tags = textproc::extract_tags(&doc, self.parts.model, self.config.tags_per_page);
                        debug!(url = %u.url, tags = ?tags.iter().map(|t| &t.tag).collect::<Vec<_>>(), "extracted");
                        records.push(
                            PageText {
                                url: u.url.clone(),
                                fetched_at: page.fetched_at,
                                tokens: doc.distinct_tokens(),
                            }
                            .into(),
                        );
                        let created = Utc::now();
                        for t in tags {
                            if self.store.state().tag(&t.tag, &u.url).is_none() {
                                stats.tags_added += 1;
                            }
                            records.push(
                                TagRecord {
                                    tag: t.tag,
                                    source_url: u.url.clone(),
                                    source_domain: u.collapsed_domain.clone(),
                                    weight: t.weight,
                                    searched: false,
                                    created,
                                }
                                .into(),
                            );
                        }
                        UrlStatus::Filtered
                    }
                    None => {
                        stats.fetch_failures += 1;
                        warn!(url = %u.url, outcome = ?page.outcome, "fetch failed");
                        UrlStatus::FetchFailed
                    }
                };
                records.push(
                    UrlUpdate {
                        url: u.url.clone(),
                        status,
                        last_checked: u.last_checked,
                        tags_extracted: status == UrlStatus::Filtered,
                    }
                    .into(),
                );
                self.append(records, stats)?;
            }
        }
        Ok(())
    }

    async fn search_phase(&mut self, stats: &mut IterationStats) -> Result<Option<StopReason>, EngineError> {
        let frontier = self.store.state().unsearched_tags(usize::MAX);
        let rules = &self.config.collapse_rules;
        let mut known_domains: Option<HashSet<String>> = self.config.skip_known_domains.then(|| {
            self.store
                .state()
                .urls()
                .iter()
                .map(|u| u.collapsed_domain.clone())
                .collect()
        });
        for chunk in frontier.chunks(self.config.batch_size) {
            // Tag strings already searched successfully are answered from
            // the journal instead of the backend.
            let mut seen = HashSet::new();
            let mut needed: Vec<String> = chunk
                .iter()
                .filter(|t| self.store.state().search_for_tag(&t.tag).is_none())
                .filter(|t| seen.insert(t.tag.as_str()))
                .map(|t| t.tag.clone())
                .collect();
            if let Some(max) = self.config.budgets.max_search_queries {
                let used = self.store.state().searches().len() as u64;
                needed.truncate(max.saturating_sub(used) as usize);
            }
            let backend = self.parts.search;
            let rps = self.config.results_per_search;
            let events: Vec<_> = stream::iter(needed)
                .map(|tag| async move { search::query(backend, &tag, rps).await })
                .buffered(self.config.concurrency)
                .collect()
                .await;
            stats.searches_issued += events.len();
            let mut failure = None;
            let mut records: Vec<Record> = Vec::new();
            for ev in events {
                if let Some(e) = &ev.error {
                    warn!(tag = %ev.tag, error = %e, "search failed");
                    failure = Some(format!("search for {:?} failed: {e}", ev.tag));
                    records.push(ev.into());
                    break;
                }
                records.push(ev.into());
            }
            self.append(records, stats)?;

            for t in chunk {
                let Some(ev) = self.store.state().search_for_tag(&t.tag).cloned() else {
                    return Ok(Some(match failure {
                        Some(f) => StopReason::BackendFailure(f),
                        None => StopReason::Budget(BudgetKind::SearchQueries),
                    }));
                };
                let mut records: Vec<Record> = Vec::new();
                let mut batch_urls = HashSet::new();
                let mut new_domains = Vec::new();
                let first_seen = Utc::now();
                for hit in &ev.results {
                    let n = match urlnorm::normalize(&hit.url) {
                        Ok(n) => n,
                        Err(e) => {
                            debug!(url = %hit.url, error = %e, "ignoring search result");
                            continue;
                        }
                    };
                    if self.store.state().url(&n.url).is_some() || !batch_urls.insert(n.url.clone()) {
                        continue;
                    }
                    let collapsed = collapse_domain(&n.host, rules);
                    if known_domains.as_ref().is_some_and(|k| k.contains(&collapsed)) {
                        continue;
                    }
                    if let Some(max) = self.config.budgets.max_urls {
                        if self.store.state().urls().len() + records.len() >= max {
                            stats.urls_discovered += records.len();
                            self.append(records, stats)?;
                            return Ok(Some(StopReason::Budget(BudgetKind::Urls)));
                        }
                    }
                    new_domains.push(collapsed.clone());
                    records.push(
                        UrlRecord {
                            url: n.url,
                            domain: n.host,
                            collapsed_domain: collapsed,
                            status: UrlStatus::Unchecked,
                            discovered_via: Some(Provenance {
                                tag: t.tag.clone(),
                                base_domain: t.source_domain.clone(),
                                rank: hit.rank,
                            }),
                            first_seen,
                            last_checked: None,
                            tags_extracted: false,
                        }
                        .into(),
                    );
                }
                stats.urls_discovered += records.len();
                if let Some(k) = known_domains.as_mut() {
                    k.extend(new_domains);
                }
                records.push(
                    TagSearched {
                        tag: t.tag.clone(),
                        source_url: t.source_url.clone(),
                    }
                    .into(),
                );
                self.append(records, stats)?;
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(s: &[&str]) -> Vec<CollapseRule> {
        s.iter().map(|r| CollapseRule::new(r)).collect()
    }

    #[test]
    fn collapse_examples() {
        let r = rules(&["tumblr.com"]);
        assert_eq!(collapse_domain("alice.tumblr.com", &r), "tumblr.com");
        assert_eq!(collapse_domain("example.org", &r), "example.org");
        assert_eq!(collapse_domain("nottumblr.com", &r), "nottumblr.com");
        assert_eq!(collapse_domain("tumblr.com", &r), "tumblr.com");
    }

    #[test]
    fn broadest_rule_wins() {
        let r = rules(&["a.blog.example", "blog.example"]);
        assert_eq!(collapse_domain("x.a.blog.example", &r), "blog.example");
    }

    #[test]
    fn collapse_is_idempotent() {
        let r = rules(&["tumblr.com", "blogspot.com", "b.blogspot.com"]);
        for h in ["a.b.blogspot.com", "x.tumblr.com", "plain.org", "blogspot.com", "q.b.blogspot.com"] {
            let once = collapse_domain(h, &r);
            assert_eq!(collapse_domain(&once, &r), once, "{h}");
        }
    }

    #[test]
    fn seeds_dedup_after_normalization() {
        let s = parse_seeds("http://A\nhttp://A#frag\n# comment\n\nnot a url\nftp://x/\n", &[]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].url, "http://a/");
        assert!(s[0].is_seed());
    }

    #[test]
    fn empty_seed_file_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("seeds.txt");
        std::fs::write(&p, "# nothing\n\n").unwrap();
        assert!(matches!(load_seeds(&p, &[]), Err(EngineError::NoSeeds(_))));
    }

    #[test]
    fn seed_collapse_applied() {
        let s = parse_seeds("https://alice.tumblr.com/post/1\n", &rules(&["tumblr.com"]));
        assert_eq!(s[0].domain, "alice.tumblr.com");
        assert_eq!(s[0].collapsed_domain, "tumblr.com");
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        let c = RunConfig {
            tags_per_page: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            budgets: Budgets {
                max_search_queries: Some(0),
                ..Budgets::default()
            },
            ..RunConfig::default()
        };
        assert!(c.validate().is_ok());
    }
}
