use std::collections::{HashMap, HashSet};
use std::net::Ipv4Addr;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use chrono::Utc;
use tagcrawl_core::dnsprobe::codec::{self, DnsQuery};
use tagcrawl_core::dnsprobe::{ProbeError, ProbeOutcome, ProbeResult, ResponseOutcome, Verdict};
use tagcrawl_core::engine::{
    add_seeds, parse_seeds, run_loop, BudgetKind, CollapseRule, Components, DomainChecker,
    PageSource, RunConfig, StopReason,
};
use tagcrawl_core::fetch::{FetchOutcome, FetchResult};
use tagcrawl_core::search::SearchBackend;
use tagcrawl_core::store::{SearchEvent, Store, UrlStatus};
use tagcrawl_core::textproc::CorpusModel;

#[derive(Default)]
struct MockChecker {
    poisoned: Mutex<HashSet<String>>,
    invalid: HashSet<String>,
    broken: bool,
    calls: Mutex<Vec<String>>,
}

impl MockChecker {
    fn poisoning(domains: &[&str]) -> Self {
        Self {
            poisoned: Mutex::new(domains.iter().map(|d| d.to_string()).collect()),
            ..Self::default()
        }
    }

    fn set_poisoned(&self, domains: &[&str]) {
        *self.poisoned.lock().unwrap() = domains.iter().map(|d| d.to_string()).collect();
    }

    fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }
}

#[async_trait]
impl DomainChecker for MockChecker {
    async fn check(&self, domain: &str) -> Result<ProbeOutcome, ProbeError> {
        self.calls.lock().unwrap().push(domain.to_string());
        if self.invalid.contains(domain) {
            let e = codec::encode_query(&DnsQuery::new(0, "x".repeat(64))).unwrap_err();
            return Err(ProbeError::InvalidDomain(e));
        }
        if self.broken {
            return Err(ProbeError::Socket {
                sink: "192.0.2.1:53".parse().unwrap(),
                source: std::io::Error::other("network down"),
            });
        }
        let poisoned = self.poisoned.lock().unwrap().contains(domain);
        let evidence = vec![ProbeResult {
            sink_ip: Ipv4Addr::new(192, 0, 2, 1),
            port: 53,
            outcome: if poisoned { ResponseOutcome::Response } else { ResponseOutcome::Timeout },
            latency_ms: poisoned.then_some(3),
            answers: Vec::new(),
            rcode: poisoned.then_some(0),
            id_matched: poisoned,
        }];
        Ok(ProbeOutcome {
            verdict: if poisoned { Verdict::Poisoned } else { Verdict::Clean },
            evidence,
        })
    }
}

#[derive(Default)]
struct MockPages(HashMap<String, String>);

#[async_trait]
impl PageSource for MockPages {
    async fn get(&self, url: &str) -> FetchResult {
        let body = self.0.get(url);
        FetchResult {
            url: url.to_string(),
            outcome: if body.is_some() { FetchOutcome::Ok } else { FetchOutcome::HttpError },
            status_code: Some(if body.is_some() { 200 } else { 404 }),
            body: body.map(|b| b.as_bytes().to_vec()),
            charset: None,
            fetched_at: Utc::now(),
        }
    }
}

#[derive(Default)]
struct MockSearch {
    results: HashMap<String, Vec<String>>,
    failing: Mutex<HashSet<String>>,
    calls: Mutex<Vec<String>>,
}

impl MockSearch {
    fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap().clone()
    }
}

#[async_trait]
impl SearchBackend for MockSearch {
    fn name(&self) -> &str {
        "mock"
    }

    async fn search(&self, tag: &str, max_results: usize) -> SearchEvent {
        self.calls.lock().unwrap().push(tag.to_string());
        if self.failing.lock().unwrap().contains(tag) {
            return SearchEvent::failed(tag, "mock", "quota exceeded");
        }
        let urls = self.results.get(tag).cloned().unwrap_or_default();
        SearchEvent::from_urls(tag, "mock", urls.into_iter().take(max_results), None)
    }
}

/// Every token equally rare, so tags follow raw term frequency.
fn flat_model() -> CorpusModel {
    let stop = ["the", "and"].map(String::from).into_iter().collect();
    CorpusModel::new(1000, HashMap::new(), stop).unwrap()
}

fn page(words: &[(&str, usize)]) -> String {
    let body: Vec<String> = words.iter().flat_map(|(w, n)| vec![w.to_string(); *n]).collect();
    format!("<html><body><p>{}</p></body></html>", body.join(" the "))
}

fn config() -> RunConfig {
    RunConfig {
        tags_per_page: 1,
        ..RunConfig::default()
    }
}

fn pages(entries: &[(&str, String)]) -> MockPages {
    MockPages(entries.iter().map(|(u, p)| (u.to_string(), p.clone())).collect())
}

fn search(entries: &[(&str, &[&str])]) -> MockSearch {
    MockSearch {
        results: entries
            .iter()
            .map(|(t, urls)| (t.to_string(), urls.iter().map(|u| u.to_string()).collect()))
            .collect(),
        ..MockSearch::default()
    }
}

fn seeded(dir: &std::path::Path, seeds: &str, rules: &[CollapseRule]) -> Store {
    let mut store = Store::open(dir).unwrap();
    add_seeds(&mut store, parse_seeds(seeds, rules)).unwrap();
    store
}

fn status(store: &Store, url: &str) -> UrlStatus {
    store.state().url(url).unwrap_or_else(|| panic!("{url} missing")).status
}

#[tokio::test]
async fn clean_seeds_reach_fixpoint_in_one_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://a.example/\nhttp://b.example/x\n", &[]);
    let checker = MockChecker::default();
    let (p, s, m) = (MockPages::default(), MockSearch::default(), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(report.iterations, 1);
    assert!(store.state().tags().is_empty());
    assert!(s.calls().is_empty());
    assert_eq!(status(&store, "http://a.example/"), UrlStatus::Unfiltered);
    assert_eq!(report.metrics.filtered_urls, 0);
    assert_eq!(report.metrics.urls_crawled, 2);
}

#[tokio::test]
async fn zero_search_budget_stops_before_searching() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example"]);
    let p = pages(&[("http://bad1.example/", page(&[("uyghur", 3)]))]);
    let (s, m) = (search(&[("uyghur", &["http://bad2.example/"])]), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let mut cfg = config();
    cfg.budgets.max_search_queries = Some(0);
    let report = run_loop(&mut store, &parts, &cfg).await.unwrap();
    assert_eq!(report.stop, StopReason::Budget(BudgetKind::SearchQueries));
    assert_eq!(store.state().tags().len(), 1);
    assert!(s.calls().is_empty());
    assert!(store.state().searches().is_empty());
}

#[tokio::test]
async fn discovery_through_a_tag() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example", "bad2.example"]);
    let p = pages(&[
        ("http://bad1.example/", page(&[("uyghur", 3), ("camps", 2)])),
        ("http://bad2.example/a", page(&[("tibet", 4)])),
    ]);
    let s = search(&[
        ("uyghur", &["http://bad2.example/a", "http://clean.example/b", "http://bad1.example/"]),
        ("tibet", &["http://bad1.example/", "http://bad2.example/a"]),
    ]);
    let m = flat_model();
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(report.iterations, 2);
    assert_eq!(report.history[0].urls_filtered, 1);
    assert_eq!(report.history[1].urls_filtered, 1);
    assert_eq!(report.history[0].urls_discovered, 2);

    let bad2 = store.state().url("http://bad2.example/a").unwrap();
    assert_eq!(bad2.status, UrlStatus::Filtered);
    let via = bad2.discovered_via.as_ref().unwrap();
    assert_eq!((via.tag.as_str(), via.base_domain.as_str(), via.rank), ("uyghur", "bad1.example", 1));
    assert_eq!(status(&store, "http://clean.example/b"), UrlStatus::Unfiltered);
    assert_eq!(s.calls(), ["uyghur", "tibet"]);
    assert!(store.state().tags().iter().all(|t| t.searched));
    assert_eq!(report.metrics.filtered_urls, 2);

    // Every discovered URL points back at a base domain met earlier.
    let urls = store.state().urls();
    for (i, u) in urls.iter().enumerate() {
        if let Some(v) = &u.discovered_via {
            assert!(urls[..i].iter().any(|e| e.collapsed_domain == v.base_domain && e.status.is_filtered()));
        }
    }
}

#[tokio::test]
async fn each_tag_string_searched_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\nhttp://bad2.example/\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example", "bad2.example"]);
    let p = pages(&[
        ("http://bad1.example/", page(&[("uyghur", 3)])),
        ("http://bad2.example/", page(&[("uyghur", 5)])),
    ]);
    let s = search(&[("uyghur", &["http://new.example/"])]);
    let m = flat_model();
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(s.calls(), ["uyghur"]);
    assert_eq!(store.state().tags().len(), 2);
    assert!(store.state().tags().iter().all(|t| t.searched));
    let via = store.state().url("http://new.example/").unwrap().discovered_via.clone().unwrap();
    assert_eq!(via.base_domain, "bad1.example");

    // A second run over the same store has nothing to ask.
    drop(store);
    let mut store = Store::open(dir.path()).unwrap();
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(s.calls().len(), 1);
}

#[tokio::test]
async fn backend_failure_stops_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example"]);
    let p = pages(&[("http://bad1.example/", page(&[("uyghur", 3)]))]);
    let s = search(&[("uyghur", &["http://bad2.example/"])]);
    s.failing.lock().unwrap().insert("uyghur".into());
    let m = flat_model();
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    match &report.stop {
        StopReason::BackendFailure(msg) => assert!(msg.contains("quota exceeded"), "{msg}"),
        other => panic!("unexpected stop {other:?}"),
    }
    drop(store);

    let mut store = Store::open(dir.path()).unwrap();
    assert_eq!(store.state().searches().len(), 1);
    assert!(store.state().searches()[0].error.is_some());
    assert!(!store.state().tags()[0].searched);
    assert!(store.state().url("http://bad2.example/").is_none());

    s.failing.lock().unwrap().clear();
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert!(store.state().tags()[0].searched);
    assert_eq!(status(&store, "http://bad2.example/"), UrlStatus::Unfiltered);
    // The failed probe was not the only one: one prior probe for bad1.
    assert_eq!(checker.calls(), ["bad1.example", "bad2.example"]);
}

#[tokio::test]
async fn unreachable_filtered_page() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/gone\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example"]);
    let (p, s, m) = (MockPages::default(), MockSearch::default(), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(status(&store, "http://bad1.example/gone"), UrlStatus::FetchFailed);
    assert!(store.state().tags().is_empty());
    assert_eq!(report.history[0].fetch_failures, 1);
    assert_eq!(report.metrics.filtered_urls, 1);
}

#[tokio::test]
async fn expired_verdicts_are_rechecked() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://a.example/\nhttp://b.example/\n", &[]);
    let checker = MockChecker::poisoning(&["a.example"]);
    let p = pages(&[
        ("http://a.example/", page(&[("uyghur", 2)])),
        ("http://b.example/", page(&[("tibet", 2)])),
    ]);
    let (s, m) = (MockSearch::default(), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let mut cfg = config();
    cfg.verdict_ttl = Duration::from_millis(400);
    cfg.budgets.max_iterations = Some(1);
    let report = run_loop(&mut store, &parts, &cfg).await.unwrap();
    assert_eq!(report.stop, StopReason::Budget(BudgetKind::Iterations));
    assert_eq!(status(&store, "http://a.example/"), UrlStatus::Filtered);
    assert_eq!(status(&store, "http://b.example/"), UrlStatus::Unfiltered);

    tokio::time::sleep(Duration::from_millis(500)).await;
    checker.set_poisoned(&["b.example"]);
    cfg.budgets.max_iterations = Some(2);
    let report = run_loop(&mut store, &parts, &cfg).await.unwrap();
    assert_eq!(report.stop, StopReason::Budget(BudgetKind::Iterations));
    assert_eq!(status(&store, "http://a.example/"), UrlStatus::Unfiltered);
    assert_eq!(status(&store, "http://b.example/"), UrlStatus::Filtered);
    assert_eq!(store.state().verdict("a.example").unwrap().verdict, Verdict::Clean);
    assert_eq!(store.state().verdict("b.example").unwrap().verdict, Verdict::Poisoned);
    // The newly filtered page was fetched and tagged.
    assert!(store.state().url("http://b.example/").unwrap().tags_extracted);
    assert!(store.state().tag("tibet", "http://b.example/").is_some());
    assert_eq!(checker.calls().iter().filter(|d| *d == "a.example").count(), 2);
}

#[tokio::test]
async fn collapsed_domains_probed_once() {
    let dir = tempfile::tempdir().unwrap();
    let rules = vec![CollapseRule::new("blogs.example")];
    let mut store = seeded(dir.path(), "http://alice.blogs.example/\nhttp://bob.blogs.example/\n", &rules);
    let checker = MockChecker::poisoning(&["blogs.example"]);
    let p = pages(&[
        ("http://alice.blogs.example/", page(&[("tibet", 2)])),
        ("http://bob.blogs.example/", page(&[("lama", 2)])),
    ]);
    let s = search(&[("tibet", &["http://carol.blogs.example/"])]);
    let m = flat_model();
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let cfg = RunConfig {
        collapse_rules: rules,
        ..config()
    };
    let report = run_loop(&mut store, &parts, &cfg).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(checker.calls(), ["blogs.example"]);
    assert_eq!(status(&store, "http://alice.blogs.example/"), UrlStatus::Filtered);
    assert_eq!(status(&store, "http://bob.blogs.example/"), UrlStatus::Filtered);
    let carol = store.state().url("http://carol.blogs.example/").unwrap();
    assert_eq!(carol.collapsed_domain, "blogs.example");
    assert_eq!(carol.domain, "carol.blogs.example");
    assert!(carol.status.is_filtered());
}

#[tokio::test]
async fn skip_known_domains_option() {
    for skip in [false, true] {
        let dir = tempfile::tempdir().unwrap();
        let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
        let checker = MockChecker::poisoning(&["bad1.example"]);
        let p = pages(&[("http://bad1.example/", page(&[("uyghur", 3)]))]);
        let s = search(&[("uyghur", &["http://bad1.example/more", "http://new.example/"])]);
        let m = flat_model();
        let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
        let cfg = RunConfig {
            skip_known_domains: skip,
            ..config()
        };
        run_loop(&mut store, &parts, &cfg).await.unwrap();
        assert!(store.state().url("http://new.example/").is_some());
        assert_eq!(store.state().url("http://bad1.example/more").is_some(), !skip);
    }
}

#[tokio::test]
async fn url_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
    let checker = MockChecker::poisoning(&["bad1.example"]);
    let p = pages(&[("http://bad1.example/", page(&[("uyghur", 3)]))]);
    let hits: Vec<String> = (0..10).map(|i| format!("http://n{i}.example/")).collect();
    let hits: Vec<&str> = hits.iter().map(String::as_str).collect();
    let s = search(&[("uyghur", &hits)]);
    let m = flat_model();
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let mut cfg = config();
    cfg.budgets.max_urls = Some(5);
    let report = run_loop(&mut store, &parts, &cfg).await.unwrap();
    assert_eq!(report.stop, StopReason::Budget(BudgetKind::Urls));
    assert_eq!(store.state().urls().len(), 5);
    let kept: Vec<&str> = store.state().urls()[1..].iter().map(|u| u.url.as_str()).collect();
    assert_eq!(kept, &hits[..4]);
}

#[tokio::test]
async fn broken_network_stalls() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://bad1.example/\n", &[]);
    let checker = MockChecker {
        broken: true,
        ..MockChecker::default()
    };
    let (p, s, m) = (MockPages::default(), MockSearch::default(), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Stalled);
    assert_eq!(status(&store, "http://bad1.example/"), UrlStatus::Unchecked);
}

#[tokio::test]
async fn unprobeable_domains_are_unfiltered() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = seeded(dir.path(), "http://odd.example/\n", &[]);
    let checker = MockChecker {
        invalid: ["odd.example".to_string()].into(),
        ..MockChecker::default()
    };
    let (p, s, m) = (MockPages::default(), MockSearch::default(), flat_model());
    let parts = Components { checker: &checker, pages: &p, search: &s, model: &m };
    let report = run_loop(&mut store, &parts, &config()).await.unwrap();
    assert_eq!(report.stop, StopReason::Fixpoint);
    assert_eq!(status(&store, "http://odd.example/"), UrlStatus::Unfiltered);
    assert!(store.state().verdict("odd.example").is_none());
}
