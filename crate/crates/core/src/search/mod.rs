//! Tag to candidate-URL search backends.

mod live;
mod simulated;

use async_trait::async_trait;

pub use live::{LiveBackend, LiveConfig, DEFAULT_KEY_HEADER};
pub use simulated::{Posting, SimulatedBackend, SimulatedIndex};

use crate::store::SearchEvent;

pub const DEFAULT_RESULTS_PER_SEARCH: usize = 50;

/// A search engine reachable by tag. Implementations report raw ranked
/// URLs; cross-event deduplication is the caller's job. Failures are
/// reported inside the event, never as a panic or error.
#[async_trait]
pub trait SearchBackend: Send + Sync {
    fn name(&self) -> &str;

    async fn search(&self, tag: &str, max_results: usize) -> SearchEvent;
}

/// Runs one query, enforcing the event-level contract: non-empty tag, at
/// most `max_results` hits, unique URLs, ranks 1..n.
pub async fn query(backend: &dyn SearchBackend, tag: &str, max_results: usize) -> SearchEvent {
    let tag = tag.trim();
    if tag.is_empty() {
        return SearchEvent::failed(tag, backend.name(), "empty tag");
    }
    let ev = backend.search(tag, max_results).await;
    let mut seen = std::collections::HashSet::new();
    let urls: Vec<String> = ev
        .results
        .into_iter()
        .map(|h| h.url)
        .filter(|u| seen.insert(u.clone()))
        .take(max_results)
        .collect();
    let mut out = SearchEvent::from_urls(tag, &ev.backend, urls, ev.error);
    out.queried_at = ev.queried_at;
    out
}
