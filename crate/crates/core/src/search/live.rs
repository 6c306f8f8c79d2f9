//! JSON-over-HTTP web search client.
//!
//! Speaks the common `GET ?q=&count=&offset=&mkt=` shape with a subscription
//! key header and reads ranked URLs from `webPages.value[].url`. Endpoint,
//! header name, page size and market are configuration so any engine with a
//! compatible response can be plugged in.

use std::time::Duration;

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::Deserialize;
use tracing::{debug, warn};

use super::SearchBackend;
use crate::gate::RateGate;
use crate::store::SearchEvent;

pub const DEFAULT_KEY_HEADER: &str = "Ocp-Apim-Subscription-Key";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub endpoint: String,
    pub api_key: String,
    pub key_header: String,
    pub page_size: usize,
    pub market: Option<String>,
    /// Ceiling on requests per second (every page counts).
    pub qps: f64,
    /// Retries allowed after HTTP 429 within a single query.
    pub retry_budget: u32,
    /// First backoff delay; doubles on each retry.
    pub backoff_base: Duration,
    pub request_timeout: Duration,
}

impl LiveConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            key_header: DEFAULT_KEY_HEADER.to_string(),
            page_size: 50,
            market: None,
            qps: 3.0,
            retry_budget: 5,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ApiResponse {
    #[serde(default)]
    web_pages: Option<WebPages>,
}

#[derive(Deserialize)]
struct WebPages {
    #[serde(default)]
    value: Vec<WebPage>,
}

#[derive(Deserialize)]
struct WebPage {
    url: String,
}

#[derive(Debug, Clone)]
pub struct LiveBackend {
    client: reqwest::Client,
    config: LiveConfig,
    gate: RateGate,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, reqwest::Error> {
        let client = reqwest::Client::builder()
            .timeout(config.request_timeout)
            .no_proxy()
            .build()?;
        Ok(Self {
            client,
            gate: RateGate::per_second(config.qps),
            config,
        })
    }

    async fn page(&self, tag: &str, offset: usize, count: usize) -> Result<Vec<String>, String> {
        let mut retries = 0u32;
        loop {
            self.gate.wait("search").await;
            let mut req = self
                .client
                .get(&self.config.endpoint)
                .header(self.config.key_header.as_str(), &self.config.api_key)
                .query(&[
                    ("q", tag.to_string()),
                    ("count", count.to_string()),
                    ("offset", offset.to_string()),
                ]);
            if let Some(m) = &self.config.market {
                req = req.query(&[("mkt", m)]);
            }
            let resp = req.send().await.map_err(|e| format!("request failed: {e}"))?;
            let status = resp.status();
            if status == StatusCode::TOO_MANY_REQUESTS {
                if retries >= self.config.retry_budget {
                    return Err(format!("rate limited; retry budget of {} exhausted", self.config.retry_budget));
                }
                let delay = self.config.backoff_base * 2u32.saturating_pow(retries);
                warn!(tag, retries, ?delay, "429 from search api, backing off");
                tokio::time::sleep(delay).await;
                retries += 1;
                continue;
            }
            if !status.is_success() {
                return Err(format!("http status {}", status.as_u16()));
            }
            let body = resp.bytes().await.map_err(|e| format!("reading body: {e}"))?;
            let parsed: ApiResponse =
                serde_json::from_slice(&body).map_err(|e| format!("malformed response: {e}"))?;
            return Ok(parsed
                .web_pages
                .map(|w| w.value.into_iter().map(|p| p.url).collect())
                .unwrap_or_default());
        }
    }
}

#[async_trait]
impl SearchBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    async fn search(&self, tag: &str, max_results: usize) -> SearchEvent {
        let page_size = self.config.page_size.max(1);
        let mut urls: Vec<String> = Vec::new();
        while urls.len() < max_results {
            let want = page_size.min(max_results - urls.len());
            match self.page(tag, urls.len(), want).await {
                Ok(batch) => {
                    let n = batch.len();
                    debug!(tag, offset = urls.len(), n, "search page");
                    urls.extend(batch);
                    if n < want {
                        break;
                    }
                }
                Err(e) => return SearchEvent::failed(tag, "live", e),
            }
        }
        urls.truncate(max_results);
        SearchEvent::from_urls(tag, "live", urls, None)
    }
}
