//! Bounded page retrieval.

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::gate::RateGate;

pub const DEFAULT_USER_AGENT: &str = concat!("tagcrawl/", env!("CARGO_PKG_VERSION"), " (filtering measurement)");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchLimits {
    pub timeout: Duration,
    pub max_bytes: usize,
    pub max_redirects: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(20),
            max_bytes: 2 * 1024 * 1024,
            max_redirects: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub limits: FetchLimits,
    pub user_agent: String,
    /// Optional HTTP proxy all requests go through.
    pub proxy: Option<String>,
    /// Minimum gap between requests to the same host.
    pub per_domain_delay: Duration,
}

impl Default for FetchConfig {
    fn default() -> Self {
        Self {
            limits: FetchLimits::default(),
            user_agent: DEFAULT_USER_AGENT.to_string(),
            proxy: None,
            per_domain_delay: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchOutcome {
    Ok,
    HttpError,
    Timeout,
    TooLarge,
    ConnectionFailed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchResult {
    pub url: String,
    pub outcome: FetchOutcome,
    pub status_code: Option<u16>,
    pub body: Option<Vec<u8>>,
    /// Charset from the Content-Type header, if any.
    pub charset: Option<String>,
    pub fetched_at: DateTime<Utc>,
}

impl FetchResult {
    fn failed(url: &str, outcome: FetchOutcome, status_code: Option<u16>) -> Self {
        Self {
            url: url.to_string(),
            outcome,
            status_code,
            body: None,
            charset: None,
            fetched_at: Utc::now(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome == FetchOutcome::Ok
    }
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("building http client: {0}")]
    Client(#[from] reqwest::Error),
}

#[derive(Debug, Clone)]
pub struct Fetcher {
    client: reqwest::Client,
    limits: FetchLimits,
    gate: RateGate,
}

impl Fetcher {
    pub fn new(config: FetchConfig) -> Result<Self, FetchError> {
        let mut builder = reqwest::Client::builder()
            .user_agent(config.user_agent)
            .timeout(config.limits.timeout)
            .connect_timeout(config.limits.timeout)
            .redirect(reqwest::redirect::Policy::limited(config.limits.max_redirects));
        builder = match &config.proxy {
            Some(p) => builder.proxy(reqwest::Proxy::all(p)?),
            None => builder.no_proxy(),
        };
        Ok(Self {
            client: builder.build()?,
            limits: config.limits,
            gate: RateGate::new(config.per_domain_delay),
        })
    }

    pub fn limits(&self) -> FetchLimits {
        self.limits
    }

    /// Never fails: every problem is reported through the outcome. The
    /// timeout covers the whole exchange and starts after the per-domain
    /// politeness wait.
    pub async fn fetch(&self, url: &str) -> FetchResult {
        let parsed = match reqwest::Url::parse(url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.host_str().is_some() => u,
            _ => return FetchResult::failed(url, FetchOutcome::ConnectionFailed, None),
        };
        self.gate.wait(parsed.host_str().unwrap_or_default()).await;
        match tokio::time::timeout(self.limits.timeout, self.fetch_inner(url, parsed)).await {
            Ok(r) => r,
            Err(_) => FetchResult::failed(url, FetchOutcome::Timeout, None),
        }
    }

    async fn fetch_inner(&self, url: &str, parsed: reqwest::Url) -> FetchResult {
        let mut resp = match self.client.get(parsed).send().await {
            Ok(r) => r,
            Err(e) => return FetchResult::failed(url, classify(&e), None),
        };
        let status = resp.status();
        if !status.is_success() {
            debug!(url, status = status.as_u16(), "non-success status");
            return FetchResult::failed(url, FetchOutcome::HttpError, Some(status.as_u16()));
        }
        let charset = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .and_then(charset_param);
        let max = self.limits.max_bytes;
        let mut body: Vec<u8> = Vec::new();
        let mut outcome = FetchOutcome::Ok;
        loop {
            match resp.chunk().await {
                Ok(Some(chunk)) => {
                    let room = max - body.len();
                    if chunk.len() > room {
                        body.extend_from_slice(&chunk[..room]);
                        outcome = FetchOutcome::TooLarge;
                        break;
                    }
                    body.extend_from_slice(&chunk);
                }
                Ok(None) => break,
                Err(e) => return FetchResult::failed(url, classify(&e), Some(status.as_u16())),
            }
        }
        FetchResult {
            url: url.to_string(),
            outcome,
            status_code: Some(status.as_u16()),
            body: Some(body),
            charset,
            fetched_at: Utc::now(),
        }
    }
}

fn classify(e: &reqwest::Error) -> FetchOutcome {
    if e.is_timeout() {
        FetchOutcome::Timeout
    } else if e.is_redirect() || e.is_status() {
        FetchOutcome::HttpError
    } else {
        FetchOutcome::ConnectionFailed
    }
}

fn charset_param(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|p| {
        let (k, v) = p.split_once('=')?;
        k.trim()
            .eq_ignore_ascii_case("charset")
            .then(|| v.trim().trim_matches('"').to_string())
    })
}
