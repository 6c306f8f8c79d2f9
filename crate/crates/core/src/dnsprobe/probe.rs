use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4};
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::UdpSocket;
use tokio::sync::Semaphore;
use tokio::time::{timeout_at, Instant};
use tracing::{debug, warn};

use super::codec::{self, CodecError, DnsAnswer, DnsQuery};
use super::sinks::SinkSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Poisoned,
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseOutcome {
    Response,
    Timeout,
}

/// Outcome of a single query to a single sink.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub sink_ip: Ipv4Addr,
    pub port: u16,
    pub outcome: ResponseOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<DnsAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcode: Option<u8>,
    pub id_matched: bool,
}

impl ProbeResult {
    fn timeout(sink: SocketAddrV4) -> Self {
        Self {
            sink_ip: *sink.ip(),
            port: sink.port(),
            outcome: ResponseOutcome::Timeout,
            latency_ms: None,
            answers: Vec::new(),
            rcode: None,
            id_matched: false,
        }
    }

    pub fn is_response(&self) -> bool {
        self.outcome == ResponseOutcome::Response
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeOutcome {
    pub verdict: Verdict,
    pub evidence: Vec<ProbeResult>,
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid domain: {0}")]
    InvalidDomain(#[from] CodecError),
    #[error("socket failure probing {sink}: {source}")]
    Socket {
        sink: SocketAddrV4,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    /// Wait per sink for an injected reply.
    pub timeout: Duration,
    /// Query all sinks concurrently rather than one after another.
    pub parallel: bool,
    /// Full re-probes after an all-timeout round before settling on clean.
    pub retries_on_clean: u32,
    /// Global cap on outstanding sink queries.
    pub max_in_flight: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(5),
            parallel: true,
            retries_on_clean: 1,
            max_in_flight: 64,
        }
    }
}

/// Shared prober; clone freely, all clones share the in-flight gate.
#[derive(Debug, Clone)]
pub struct Prober {
    sinks: SinkSet,
    config: ProbeConfig,
    gate: Arc<Semaphore>,
}

impl Prober {
    pub fn new(sinks: SinkSet, config: ProbeConfig) -> Self {
        let gate = Arc::new(Semaphore::new(config.max_in_flight.max(1)));
        Self {
            sinks,
            config,
            gate,
        }
    }

    pub fn sinks(&self) -> &SinkSet {
        &self.sinks
    }

    pub fn config(&self) -> &ProbeConfig {
        &self.config
    }

    /// Poisoned iff at least one sink returns an id-matched reply. A socket
    /// failure aborts the round and it is retried once; a second failure is
    /// returned so the caller leaves the domain unchecked.
    pub async fn probe_domain(&self, domain: &str) -> Result<ProbeOutcome, ProbeError> {
        codec::validate_hostname(domain)?;
        let mut evidence = Vec::new();
        for attempt in 0..=self.config.retries_on_clean {
            let round = match self.round(domain).await {
                Ok(r) => r,
                Err(e) => {
                    warn!(domain, error = %e, "probe round failed, retrying once");
                    self.round(domain).await?
                }
            };
            let poisoned = round.iter().any(ProbeResult::is_response);
            evidence.extend(round);
            if poisoned {
                return Ok(ProbeOutcome {
                    verdict: Verdict::Poisoned,
                    evidence,
                });
            }
            debug!(domain, attempt, "all sinks silent");
        }
        Ok(ProbeOutcome {
            verdict: Verdict::Clean,
            evidence,
        })
    }

    async fn round(&self, domain: &str) -> Result<Vec<ProbeResult>, ProbeError> {
        if self.config.parallel {
            join_all(self.sinks.addrs().iter().map(|s| self.query_sink(*s, domain)))
                .await
                .into_iter()
                .collect()
        } else {
            let mut out = Vec::with_capacity(self.sinks.len());
            for sink in self.sinks.addrs() {
                out.push(self.query_sink(*sink, domain).await?);
            }
            Ok(out)
        }
    }

    async fn query_sink(&self, sink: SocketAddrV4, domain: &str) -> Result<ProbeResult, ProbeError> {
        let _permit = self.gate.acquire().await.expect("probe gate closed");
        let sock_err = |source| ProbeError::Socket { sink, source };
        let bind = if sink.ip().is_loopback() {
            "127.0.0.1:0"
        } else {
            "0.0.0.0:0"
        };
        let socket = UdpSocket::bind(bind).await.map_err(sock_err)?;
        let query = DnsQuery::random_id(domain);
        let packet = codec::encode_query(&query)?;
        let start = Instant::now();
        let deadline = start + self.config.timeout;
        socket.send_to(&packet, sink).await.map_err(sock_err)?;

        let mut buf = [0u8; 1500];
        loop {
            let (len, from) = match timeout_at(deadline, socket.recv_from(&mut buf)).await {
                Err(_) => return Ok(ProbeResult::timeout(sink)),
                Ok(Err(e)) => return Err(sock_err(e)),
                Ok(Ok(v)) => v,
            };
            if from != SocketAddr::V4(sink) {
                continue;
            }
            // Mismatched ids and garbage are noise, never evidence.
            let Some(resp) = codec::decode_response(&buf[..len], query.transaction_id) else {
                continue;
            };
            return Ok(ProbeResult {
                sink_ip: *sink.ip(),
                port: sink.port(),
                outcome: ResponseOutcome::Response,
                latency_ms: Some(start.elapsed().as_millis() as u64),
                answers: resp.answers,
                rcode: Some(resp.rcode),
                id_matched: true,
            });
        }
    }
}
