//! On-path style DNS injector.
//!
//! Replies to A queries for blacklisted names (or their subdomains) with one
//! forged record, echoing the query id, after `respond_delay_ms`. Any other
//! name gets no reply at all, which is what a sink with no DNS server does.

use std::net::{Ipv4Addr, SocketAddr};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::net::UdpSocket;
use tokio::task::JoinHandle;
use tracing::{debug, info};

use super::{io_err, SimError};
use crate::dnsprobe::codec::{self, TYPE_A};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorSpec {
    pub blacklist: Vec<String>,
    #[serde(default = "default_forged")]
    pub forged_answers: Vec<Ipv4Addr>,
    #[serde(default)]
    pub respond_delay_ms: u64,
    #[serde(default)]
    pub drop_rate: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_ttl")]
    pub ttl: u32,
}

fn default_forged() -> Vec<Ipv4Addr> {
    vec![
        Ipv4Addr::new(37, 61, 54, 158),
        Ipv4Addr::new(59, 24, 3, 173),
        Ipv4Addr::new(243, 185, 187, 39),
    ]
}

fn default_ttl() -> u32 {
    300
}

impl CensorSpec {
    pub fn new(blacklist: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            blacklist: blacklist.into_iter().map(Into::into).collect(),
            forged_answers: default_forged(),
            respond_delay_ms: 0,
            drop_rate: 0.0,
            rng_seed: 0,
            ttl: default_ttl(),
        }
    }

    pub fn is_blacklisted(&self, qname: &str) -> bool {
        let q = qname.trim_end_matches('.').to_ascii_lowercase();
        self.blacklist.iter().any(|b| {
            let b = b.trim_end_matches('.');
            q == b || q.strip_suffix(b).is_some_and(|p| p.ends_with('.'))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedQuery {
    pub from: SocketAddr,
    pub transaction_id: u16,
    pub qname: String,
    pub answered: bool,
}

/// Running injector; stops when dropped.
pub struct InjectorHandle {
    local_addr: SocketAddr,
    log: Arc<Mutex<Vec<LoggedQuery>>>,
    malformed: Arc<AtomicUsize>,
    task: JoinHandle<()>,
}

impl InjectorHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn queries(&self) -> Vec<LoggedQuery> {
        self.log.lock().expect("log poisoned").clone()
    }

    pub fn malformed_count(&self) -> usize {
        self.malformed.load(Ordering::Relaxed)
    }

    /// Runs until the task ends, i.e. forever unless aborted.
    pub async fn wait(&mut self) {
        let _ = (&mut self.task).await;
    }
}

impl Drop for InjectorHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn run_injector(spec: CensorSpec, listen: SocketAddr) -> Result<InjectorHandle, SimError> {
    if spec.forged_answers.is_empty() {
        return Err(SimError::InvalidSpec("forged_answers is empty".into()));
    }
    if !(0.0..=1.0).contains(&spec.drop_rate) {
        return Err(SimError::InvalidSpec(format!("drop_rate {} outside [0, 1]", spec.drop_rate)));
    }
    let path = std::path::PathBuf::from(listen.to_string());
    let socket = Arc::new(UdpSocket::bind(listen).await.map_err(io_err(&path))?);
    let local_addr = socket.local_addr().map_err(io_err(&path))?;
    info!(%local_addr, blacklisted = spec.blacklist.len(), "injector listening");
    let log = Arc::new(Mutex::new(Vec::new()));
    let malformed = Arc::new(AtomicUsize::new(0));
    let task = tokio::spawn(serve(
        socket,
        Arc::new(spec),
        log.clone(),
        malformed.clone(),
    ));
    Ok(InjectorHandle {
        local_addr,
        log,
        malformed,
        task,
    })
}

async fn serve(
    socket: Arc<UdpSocket>,
    spec: Arc<CensorSpec>,
    log: Arc<Mutex<Vec<LoggedQuery>>>,
    malformed: Arc<AtomicUsize>,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let next_answer = AtomicUsize::new(0);
    let mut buf = [0u8; 1500];
    loop {
        let (len, from) = match socket.recv_from(&mut buf).await {
            Ok(v) => v,
            Err(e) => {
                debug!(error = %e, "injector recv error");
                continue;
            }
        };
        let Some(q) = codec::decode_query(&buf[..len]).filter(|q| !q.is_response) else {
            malformed.fetch_add(1, Ordering::Relaxed);
            debug!(%from, len, "ignoring malformed packet");
            continue;
        };
        let hit = q.qtype == TYPE_A && spec.is_blacklisted(&q.qname);
        let dropped = hit && spec.drop_rate > 0.0 && rng.gen_bool(spec.drop_rate);
        let answered = hit && !dropped;
        debug!(%from, id = q.transaction_id, qname = %q.qname, answered, "query");
        log.lock().expect("log poisoned").push(LoggedQuery {
            from,
            transaction_id: q.transaction_id,
            qname: q.qname.clone(),
            answered,
        });
        if !answered {
            continue;
        }
        let i = next_answer.fetch_add(1, Ordering::Relaxed);
        let forged = spec.forged_answers[i % spec.forged_answers.len()];
        let reply = codec::encode_a_response(&q, &[forged], spec.ttl);
        let delay = Duration::from_millis(spec.respond_delay_ms);
        let socket = socket.clone();
        tokio::spawn(async move {
            if !delay.is_zero() {
                tokio::time::sleep(delay).await;
            }
            let _ = socket.send_to(&reply, from).await;
        });
    }
}
