use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::Path;

use thiserror::Error;

/// Addresses inside China with no DNS service; defaults for live runs.
pub const DEFAULT_CHINA_SINKS: [Ipv4Addr; 8] = [
    Ipv4Addr::new(220, 181, 57, 217),
    Ipv4Addr::new(223, 96, 100, 100),
    Ipv4Addr::new(1, 24, 10, 10),
    Ipv4Addr::new(202, 143, 16, 100),
    Ipv4Addr::new(180, 160, 10, 1),
    Ipv4Addr::new(180, 77, 100, 200),
    Ipv4Addr::new(144, 0, 111, 90),
    Ipv4Addr::new(42, 101, 0, 1),
];

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("reading sink list {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: invalid sink {text:?}")]
    Invalid { line: usize, text: String },
    #[error("sink list is empty")]
    Empty,
}

/// Ordered, non-empty list of sink endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkSet {
    sinks: Vec<SocketAddrV4>,
}

impl SinkSet {
    pub fn new(sinks: Vec<SocketAddrV4>) -> Result<Self, SinkError> {
        if sinks.is_empty() {
            return Err(SinkError::Empty);
        }
        Ok(Self { sinks })
    }

    pub fn china_default() -> Self {
        Self {
            sinks: DEFAULT_CHINA_SINKS
                .iter()
                .map(|ip| SocketAddrV4::new(*ip, 53))
                .collect(),
        }
    }

    /// Parses `ip[:port]` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SinkError> {
        let mut sinks = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let addr = if let Ok(sa) = line.parse::<SocketAddrV4>() {
                sa
            } else if let Ok(ip) = line.parse::<Ipv4Addr>() {
                SocketAddrV4::new(ip, 53)
            } else {
                return Err(SinkError::Invalid {
                    line: idx + 1,
                    text: line.to_string(),
                });
            };
            sinks.push(addr);
        }
        Self::new(sinks)
    }

    pub fn load(path: &Path) -> Result<Self, SinkError> {
        let text = std::fs::read_to_string(path).map_err(|source| SinkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn addrs(&self) -> &[SocketAddrV4] {
        &self.sinks
    }

    pub fn len(&self) -> usize {
        self.sinks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sinks.is_empty()
    }
}
