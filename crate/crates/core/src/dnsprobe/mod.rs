//! Sink-IP DNS poisoning checks.
//!
//! A-record queries are sent to addresses that do not run a DNS server. Any
//! well-formed reply carrying the query's transaction id can only have come
//! from an on-path injector, so a single such reply marks the domain
//! poisoned.

pub mod codec;
mod probe;
mod sinks;

pub use codec::{decode_query, decode_response, encode_query, DnsAnswer, DnsQuery};
pub use probe::{ProbeConfig, ProbeError, ProbeOutcome, ProbeResult, Prober, ResponseOutcome, Verdict};
pub use sinks::{SinkError, SinkSet, DEFAULT_CHINA_SINKS};
