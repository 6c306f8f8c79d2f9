//! Recursive discovery of DNS-filtered web resources.
//!
//! Known-blocked pages are mined for descriptive tags, the tags are fed to a
//! search backend, result domains are probed for on-path DNS injection, and
//! newly confirmed blocked pages are fed back into the loop.
//!
//! Every externally dependent piece (search engine, censor, web) has a local
//! simulation in [`sim`] so the whole loop runs on a single machine.

pub mod dnsprobe;
pub mod engine;
pub mod fetch;
pub mod gate;
pub mod metrics;
pub mod search;
pub mod sim;
pub mod store;
pub mod textproc;
pub mod urlnorm;

pub use dnsprobe::{ProbeResult, SinkSet};
pub use engine::{CollapseRule, RunConfig, StopReason};
pub use metrics::{DiscoveryPower, RunMetrics};
pub use store::{DomainVerdict, SearchEvent, Store, TagRecord, UrlRecord, UrlStatus};
pub use textproc::{CleanDocument, CorpusModel, WeightedTag};
