//! Desk-scale stand-ins for the web, the search engine's crawl, and the
//! censor.
//!
//! * [`generate_world`] writes a topical HTML corpus with a hidden
//!   blacklist, a ground-truth manifest and a background frequency table.
//! * [`run_injector`] answers DNS A queries for blacklisted names with a
//!   forged record and ignores everything else.
//! * [`serve_corpus`] serves the corpus over HTTP, routing on the Host
//!   header so it can sit behind the fetcher as a proxy.

mod injector;
mod server;
mod world;

use thiserror::Error;

pub use injector::{run_injector, CensorSpec, InjectorHandle, LoggedQuery};
pub use server::{serve_corpus, ServerHandle};
pub use world::{
    generate_world, read_corpus, CorpusDocument, DomainEntry, Manifest, Topic, WorldSpec,
    BACKGROUND_FILE, CORPUS_DIR, MANIFEST_FILE, STOPWORDS_FILE,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("io on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("output directory {0} is not empty (use force to overwrite)")]
    OutputNotEmpty(String),
    #[error("corpus {0} contains no documents")]
    EmptyCorpus(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}
