//! Local simulated world shared by the end-to-end tests.

#![allow(dead_code)]

pub mod oracle;

use std::net::{SocketAddr, SocketAddrV4};
use std::path::{Path, PathBuf};
use std::time::Duration;

use tagcrawl_core::dnsprobe::{ProbeConfig, Prober, SinkSet};
use tagcrawl_core::engine::Components;
use tagcrawl_core::fetch::{FetchConfig, Fetcher};
use tagcrawl_core::search::{SimulatedBackend, SimulatedIndex};
use tagcrawl_core::sim::{
    self, CensorSpec, InjectorHandle, Manifest, ServerHandle, WorldSpec, BACKGROUND_FILE,
    CORPUS_DIR, STOPWORDS_FILE,
};
use tagcrawl_core::textproc::CorpusModel;

pub const PROBE_TIMEOUT: Duration = Duration::from_millis(200);

pub fn localhost() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

pub fn v4(addr: SocketAddr) -> SocketAddrV4 {
    match addr {
        SocketAddr::V4(a) => a,
        SocketAddr::V6(_) => panic!("expected an IPv4 address"),
    }
}

pub fn prober_for(injector: &InjectorHandle, copies: usize) -> Prober {
    let sinks = SinkSet::new(vec![v4(injector.local_addr()); copies]).unwrap();
    Prober::new(
        sinks,
        ProbeConfig {
            timeout: PROBE_TIMEOUT,
            ..ProbeConfig::default()
        },
    )
}

/// A generated world with its censor, web server, search index and prober
/// all running on loopback.
pub struct SimWorld {
    pub dir: tempfile::TempDir,
    pub manifest: Manifest,
    pub injector: InjectorHandle,
    pub server: ServerHandle,
    pub prober: Prober,
    pub fetcher: Fetcher,
    pub backend: SimulatedBackend,
    pub model: CorpusModel,
}

impl SimWorld {
    pub async fn start(spec: &WorldSpec) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let manifest = sim::generate_world(spec, dir.path(), false).unwrap();
        Self::start_in(dir, manifest).await
    }

    /// Starts services over an already generated world directory.
    pub async fn start_in(dir: tempfile::TempDir, manifest: Manifest) -> Self {
        let world = dir.path();
        let injector = sim::run_injector(CensorSpec::new(manifest.blacklist.clone()), localhost())
            .await
            .unwrap();
        let server = sim::serve_corpus(&world.join(CORPUS_DIR), localhost()).await.unwrap();
        let fetcher = Fetcher::new(FetchConfig {
            proxy: Some(format!("http://{}", server.local_addr())),
            per_domain_delay: Duration::ZERO,
            ..FetchConfig::default()
        })
        .unwrap();
        let backend = SimulatedBackend::new(SimulatedIndex::build(&world.join(CORPUS_DIR)).unwrap());
        let model = CorpusModel::load(&world.join(BACKGROUND_FILE), &world.join(STOPWORDS_FILE)).unwrap();
        let prober = prober_for(&injector, 1);
        Self {
            dir,
            manifest,
            injector,
            server,
            prober,
            fetcher,
            backend,
            model,
        }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.path().join(CORPUS_DIR)
    }

    pub fn components(&self) -> Components<'_> {
        Components {
            checker: &self.prober,
            pages: &self.fetcher,
            search: &self.backend,
            model: &self.model,
        }
    }

    pub fn blacklisted_urls(&self) -> Vec<String> {
        self.manifest
            .domains
            .iter()
            .filter(|d| d.blacklisted)
            .flat_map(|d| d.urls.clone())
            .collect()
    }
}
