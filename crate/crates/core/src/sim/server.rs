//! HTTP server for a generated corpus.
//!
//! The Host header picks the domain directory and the request path picks the
//! file. Absolute-form request targets (`GET http://host/path`) are accepted
//! too, so the server works as a forward proxy for the fetcher.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tracing::{debug, info};

use super::{io_err, read_corpus, SimError};

type Pages = HashMap<(String, String), Arc<[u8]>>;

/// Running corpus server; shuts down gracefully when dropped.
pub struct ServerHandle {
    local_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
    pages: usize,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn page_count(&self) -> usize {
        self.pages
    }

    pub async fn wait(&mut self) {
        let _ = (&mut self.task).await;
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

pub async fn serve_corpus(corpus_dir: &Path, listen: SocketAddr) -> Result<ServerHandle, SimError> {
    let docs = read_corpus(corpus_dir)?;
    if docs.is_empty() {
        return Err(SimError::EmptyCorpus(corpus_dir.display().to_string()));
    }
    let mut pages: Pages = HashMap::with_capacity(docs.len());
    for d in docs {
        let path = url::Url::parse(&d.url)
            .map(|u| u.path().to_string())
            .unwrap_or_else(|_| "/".to_string());
        pages.insert((d.domain, path), Arc::from(d.html));
    }
    let count = pages.len();
    let listen_path = std::path::PathBuf::from(listen.to_string());
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(io_err(&listen_path))?;
    let local_addr = listener.local_addr().map_err(io_err(&listen_path))?;
    info!(%local_addr, pages = count, "corpus server listening");
    let app = Router::new().fallback(handle).with_state(Arc::new(pages));
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(ServerHandle {
        local_addr,
        shutdown: Some(tx),
        task,
        pages: count,
    })
}

async fn handle(State(pages): State<Arc<Pages>>, req: Request) -> Response {
    let host = req
        .headers()
        .get(header::HOST)
        .and_then(|h| h.to_str().ok())
        .map(str::to_string)
        .or_else(|| req.uri().authority().map(|a| a.as_str().to_string()))
        .unwrap_or_default();
    let host = strip_port(&host).trim_end_matches('.').to_ascii_lowercase();
    let path = req.uri().path().to_string();
    match pages.get(&(host.clone(), path.clone())) {
        Some(body) => {
            debug!(%host, %path, "200");
            (
                [(header::CONTENT_TYPE, "text/html; charset=utf-8")],
                Body::from(body.to_vec()),
            )
                .into_response()
        }
        None => {
            debug!(%host, %path, "404");
            (StatusCode::NOT_FOUND, "not found\n").into_response()
        }
    }
}

fn strip_port(host: &str) -> &str {
    if let Some(end) = host.find(']') {
        return &host[..=end];
    }
    host.rsplit_once(':').map_or(host, |(h, _)| h)
}
