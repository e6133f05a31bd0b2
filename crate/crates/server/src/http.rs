//! HTTP binding: `POST /dvcs`, `POST /status`, `GET /health`.
//!
//! Protocol failures travel in-band as signed error notices with status 200;
//! only transport problems (wrong content type, worker failure) use 4xx/5xx.

use std::future::Future;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use certval_core::vpm::{DVCS_CONTENT_TYPE, STATUS_CONTENT_TYPE};
use certval_core::GeneralizedTime;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::service::Service;

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/dvcs", post(dvcs))
        .route("/status", post(status))
        .route("/health", get(|| async { "ok" }))
        .with_state(service)
}

fn content_type_ok(headers: &HeaderMap, expected: &str) -> bool {
    match headers.get(header::CONTENT_TYPE) {
        None => true,
        Some(v) => v
            .to_str()
            .map(|s| {
                s.split(';')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .eq_ignore_ascii_case(expected)
            })
            .unwrap_or(false),
    }
}

fn der_response(content_type: &'static str, body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, content_type)], body).into_response()
}

async fn dvcs(State(service): State<Arc<Service>>, headers: HeaderMap, body: Bytes) -> Response {
    if !content_type_ok(&headers, DVCS_CONTENT_TYPE) {
        return (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            format!("expected {DVCS_CONTENT_TYPE}"),
        )
            .into_response();
    }
    let started = Instant::now();
    let outcome = match tokio::task::spawn_blocking(move || service.handle_dvcs(&body)).await {
        Ok(o) => o,
        Err(e) => {
            tracing::error!(error = %e, "dvcs worker failed");
            return (StatusCode::INTERNAL_SERVER_ERROR, "worker failed").into_response();
        }
    };
    let log = &outcome.log;
    tracing::info!(
        time = %GeneralizedTime::now(),
        nonce = log.nonce.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
        targets = log.targets,
        verdicts = %log.verdicts.join(","),
        serial = log.serial.unwrap_or(0),
        error = log.error.map(|e| e.label()).unwrap_or("-"),
        duration_ms = started.elapsed().as_secs_f64() * 1e3,
        "dvcs"
    );
    der_response(DVCS_CONTENT_TYPE, outcome.body)
}

async fn status(State(service): State<Arc<Service>>, headers: HeaderMap, body: Bytes) -> Response {
    if !content_type_ok(&headers, STATUS_CONTENT_TYPE) {
        return (
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            format!("expected {STATUS_CONTENT_TYPE}"),
        )
            .into_response();
    }
    match tokio::task::spawn_blocking(move || service.handle_status(&body)).await {
        Ok(Ok(reply)) => der_response(STATUS_CONTENT_TYPE, reply),
        Ok(Err(e)) => (StatusCode::BAD_REQUEST, e).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

/// Serves until `shutdown` resolves, then finishes in-flight requests.
pub async fn serve(
    listener: TcpListener,
    service: Arc<Service>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server on its own runtime thread; stops when dropped.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(service: Arc<Service>, addr: &str) -> io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            runtime.block_on(serve(listener, service, async {
                let _ = rx.await;
            }))
        });
        Ok(Self {
            addr,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) -> io::Result<()> {
        self.shutdown_and_join()
    }

    fn shutdown_and_join(&mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        let _ = self.shutdown_and_join();
    }
}
