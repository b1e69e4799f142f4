//! HTTP service for causal analysis sessions: bearer-token auth, per-session
//! owner/viewer roles, background step jobs and on-disk persistence.

mod api;
pub mod auth;
pub mod chat;
pub mod error;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::router;
pub use auth::{Acl, Principal, Role, TokenEntry};
pub use chat::ChatConfig;
pub use error::ApiError;
pub use state::{parse_token_spec, AppState, Job, JobResult, JobState, ServerConfig};

/// A server bound to a local address and running on the current runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.handle.await.map_err(std::io::Error::other)?
    }
}

pub async fn start(cfg: ServerConfig, addr: SocketAddr) -> std::io::Result<RunningServer> {
    let state = AppState::new(cfg).map_err(|e| std::io::Error::other(e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let app = router(Arc::new(state));
    let handle = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        handle,
    })
}

/// Serves until Ctrl-C.
pub async fn serve(cfg: ServerConfig, addr: SocketAddr) -> std::io::Result<()> {
    let server = start(cfg, addr).await?;
    eprintln!("listening on {}", server.base_url());
    tokio::signal::ctrl_c().await?;
    server.stop().await
}
