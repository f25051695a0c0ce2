//! HTTP facade over certification sessions. Sessions live in memory and are
//! mirrored to a data directory: `index.json` lists session records, each
//! session appends its judgments to `<id>.jsonl`, and a closed session writes
//! `<id>.certificate.json`. On start-up the index is read back and every
//! session is rebuilt by replaying its log.

mod error;
mod routes;
mod store;

pub use error::ApiError;
pub use axum::Router;
pub use routes::router;
pub use store::{CreateSession, JudgmentRequest, SessionRecord, Store};

use std::net::SocketAddr;
use std::sync::Arc;

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<Store>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_with(listener, router(store)).await
}

pub async fn serve_with(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
