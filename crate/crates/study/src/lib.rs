//! HTTP service for human dialogue collection and side-by-side evaluation
//! of simulated dialogues.
//!
//! State lives in an append-only event log ([`wal`]); [`Study`] holds the
//! in-memory view and [`api::router`] exposes it over HTTP. [`echo`] is a
//! minimal chat-completion endpoint for local runs.

pub mod api;
pub mod echo;
pub mod state;
pub mod wal;

pub use api::router;
pub use state::{
    Clock, ExportFilter, NextGoalOutcome, PairSummary, PairView, SessionView, ShownUtterance, Speaker, Study,
    StudyConfig, StudyError, DEFAULT_PAIRS,
};

use std::net::SocketAddr;
use std::sync::Arc;

/// Serves the study API on `addr` until the future is dropped or fails.
pub async fn serve(study: Arc<Study>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "study service listening");
    axum::serve(listener, router(study)).await
}

/// Serves the echo chat-completion endpoint on `addr`.
pub async fn serve_echo(addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, route = echo::ROUTE, "echo endpoint listening");
    axum::serve(listener, echo::router()).await
}
