//! HTTP service for browsing weak labels, editing lexicons and grammar
//! versions, relabeling, clustering and training.

mod api;
mod error;
mod state;

use std::net::SocketAddr;

pub use api::{router, ChangedLabel, ClusterResponse, ClusterView, CommentContext, RelabelResponse, SentencePage, SentenceRecord};
pub use error::{ApiError, ServiceError};
pub use state::{AppState, GrammarVersion, Job, JobStatus, ServiceConfig, TrainingSummary, VersionSummary};

/// Serves the router until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
