//! HTTP service over the workspace engine.
//!
//! Every state change goes through one logged engine operation, taken under
//! the workspace's write lock. AI work runs as jobs against snapshots.

pub mod config;
pub mod error;
mod extract;
pub mod jobs;
pub mod routes;
pub mod state;

pub use config::ServerConfig;
pub use error::{ApiError, ErrorBody};
pub use routes::router;
pub use state::AppState;

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
