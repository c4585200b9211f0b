//! HTTP facilitation service over the `concord-core` engine.
//!
//! Every mutation is recorded as an event in a per-session JSON-lines log
//! and the in-memory state is rebuilt from those logs at startup.

mod app;
mod error;
mod routes;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use app::{AppState, Role, ServiceOptions, SharedState};
pub use error::ApiError;
pub use routes::router;
pub use store::FileStore;

#[derive(Debug, Clone)]
pub struct Config {
    pub data_dir: PathBuf,
    pub bind: SocketAddr,
    pub options: ServiceOptions,
}

/// Loads every session in `data_dir` into a ready-to-serve state.
pub fn load_state(data_dir: impl Into<PathBuf>, options: ServiceOptions) -> std::io::Result<SharedState> {
    let store = FileStore::open(data_dir)?;
    Ok(Arc::new(AppState::load(store, options)?))
}

/// Runs the service until the process is interrupted.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let state = load_state(&config.data_dir, config.options)?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
