//! HTTP backend for tuning weak labels interactively and reviewing
//! predicted farms.
//!
//! The service opens a [`Workspace`] (cluster model plus patches), replays
//! its journal into a [`Session`] and exposes it through [`router`].

mod api;
pub mod journal;
mod session;
pub mod workspace;

use std::sync::Arc;

pub use api::{router, VERSION_HEADER};
pub use session::{
    ExportManifest, ExportedFile, OverlayLayer, PixelLabel, QueueItem, ServiceConfig, ServiceError, ServiceResult, Session,
    Snapshot, TrainOutcome,
};
pub use workspace::{Prediction, Workspace};

/// Serves the session until the listener fails or the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, session: Arc<Session>) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(session)).await
}
