//! HTTP front end for a live label index.
//!
//! Predictions read an immutable snapshot of the taxonomy and its index;
//! label additions and removals build a new snapshot off to the side and
//! swap it in. Every response that depends on the taxonomy carries the
//! version it was computed against.

mod api;
mod error;
mod state;

pub use api::{router, AddLabelRequest, LabelView, PredictRequest, PredictResponse, TaxonomyView, VersionResponse};
pub use error::ApiError;
pub use state::{AppState, ServiceConfig, Snapshot};

/// Serves `state` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}
