//! JSON-over-HTTP planning service.
//!
//! Each session holds an instance, the settings of its last solve, the
//! current placement and the list of committed what-if deltas. Solves run on
//! the blocking thread pool; within a session only one runs at a time.
//!
//! ```text
//! POST /v1/sessions                       instance document -> {id}
//! GET  /v1/sessions/{id}
//! POST /v1/sessions/{id}/solve            {algorithm, policy?, split, timeLimit?, seed?}
//! POST /v1/sessions/{id}/whatif           {delta, commit, timeLimit?}
//! GET  /v1/sessions/{id}/jobs/{job}       result of a solve that answered 202
//! GET  /v1/sessions/{id}/placement
//! GET  /v1/sessions/{id}/availability
//! ```

pub mod api;
pub mod delta;
pub mod session;

use std::net::SocketAddr;

pub use api::{availability_view, router, AppState, ServiceConfig};
pub use delta::{Delta, Target};
pub use session::{AlgorithmKind, SolveSettings};

/// Serves the API on `addr` until the process ends.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::restore(config).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
