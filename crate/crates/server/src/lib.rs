//! HTTP service and command-line front end over [`barangay_core`].

pub mod api;
pub mod config;
pub mod error;
pub mod sessions;

use std::future::Future;
use std::sync::Arc;

use barangay_core::access::Role;
use barangay_core::System;
use tokio::net::TcpListener;

pub use api::{router, AppState};

/// Creates the first secretary account when the store has none.
pub fn bootstrap_admin(sys: &System, user: Option<&str>, password: Option<&str>) -> anyhow::Result<()> {
    if sys.has_accounts() {
        return Ok(());
    }
    match (user, password) {
        (Some(u), Some(p)) => {
            sys.create_account(u, p, Role::Secretary, None)?;
            tracing::info!(username = u, "created initial secretary account");
        }
        _ => tracing::warn!(
            "no accounts exist; set BARANGAY_ADMIN_USER and BARANGAY_ADMIN_PASSWORD or run `barangay useradd`"
        ),
    }
    Ok(())
}

/// Serves the API on `listener` until `shutdown` resolves. Broadcasts left
/// unfinished by a previous run are resumed first.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if state.sys.has_gateway() {
        for job in state.sys.unfinished_jobs() {
            tracing::info!(%job, "resuming broadcast");
            api::spawn_dispatch(Arc::clone(&state.sys), job);
        }
    }
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
