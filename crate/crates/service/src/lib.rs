//! HTTP/JSON API over the skelmap pipeline for interactive front ends.
//!
//! Sessions hold one point cloud each. Every computed artifact is cached
//! under a hash of the parameters that produced it, so repeating a request
//! returns the stored response. See `docs/api.md` for the endpoints.

mod error;
mod handlers;
mod state;

use std::net::SocketAddr;

use axum::http::HeaderValue;
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use state::{param_hash, AppState, ServiceConfig};

pub fn router(state: AppState) -> Router {
    let cors = match &state.config().cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);

    let api = Router::new()
        .route("/health", get(handlers::health))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/cloud", get(handlers::get_cloud))
        .route("/sessions/{id}/skeleton", post(handlers::skeleton))
        .route("/sessions/{id}/embed", post(handlers::embed))
        .route("/sessions/{id}/tear", post(handlers::tear))
        .route("/sessions/{id}/tear/rank", get(handlers::tear_rank))
        .route("/sessions/{id}/project", post(handlers::project))
        .route("/sessions/{id}/project/search", get(handlers::project_search))
        .route("/sessions/{id}/persistence", get(handlers::persistence))
        .route("/jobs/{id}", get(handlers::get_job));
    let app = match &state.config().static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state).layer(cors)
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("skelmap service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
