//! Ask/tell HTTP service over file-backed campaigns.
//!
//! Every campaign lives in its own JSON file; writes go through a temp file
//! and a rename, and a request is acknowledged only after the rename.

pub mod api;
pub mod config;
pub mod store;

use std::sync::Arc;

use axum::Router;
use tower_http::services::ServeDir;

pub use api::{router, AppState, CreateResponse, Summary, FAULT_AFTER_PERSIST};
pub use config::{ConfigError, FileConfig, Overrides, ServiceConfig};
pub use store::{new_id, write_atomic, CampaignStore, StoreError};

/// The API router, plus the static console when `config.static_dir` is set.
pub fn app(config: &ServiceConfig) -> std::io::Result<Router> {
    let store = CampaignStore::open(&config.store)?;
    let state = Arc::new(AppState::new(store, config.engine.clone()));
    let api = router(state);
    Ok(match &config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    })
}
