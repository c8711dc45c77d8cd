use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use catbox_core::{
    Campaign, CampaignConfig, CampaignError, Incumbent, MixedPoint, Observation, SearchSpace, SpaceSpec,
    Suggestion, TrustRegionState,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::store::{CampaignStore, StoreError};

/// Environment variable that makes the process abort right after a tell has
/// been persisted and before the response is sent. Used by crash tests.
pub const FAULT_AFTER_PERSIST: &str = "CATBOX_FAULT_AFTER_PERSIST";

pub struct AppState {
    pub store: CampaignStore,
    pub default_engine: CampaignConfig,
    pub fault_after_persist: bool,
}

impl AppState {
    pub fn new(store: CampaignStore, default_engine: CampaignConfig) -> Self {
        Self {
            store,
            default_engine,
            fault_after_persist: std::env::var_os(FAULT_AFTER_PERSIST).is_some(),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), field: None }
    }

    fn with_field(mut self, field: Option<&str>) -> Self {
        self.field = field.map(str::to_string);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = json!(f);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    space: serde_json::Value,
    #[serde(default)]
    config: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub initial_design: Vec<MixedPoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TellRequest {
    point: MixedPoint,
    y: f64,
    #[serde(default)]
    iteration: Option<u64>,
}

/// Response to a tell.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub id: String,
    pub n_observations: usize,
    pub observation: Observation,
    pub incumbent: Option<Incumbent>,
    pub trust_region: TrustRegionState,
    pub remaining_initial: usize,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/campaigns", post(create).get(list))
        .route("/campaigns/{id}", get(fetch))
        .route("/campaigns/{id}/tell", post(tell))
        .route("/campaigns/{id}/suggest", post(suggest))
        .route("/campaigns/{id}/export.csv", get(export))
        .with_state(state)
}

async fn create(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<CreateResponse>)> {
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, m);
    let req: CreateRequest = serde_json::from_slice(&body).map_err(|e| bad(format!("invalid request body: {e}")))?;
    let spec: SpaceSpec = serde_json::from_value(req.space)
        .map_err(|e| bad(format!("invalid space: {e}")).with_field(Some("space")))?;
    let space = SearchSpace::new(spec.categoricals, spec.continuous)
        .map_err(|e| bad(e.to_string()).with_field(e.field()))?;
    let config = match req.config {
        Some(v) => serde_json::from_value::<CampaignConfig>(v)
            .map_err(|e| bad(format!("invalid config: {e}")).with_field(Some("config")))?,
        None => st.default_engine.clone(),
    };
    let campaign = Campaign::new(space, config).map_err(|e| bad(e.to_string()).with_field(Some("config")))?;
    let id = st.store.create(&campaign)?;
    log::info!("created campaign {id}");
    Ok((
        StatusCode::CREATED,
        Json(CreateResponse { id, initial_design: campaign.initial_design }),
    ))
}

async fn list(State(st): State<Arc<AppState>>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(st.store.list()?))
}

fn json_text(text: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], text).into_response()
}

async fn fetch(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_text(st.store.read_raw(&id)?))
}

async fn export(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let campaign = st.store.read(&id)?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], campaign.history_csv()).into_response())
}

async fn tell(State(st): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Summary>> {
    let lock = st.store.lock(&id);
    let _guard = lock.lock().await;
    let mut campaign = st.store.read(&id)?;
    let conflict = |m: String| ApiError::new(StatusCode::CONFLICT, m);
    let req: TellRequest = serde_json::from_slice(&body).map_err(|e| conflict(format!("malformed observation: {e}")))?;

    let st2 = st.clone();
    let id2 = id.clone();
    let summary = tokio::task::spawn_blocking(move || -> ApiResult<Summary> {
        let observation = campaign
            .tell_at(req.point, req.y, req.iteration)
            .map_err(|e| conflict(e.to_string()))?
            .clone();
        if let Err(e) = campaign.refit() {
            log::warn!("refit after tell failed: {e}");
        }
        st2.store.write(&id2, &campaign)?;
        if st2.fault_after_persist {
            std::process::abort();
        }
        Ok(Summary {
            id: id2,
            n_observations: campaign.history.len(),
            observation,
            incumbent: campaign.incumbent.clone(),
            trust_region: campaign.tr.clone(),
            remaining_initial: campaign.remaining_initial().len(),
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(summary))
}

async fn suggest(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Suggestion>> {
    let lock = st.store.lock(&id);
    let _guard = lock.lock().await;
    let mut campaign = st.store.read(&id)?;
    let st2 = st.clone();
    let suggestion = tokio::task::spawn_blocking(move || -> ApiResult<Suggestion> {
        let had_pending = campaign.pending.clone();
        let s = campaign.suggest().map_err(|e| match e {
            CampaignError::NoObservations => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        })?;
        if had_pending.as_ref() != Some(&s) {
            st2.store.write(&id, &campaign)?;
        }
        Ok(s)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(suggestion))
}
