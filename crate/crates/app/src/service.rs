//! HTTP service over one immutable loaded model.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use democirc_core::data::load_csv_path;
use democirc_core::explain::{BackgroundSet, DEFAULT_BACKGROUND_SIZE};
use democirc_core::learners::{load_model_path, model_fingerprint, PersistError, TrainedModel};
use serde::de::DeserializeOwned;
use thiserror::Error;
use tower_http::cors::{Any, CorsLayer};

use crate::api::{self, ApiError, PredictRequest};
use crate::building::BuildingModelFile;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot load model {path}: {source}")]
    Model { path: PathBuf, source: PersistError },
    #[error("cannot load background set {path}: {message}")]
    Background { path: PathBuf, message: String },
    #[error("cannot open request log {path}: {source}")]
    Log { path: PathBuf, source: std::io::Error },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Serve(std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub model_path: PathBuf,
    /// Labelled CSV to sample the explanation background from.
    pub background_path: Option<PathBuf>,
    pub background_size: usize,
    pub seed: u64,
    pub request_log: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(model_path: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            model_path: model_path.into(),
            background_path: None,
            background_size: DEFAULT_BACKGROUND_SIZE,
            seed: 7,
            request_log: None,
        }
    }
}

pub struct AppState {
    pub model: TrainedModel,
    pub fingerprint: String,
    pub background: Option<BackgroundSet>,
    log: Option<Mutex<File>>,
}

impl AppState {
    pub fn new(model: TrainedModel, background: Option<BackgroundSet>) -> Self {
        AppState {
            fingerprint: model_fingerprint(&model),
            model,
            background,
            log: None,
        }
    }

    /// Loads everything the config names; any failure means no service.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let model = load_model_path(&config.model_path).map_err(|source| ServiceError::Model {
            path: config.model_path.clone(),
            source,
        })?;
        let background = match &config.background_path {
            Some(path) => {
                let err = |message: String| ServiceError::Background { path: path.clone(), message };
                let data = load_csv_path(path).map_err(|e| err(e.to_string()))?;
                Some(BackgroundSet::sample(&data, config.background_size, config.seed).map_err(|e| err(e.to_string()))?)
            }
            None => None,
        };
        let mut state = AppState::new(model, background);
        if let Some(path) = &config.request_log {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|source| ServiceError::Log { path: path.clone(), source })?;
            state.log = Some(Mutex::new(file));
        }
        Ok(state)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(serde_json::json!({ "error": self }))).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes, code: &'static str) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(code, e.to_string()))
}

async fn healthz() -> &'static str {
    "ok"
}

async fn model_info(State(state): State<Arc<AppState>>) -> Json<api::ModelInfo> {
    Json(api::model_info(&state.model, &state.fingerprint, state.background.as_ref()))
}

async fn predict(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<api::PredictResponse>, ApiError> {
    let req: PredictRequest = parse_body(&body, "malformed_request")?;
    api::handle_predict(&req, &state.model, &state.fingerprint).map(Json)
}

async fn explain(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<api::ExplainResponse>, ApiError> {
    let req: PredictRequest = parse_body(&body, "malformed_request")?;
    let state = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        api::handle_explain(&req, &state.model, &state.fingerprint, state.background.as_ref())
    })
    .await
    .map_err(|e| ApiError::new(500, "internal", e.to_string()))?
    .map(Json)
}

async fn ingest(body: Bytes) -> Result<Json<api::IngestResponse>, ApiError> {
    let file: BuildingModelFile = parse_body(&body, "malformed_building")?;
    api::handle_ingest(&file).map(Json)
}

async fn not_found() -> ApiError {
    ApiError::new(404, "not_found", "no such endpoint")
}

async fn request_log(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let Some(log) = &state.log else {
        return next.run(req).await;
    };
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let started = Instant::now();
    let response = next.run(req).await;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    if let Ok(mut file) = log.lock() {
        let _ = writeln!(
            file,
            "{stamp:.3} {method} {path} {} {:.3}ms",
            response.status().as_u16(),
            started.elapsed().as_secs_f64() * 1e3
        );
    }
    response
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/model/info", get(model_info))
        .route("/v1/predict", post(predict))
        .route("/v1/explain", post(explain))
        .route("/v1/ingest", post(ingest))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(Arc::clone(&state), request_log))
        .layer(cors)
        .with_state(state)
}

/// Loads the model, binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(&config)?);
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServiceError::Bind { addr: config.bind, source })?;
    let addr = listener.local_addr().map_err(ServiceError::Serve)?;
    eprintln!(
        "serving {} model {} on http://{addr}",
        state.model.kind().display_name(),
        state.fingerprint
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(ServiceError::Serve)
}
