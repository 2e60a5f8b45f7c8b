//! JSON API over one loaded model bundle.
//!
//! Handlers read an immutable [`ModelSnapshot`]; replacing the model swaps
//! the shared pointer, so a request sees either the old snapshot or the new
//! one and never a mix.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use gcs_core::bundle::{Bundle, BUNDLE_FORMAT_VERSION};
use gcs_core::curve::{resample, CurveMetrics, RawCurve, ResampledCurve};
use gcs_core::design::{DensityTable, GcsDesign};
use gcs_core::geometry::{design_stl, PrintabilityReport};
use gcs_core::inference::{predict_design, MetricDelta};
use gcs_core::nn::NETWORK_FORMAT_VERSION;
use gcs_core::pca::PCA_FORMAT_VERSION;
use gcs_core::vectorize::{DesignVector, PerformanceVector};
use gcs_core::GcsError;

mod openapi;

/// Everything a request may read.
#[derive(Debug)]
pub struct ModelSnapshot {
    pub bundle: Bundle,
    pub densities: DensityTable,
}

#[derive(Debug, Default)]
pub struct AppState {
    snapshot: RwLock<Option<Arc<ModelSnapshot>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_snapshot(snapshot: ModelSnapshot) -> Self {
        let state = Self::new();
        state.swap(snapshot);
        state
    }

    /// Installs a new snapshot and returns the previous one.
    pub fn swap(&self, snapshot: ModelSnapshot) -> Option<Arc<ModelSnapshot>> {
        let mut guard = self.snapshot.write().unwrap_or_else(|e| e.into_inner());
        guard.replace(Arc::new(snapshot))
    }

    pub fn current(&self) -> Option<Arc<ModelSnapshot>> {
        self.snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }
}

/// Error body: `{"error": message, "details": [...]}` plus extra fields.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn bad_request(message: impl Into<String>, details: Vec<Value>) -> Self {
        let mut e = Self::new(StatusCode::BAD_REQUEST, message);
        e.body["details"] = Value::Array(details);
        e
    }

    fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no model loaded")
    }
}

fn detail(err: &GcsError) -> Value {
    match err {
        GcsError::OutOfRange {
            parameter,
            value,
            lo,
            hi,
        } => json!({
            "field": parameter, "value": value, "range": [lo, hi], "message": err.to_string(),
        }),
        GcsError::InvalidCurve { row, reason } => json!({ "row": row, "message": reason }),
        other => json!({ "message": other.to_string() }),
    }
}

impl From<GcsError> for ApiError {
    fn from(err: GcsError) -> Self {
        if err.is_validation() {
            ApiError::bad_request(err.to_string(), vec![detail(&err)])
        } else {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, err.to_string())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("malformed request: {e}"), vec![]))
}

fn snapshot(state: &AppState) -> ApiResult<Arc<ModelSnapshot>> {
    state.current().ok_or_else(ApiError::no_model)
}

fn checked_design(design: &GcsDesign) -> ApiResult<()> {
    let violations = design.violations();
    if violations.is_empty() {
        return Ok(());
    }
    let fields: Vec<String> = violations
        .iter()
        .filter_map(|e| match e {
            GcsError::OutOfRange { parameter, .. } => Some(parameter.clone()),
            _ => None,
        })
        .collect();
    Err(ApiError::bad_request(
        format!("design out of range: {}", fields.join(", ")),
        violations.iter().map(detail).collect(),
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveBody {
    pub displacements: Vec<f64>,
    pub forces: Vec<f64>,
}

impl From<&ResampledCurve> for CurveBody {
    fn from(c: &ResampledCurve) -> Self {
        CurveBody {
            displacements: c.displacements(),
            forces: c.forces.clone(),
        }
    }
}

#[derive(Deserialize)]
struct DesignRequest {
    design: GcsDesign,
}

#[derive(Serialize)]
struct ForwardResponse {
    performance: PerformanceVector,
    curve: CurveBody,
    metrics: CurveMetrics,
}

async fn forward(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<Json<ForwardResponse>> {
    let snap = snapshot(&state)?;
    let req: DesignRequest = parse(&body)?;
    checked_design(&req.design)?;
    let p = predict_design(&snap.bundle.forward, &snap.bundle.pca, &req.design)?;
    Ok(Json(ForwardResponse {
        performance: p.performance,
        curve: CurveBody::from(&p.curve),
        metrics: p.metrics,
    }))
}

#[derive(Deserialize)]
struct InverseRequest {
    curve: CurveBody,
    alpha: f64,
}

#[derive(Serialize)]
struct InverseResponse {
    alpha: f64,
    design: GcsDesign,
    generated: DesignVector,
    predicted_curve: CurveBody,
    predicted_metrics: CurveMetrics,
    target_metrics: CurveMetrics,
    metrics_delta: MetricDelta,
    printability: PrintabilityReport,
    displacement_clamped: bool,
}

async fn inverse(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<Json<InverseResponse>> {
    let snap = snapshot(&state)?;
    let req: InverseRequest = parse(&body)?;
    let raw = RawCurve::from_columns(&req.curve.displacements, &req.curve.forces)?;
    let tandem = snap.bundle.tandem(req.alpha).ok_or_else(|| {
        let alphas = snap.bundle.alphas();
        let mut e = ApiError::new(
            StatusCode::NOT_FOUND,
            format!(
                "no inverse model for alpha {}; available: {alphas:?}",
                req.alpha
            ),
        );
        e.body["available"] = json!(alphas);
        e
    })?;
    let r = tandem.invert(&resample(&raw), &snap.densities)?;
    Ok(Json(InverseResponse {
        alpha: req.alpha,
        design: r.design,
        generated: r.generated,
        predicted_curve: CurveBody::from(&r.predicted.curve),
        predicted_metrics: r.predicted.metrics,
        target_metrics: r.target_metrics,
        metrics_delta: r.metrics_delta,
        printability: r.printability,
        displacement_clamped: r.displacement_clamped,
    }))
}

async fn mesh(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<Response> {
    let snap = snapshot(&state)?;
    let req: DesignRequest = parse(&body)?;
    checked_design(&req.design)?;
    let stl = design_stl(&req.design, &snap.densities)?;
    Ok(([(header::CONTENT_TYPE, "model/stl")], stl).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(match state.current() {
        None => json!({ "status": "no-model" }),
        Some(snap) => json!({
            "status": "ok",
            "alphas": snap.bundle.alphas(),
            "metadata": snap.bundle.metadata,
            "config": snap.bundle.config,
        }),
    })
}

async fn models(State(state): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let snap = snapshot(&state)?;
    Ok(Json(json!({
        "alphas": snap.bundle.alphas(),
        "versions": {
            "bundle": BUNDLE_FORMAT_VERSION,
            "network": NETWORK_FORMAT_VERSION,
            "pca": PCA_FORMAT_VERSION,
        },
    })))
}

async fn spec() -> Json<Value> {
    Json(openapi::document())
}

/// Cross-origin policy for browser clients served from another host.
#[derive(Clone, Debug, Default)]
pub enum Cors {
    #[default]
    Off,
    AnyOrigin,
    Origins(Vec<String>),
}

pub fn router(state: Arc<AppState>, cors: &Cors) -> Router {
    let app = Router::new()
        .route("/api/forward", post(forward))
        .route("/api/inverse", post(inverse))
        .route("/api/mesh", post(mesh))
        .route("/api/health", get(health))
        .route("/api/models", get(models))
        .route("/api/spec", get(spec))
        .with_state(state);
    let layer = match cors {
        Cors::Off => return app,
        Cors::AnyOrigin => CorsLayer::new().allow_origin(Any),
        Cors::Origins(list) => {
            let origins: Vec<HeaderValue> = list.iter().filter_map(|o| o.parse().ok()).collect();
            CorsLayer::new().allow_origin(AllowOrigin::list(origins))
        }
    };
    app.layer(layer.allow_methods(Any).allow_headers(Any))
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, cors: Cors) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, &cors)).await
}
